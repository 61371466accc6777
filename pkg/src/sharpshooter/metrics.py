"""Counterfactual quality metrics and their per-method aggregation.

Except for validity and time, every mean is taken over the counterfactuals
that actually classify as the target class.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .schema import FeatureSchema
from .vae import VaeModel, encode, negative_elbo, reconstruct

HALF_PIXEL = 0.5 / 255.0
CONTINUOUS_EPS = 1e-9

# column -> whether larger is better
COLUMNS = {
    "validity": True,
    "proximity": False,
    "sparsity": False,
    "classifier_shift": False,
    "reconstruction": False,
    "time": False,
}
LABELS = {"validity": "val", "proximity": "prox", "sparsity": "spars",
          "classifier_shift": "CS", "reconstruction": "recon", "time": "time"}


def _score(f, x) -> np.ndarray:
    return np.asarray(f(np.atleast_2d(x)), dtype=np.float64).reshape(-1)


def crossing_mask(f, results, p=0.5) -> np.ndarray:
    """Which results hold a counterfactual that the classifier places above ``p``."""
    mask = np.zeros(len(results), dtype=bool)
    for i, r in enumerate(results):
        if r.x_cf is not None:
            mask[i] = _score(f, r.x_cf)[0] > p
    return mask


def validity(results, f=None, p=0.5) -> float:
    if not results:
        raise ContractError("validity of an empty batch is undefined")
    if f is None:
        return sum(r.crossed for r in results) / len(results)
    return float(crossing_mask(f, results, p).sum() / len(results))


def proximity(uvae: VaeModel, x_base, x_cf) -> float:
    zb = encode(uvae, x_base)[0]
    zc = encode(uvae, x_cf)[0]
    return float(np.linalg.norm(zb - zc))


def sparsity(x_base, x_cf, schema: FeatureSchema, pixel_threshold=HALF_PIXEL) -> float:
    xb = schema.check(x_base)[0]
    xc = schema.check(x_cf)[0]
    if schema.pixel_mode:
        return float(np.count_nonzero(np.abs(xc - xb) > pixel_threshold) / schema.n_pixels)
    k = schema.n_continuous
    changed = int(np.count_nonzero(np.abs(xc[:k] - xb[:k]) > CONTINUOUS_EPS))
    for lo, hi in schema.group_slices:
        changed += int(np.argmax(xb[lo:hi]) != np.argmax(xc[lo:hi]))
    return changed / schema.n_features


def classifier_shift(f, uvae: VaeModel, x_cf) -> float:
    return float(abs(_score(f, x_cf)[0] - _score(f, reconstruct(uvae, x_cf))[0]))


def reconstruction_score(uvae: VaeModel, x_cf) -> float:
    return negative_elbo(uvae, x_cf).total


@dataclass
class MetricsReport:
    method: str
    n_attempted: int
    n_valid: int
    validity: float
    proximity: float
    sparsity: float
    classifier_shift: float
    reconstruction: float
    time: float
    meta: dict = field(default_factory=dict)

    @property
    def n_excluded(self) -> int:
        return self.n_attempted - self.n_valid

    def to_dict(self, include_time=True) -> dict:
        d = {"method": self.method, "n_attempted": self.n_attempted, "n_valid": self.n_valid,
             "n_excluded": self.n_excluded}
        for col in COLUMNS:
            if col == "time" and not include_time:
                continue
            v = getattr(self, col)
            d[col] = None if math.isnan(v) else v
        d["meta"] = dict(self.meta)
        return d


def evaluate_batch(f, uvae: VaeModel, results, p=0.5, pixel_threshold=HALF_PIXEL) -> MetricsReport:
    if not results:
        raise ContractError("cannot evaluate an empty batch")
    methods = {r.method for r in results}
    if len(methods) != 1:
        raise ContractError(f"batch mixes methods {sorted(methods)}")
    mask = crossing_mask(f, results, p)
    kept = [r for r, m in zip(results, mask) if m]
    nan = float("nan")

    def mean(values):
        return float(np.mean(values)) if values else nan

    schema = uvae.schema
    return MetricsReport(
        method=methods.pop(),
        n_attempted=len(results),
        n_valid=len(kept),
        validity=len(kept) / len(results),
        proximity=mean([proximity(uvae, r.x_base, r.x_cf) for r in kept]),
        sparsity=mean([sparsity(r.x_base, r.x_cf, schema, pixel_threshold) for r in kept]),
        classifier_shift=mean([classifier_shift(f, uvae, r.x_cf) for r in kept]),
        reconstruction=mean([reconstruction_score(uvae, r.x_cf) for r in kept]),
        time=float(np.mean([r.wall_time for r in results])),
        meta={"p": p, "half_pixel_threshold": pixel_threshold, "pixel_mode": schema.pixel_mode},
    )


def best_per_column(reports, include_time=True) -> dict:
    best = {}
    for col, larger in COLUMNS.items():
        if col == "time" and not include_time:
            continue
        vals = [(getattr(r, col), r.method) for r in reports if not math.isnan(getattr(r, col))]
        if vals:
            best[col] = (max if larger else min)(vals, key=lambda t: t[0])[1]
    return best


def reports_to_dict(reports, include_time=True) -> dict:
    return {"methods": [r.to_dict(include_time) for r in reports],
            "best": best_per_column(reports, include_time)}


def render_table(reports, include_time=True) -> str:
    """Method rows by metric columns; the best entry per column is starred."""
    cols = [c for c in COLUMNS if include_time or c != "time"]
    best = best_per_column(reports, include_time)
    header = ["method"] + [LABELS[c] for c in cols]
    rows = []
    for r in reports:
        cells = [r.method]
        for c in cols:
            v = getattr(r, c)
            text = "-" if math.isnan(v) else f"{v:.3g}"
            cells.append(text + ("*" if best.get(c) == r.method else ""))
        rows.append(cells)
    widths = [max(len(x) for x in col) for col in zip(header, *rows)]
    line = lambda cells: "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    out = [line(header), "  ".join("-" * w for w in widths)]
    out.extend(line(r) for r in rows)
    return "\n".join(out) + "\n"
