"""Per-sample counterfactual record and its JSON-lines form."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

VALID = "valid-within-tol"
CROSSED = "crossed-only"
FAILED = "failed"
STATUSES = (VALID, CROSSED, FAILED)
METHODS = ("ss-line", "ss-gd", "gdi", "gdl")


@dataclass
class CounterfactualResult:
    x_base: np.ndarray
    x_cf: Optional[np.ndarray]
    method: str
    status: str
    score: Optional[float] = None
    alpha: Optional[float] = None
    iterations: int = 0
    wall_time: float = 0.0

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        if (self.status == FAILED) != (self.x_cf is None):
            raise ValueError("x_cf is present exactly when the status is not 'failed'")

    @property
    def crossed(self) -> bool:
        return self.status != FAILED

    def to_dict(self, include_time=True) -> dict:
        d = {
            "method": self.method,
            "status": self.status,
            "alpha": self.alpha,
            "score": self.score,
            "iterations": self.iterations,
            "x_base": np.asarray(self.x_base).tolist(),
            "x_cf": None if self.x_cf is None else np.asarray(self.x_cf).tolist(),
        }
        if include_time:
            d["wall_time"] = self.wall_time
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CounterfactualResult":
        return cls(np.array(d["x_base"], dtype=np.float64),
                   None if d["x_cf"] is None else np.array(d["x_cf"], dtype=np.float64),
                   d["method"], d["status"], d.get("score"), d.get("alpha"),
                   int(d.get("iterations", 0)), float(d.get("wall_time", 0.0)))


def write_jsonl(results, fh, include_time=True):
    for r in results:
        fh.write(json.dumps(r.to_dict(include_time)) + "\n")


def read_jsonl(fh) -> list:
    return [CounterfactualResult.from_dict(json.loads(line)) for line in fh if line.strip()]


def acceptance_band(p: float, target: float, tol: float):
    """Score interval accepted as a counterfactual: |f - T| < tol and f > p."""
    return max(p, target - tol), target + tol


def is_accepted(score: float, p: float, target: float, tol: float) -> bool:
    return abs(score - target) < tol and score > p


def band_centre(p: float, target: float, tol: float) -> float:
    lo, hi = acceptance_band(p, target, tol)
    return 0.5 * (lo + hi) if hi > lo else target


def final_status(score: float, p: float, target: float, tol: float) -> str:
    if is_accepted(score, p, target, tol):
        return VALID
    return CROSSED if score > p else FAILED
