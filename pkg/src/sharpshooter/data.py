"""Synthetic dataset generation, CSV ingestion, standardization and one-hot coding.

Label 0 is the base (disadvantaged) class, label 1 the target class.
"""
from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ContractError
from .schema import FeatureSchema

GLYPH_SIDE = 8


def onehot_encode(index: int, cardinality: int) -> np.ndarray:
    if not 0 <= index < cardinality:
        raise ContractError(f"category index {index} out of range for cardinality {cardinality}")
    v = np.zeros(cardinality)
    v[index] = 1.0
    return v


def onehot_decode(v) -> int:
    # np.argmax already breaks ties toward the lowest index
    return int(np.argmax(np.asarray(v)))


@dataclass
class Dataset:
    schema: FeatureSchema
    rows: np.ndarray
    labels: np.ndarray
    split: np.ndarray  # "train" / "test" per row

    def __post_init__(self):
        self.rows = self.schema.check(self.rows)
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        self.split = np.asarray(self.split, dtype=object).reshape(-1)
        if len(self.labels) != len(self.rows) or len(self.split) != len(self.rows):
            raise ContractError("rows, labels and split tags differ in length")
        if not set(np.unique(self.labels)) <= {0, 1}:
            raise ContractError("labels must be 0 or 1")
        for lo, hi in self.schema.group_slices:
            block = self.rows[:, lo:hi]
            if not (np.all((block == 0) | (block == 1)) and np.all(block.sum(axis=1) == 1)):
                raise ContractError("one-hot blocks must be exact unit vectors")

    def part(self, name: str):
        mask = self.split == name
        return self.rows[mask], self.labels[mask]

    @property
    def train(self):
        return self.part("train")

    @property
    def test(self):
        return self.part("test")

    def to_dict(self) -> dict:
        return {
            "schema": self.schema.to_dict(),
            "rows": self.rows.tolist(),
            "labels": self.labels.tolist(),
            "split": list(self.split),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Dataset":
        return cls(FeatureSchema.from_dict(d["schema"]), np.array(d["rows"], dtype=np.float64),
                   np.array(d["labels"]), np.array(d["split"], dtype=object))


def split_tags(n: int, test_fraction: float, rng: np.random.Generator) -> np.ndarray:
    n_test = int(round(n * test_fraction))
    order = rng.permutation(n)
    tags = np.full(n, "train", dtype=object)
    tags[order[:n_test]] = "test"
    return tags


# ---------------------------------------------------------------------------
# synthetic generation

@dataclass
class SyntheticSpec:
    """Two-class generator spec.

    Tabular mode draws continuous features from one Gaussian per class and
    each categorical group from a per-class distribution. Glyph mode draws
    8x8 images of two procedurally drawn shapes.
    """
    n_base: int = 1000
    n_target: int = 1000
    kind: str = "tabular"  # or "glyphs"
    continuous: list = field(default_factory=list)
    base_mean: list = field(default_factory=list)
    target_mean: list = field(default_factory=list)
    base_cov: Optional[list] = None  # None means identity
    target_cov: Optional[list] = None
    categorical: list = field(default_factory=list)  # [name, cardinality]
    base_cat_probs: list = field(default_factory=list)  # one distribution per group
    target_cat_probs: list = field(default_factory=list)
    glyph_jitter: int = 1
    glyph_noise: float = 0.05
    test_fraction: float = 0.2

    def schema(self) -> FeatureSchema:
        if self.kind == "glyphs":
            return FeatureSchema.pixels(GLYPH_SIDE * GLYPH_SIDE)
        return FeatureSchema(tuple(self.continuous), tuple(tuple(c) for c in self.categorical))

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ContractError(f"unknown synthetic spec keys: {sorted(unknown)}")
        return cls(**d)


def _cov_root(cov, dim: int, label: str) -> np.ndarray:
    if cov is None:
        return np.eye(dim)
    c = np.asarray(cov, dtype=np.float64)
    if c.shape != (dim, dim):
        raise ContractError(f"{label} covariance must be {dim}x{dim}")
    if not np.allclose(c, c.T):
        raise ContractError(f"{label} covariance is not symmetric")
    w, v = np.linalg.eigh(c)
    if w.min() < -1e-10 * max(1.0, abs(w).max()):
        raise ContractError(f"{label} covariance is not positive semi-definite")
    return v * np.sqrt(np.maximum(w, 0.0))


def _glyph(label: int, rng: np.random.Generator, jitter: int, noise: float) -> np.ndarray:
    img = np.zeros((GLYPH_SIDE, GLYPH_SIDE))
    ink = rng.uniform(0.7, 1.0)
    if label == 0:
        # vertical stroke with a short crossbar
        img[1:7, 4] = ink
        img[4, 2:6] = ink
    else:
        # closed ring
        img[1, 2:6] = ink
        img[6, 2:6] = ink
        img[2:6, 1] = ink
        img[2:6, 6] = ink
    if jitter:
        dy, dx = rng.integers(-jitter, jitter + 1, size=2)
        img = np.roll(img, (int(dy), int(dx)), axis=(0, 1))
    img = img + noise * rng.standard_normal(img.shape)
    return np.clip(img, 0.0, 1.0).reshape(-1)


def generate_synthetic_dataset(spec: SyntheticSpec, seed: int) -> Dataset:
    if spec.n_base <= 0 or spec.n_target <= 0:
        raise ContractError("both classes need at least one row")
    if not 0.0 <= spec.test_fraction < 1.0:
        raise ContractError("test_fraction must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    schema = spec.schema()
    sizes = (spec.n_base, spec.n_target)

    if spec.kind == "glyphs":
        blocks = [np.stack([_glyph(c, rng, spec.glyph_jitter, spec.glyph_noise)
                            for _ in range(sizes[c])]) for c in (0, 1)]
    elif spec.kind == "tabular":
        dim = len(spec.continuous)
        means = (np.asarray(spec.base_mean, float), np.asarray(spec.target_mean, float))
        if any(m.shape != (dim,) for m in means):
            raise ContractError(f"class means must have {dim} entries")
        roots = (_cov_root(spec.base_cov, dim, "base"), _cov_root(spec.target_cov, dim, "target"))
        probs = (spec.base_cat_probs, spec.target_cat_probs)
        for c in (0, 1):
            if len(probs[c]) != len(spec.categorical):
                raise ContractError("need one category distribution per group and class")
        blocks = []
        for c in (0, 1):
            n = sizes[c]
            parts = [means[c] + rng.standard_normal((n, dim)) @ roots[c].T]
            for (name, k), pr in zip(spec.categorical, probs[c]):
                pr = np.asarray(pr, dtype=np.float64)
                if pr.shape != (k,) or pr.min() < 0 or not np.isclose(pr.sum(), 1.0):
                    raise ContractError(f"bad category distribution for {name!r}")
                idx = rng.choice(k, size=n, p=pr)
                parts.append(np.eye(k)[idx])
            blocks.append(np.hstack(parts))
    else:
        raise ContractError(f"unknown dataset kind {spec.kind!r}")

    rows = np.vstack(blocks)
    labels = np.concatenate([np.zeros(sizes[0], int), np.ones(sizes[1], int)])
    order = rng.permutation(len(rows))
    rows, labels = rows[order], labels[order]
    return Dataset(schema, rows, labels, split_tags(len(rows), spec.test_fraction, rng))


# ---------------------------------------------------------------------------
# CSV ingestion

_CAT_TAG = re.compile(r"^cat\{(\d+)\}$")


def read_csv_dataset(path, seed: int, test_fraction: float = 0.2) -> Dataset:
    """Read a CSV whose header uses ``name:cont``, ``name:cat{k}`` and ``label`` tags.

    Categorical cells hold the category index.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        records = [r for r in reader if r]
    label_col = None
    cont, cats = [], []
    for j, tag in enumerate(header):
        tag = tag.strip()
        if tag == "label":
            label_col = j
            continue
        if ":" not in tag:
            raise ContractError(f"column {tag!r} lacks a type tag")
        name, kind = tag.rsplit(":", 1)
        m = _CAT_TAG.match(kind)
        if kind == "cont":
            cont.append((j, name))
        elif m:
            cats.append((j, name, int(m.group(1))))
        else:
            raise ContractError(f"unknown column type {kind!r} in {tag!r}")
    if label_col is None:
        raise ContractError("CSV has no label column")
    schema = FeatureSchema(tuple(n for _, n in cont), tuple((n, k) for _, n, k in cats))
    rows = np.zeros((len(records), schema.input_dim))
    labels = np.zeros(len(records), dtype=int)
    for i, rec in enumerate(records):
        for c, (j, _) in enumerate(cont):
            rows[i, c] = float(rec[j])
        for (j, _, k), (lo, _) in zip(cats, schema.group_slices):
            rows[i, lo:lo + k] = onehot_encode(int(rec[j]), k)
        labels[i] = int(rec[label_col])
    rng = np.random.default_rng(seed)
    return Dataset(schema, rows, labels, split_tags(len(rows), test_fraction, rng))


# ---------------------------------------------------------------------------
# standardization

@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    def apply(self, rows) -> np.ndarray:
        out = np.array(rows, dtype=np.float64, copy=True)
        k = len(self.mean)
        out[:, :k] = (out[:, :k] - self.mean) / self.std
        return out

    def inverse(self, rows) -> np.ndarray:
        out = np.array(rows, dtype=np.float64, copy=True)
        k = len(self.mean)
        out[:, :k] = out[:, :k] * self.std + self.mean
        return out

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(np.array(d["mean"], dtype=np.float64), np.array(d["std"], dtype=np.float64))


def fit_standardizer(train_rows, n_continuous: int) -> Standardizer:
    x = np.asarray(train_rows, dtype=np.float64)
    if x.shape[0] < 2:
        raise ContractError("need at least two rows to fit a standardizer")
    cont = x[:, :n_continuous]
    std = cont.std(axis=0)
    if np.any(std <= 0):
        bad = np.flatnonzero(std <= 0).tolist()
        raise ContractError(f"constant continuous feature(s) at columns {bad}")
    return Standardizer(cont.mean(axis=0), std)


def fit_apply_standardizer(train_rows, n_continuous: int):
    st = fit_standardizer(train_rows, n_continuous)
    return st, st.apply(train_rows)


def standardize_dataset(ds: Dataset):
    """Fit on the train split and transform every row. Pixel data passes through."""
    if ds.schema.pixel_mode or ds.schema.n_continuous == 0:
        return None, ds
    st = fit_standardizer(ds.train[0], ds.schema.n_continuous)
    return st, Dataset(ds.schema, st.apply(ds.rows), ds.labels, ds.split)
