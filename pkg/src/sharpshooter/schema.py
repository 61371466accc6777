"""Feature layout of an encoded row: continuous columns first, then one-hot groups."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, ShapeError


@dataclass(frozen=True)
class FeatureSchema:
    continuous: tuple = ()
    categorical: tuple = ()  # (name, cardinality) pairs
    pixel_mode: bool = False
    n_pixels: int = 0

    def __post_init__(self):
        object.__setattr__(self, "continuous", tuple(self.continuous))
        object.__setattr__(self, "categorical",
                           tuple((str(n), int(k)) for n, k in self.categorical))
        if self.pixel_mode:
            if self.categorical or self.continuous:
                raise ContractError("pixel-mode schemas carry no named features")
            if self.n_pixels <= 0:
                raise ContractError("pixel-mode schema needs n_pixels > 0")
        for name, k in self.categorical:
            if k < 2:
                raise ContractError(f"categorical {name!r} needs cardinality >= 2")

    @classmethod
    def pixels(cls, n: int) -> "FeatureSchema":
        return cls(pixel_mode=True, n_pixels=n)

    @property
    def n_continuous(self) -> int:
        return self.n_pixels if self.pixel_mode else len(self.continuous)

    @property
    def n_groups(self) -> int:
        return len(self.categorical)

    @property
    def n_features(self) -> int:
        """Features before one-hot expansion."""
        return self.n_continuous + self.n_groups

    @property
    def input_dim(self) -> int:
        return self.n_continuous + sum(k for _, k in self.categorical)

    @property
    def group_slices(self) -> tuple:
        out = []
        start = self.n_continuous
        for _, k in self.categorical:
            out.append((start, start + k))
            start += k
        return tuple(out)

    @property
    def names(self) -> list:
        if self.pixel_mode:
            return [f"px{i}" for i in range(self.n_pixels)]
        cols = list(self.continuous)
        for name, k in self.categorical:
            cols.extend(f"{name}={j}" for j in range(k))
        return cols

    def check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(1, -1)
        if x.shape[1] != self.input_dim:
            raise ShapeError(f"schema expects {self.input_dim} columns, got {x.shape[1]}")
        return x

    def harden(self, x) -> np.ndarray:
        """Argmax-decode categorical groups to one-hot; clip pixels to [0, 1]."""
        x = self.check(x).copy()
        if self.pixel_mode:
            return np.clip(x, 0.0, 1.0)
        for lo, hi in self.group_slices:
            idx = np.argmax(x[:, lo:hi], axis=1)
            x[:, lo:hi] = 0.0
            x[np.arange(len(x)), lo + idx] = 1.0
        return x

    def to_dict(self) -> dict:
        return {
            "continuous": list(self.continuous),
            "categorical": [[n, k] for n, k in self.categorical],
            "pixel_mode": self.pixel_mode,
            "n_pixels": self.n_pixels,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        return cls(tuple(d.get("continuous", ())),
                   tuple(tuple(c) for c in d.get("categorical", ())),
                   bool(d.get("pixel_mode", False)), int(d.get("n_pixels", 0)))
