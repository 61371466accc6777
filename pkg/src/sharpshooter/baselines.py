"""Gradient-descent counterfactual baselines in input space (GDI) and latent space (GDL).

Both minimize ``(c - f(x))**2`` where ``c`` is the centre of the accepted
score band ``{s : |s - T| < tol, s > p}``, and stop once the schema-valid
version of the current point lands in that band.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .classifier import ClassifierModel, classify_with_input_grad
from .errors import ContractError
from .results import FAILED, CounterfactualResult, band_centre, final_status, is_accepted
from .schema import FeatureSchema
from .vae import VaeModel, decode, decoder_input_gradient, encode

GRADIENT_MODES = ("analytic", "finite-difference")


@dataclass
class GdConfig:
    lr: float = 1.0
    max_iters: int = 1000
    tol: float = 0.05
    p: float = 0.5
    target: Optional[float] = None
    gradient_mode: str = "analytic"
    fd_step: float = 1e-5

    def __post_init__(self):
        if self.lr <= 0:
            raise ContractError("lr must be positive")
        if self.max_iters < 0:
            raise ContractError("max_iters must be >= 0")
        if self.tol <= 0:
            raise ContractError("tol must be positive")
        if not 0.0 < self.p < 1.0:
            raise ContractError("p must lie in (0, 1)")
        if self.gradient_mode not in GRADIENT_MODES:
            raise ContractError(f"gradient_mode must be one of {GRADIENT_MODES}")

    @property
    def T(self) -> float:
        return self.p if self.target is None else self.target


def _scalar(f, x) -> float:
    return float(np.asarray(f(x)).reshape(-1)[0])


def score_and_input_grad(f: Callable, x, cfg: GdConfig):
    """Score of a single row and its gradient with respect to that row."""
    if cfg.gradient_mode == "analytic":
        if not isinstance(f, ClassifierModel):
            raise ContractError("analytic gradients need a ClassifierModel; "
                                "use gradient_mode='finite-difference' for black boxes")
        s, g = classify_with_input_grad(f, x)
        return float(s[0]), g[0]
    return _scalar(f, x), _fd_grad(lambda v: _scalar(f, v), x[0], cfg.fd_step)


def _fd_grad(fn, v, h):
    g = np.zeros_like(v)
    for k in range(v.size):
        up = v.copy()
        down = v.copy()
        up[k] += h
        down[k] -= h
        g[k] = (fn(up[None]) - fn(down[None])) / (2.0 * h)
    return g


def project_simplex_blocks(x, schema: FeatureSchema):
    """Clip each one-hot block at zero and renormalize (uniform if it sums to zero)."""
    for lo, hi in schema.group_slices:
        block = np.maximum(x[:, lo:hi], 0.0)
        s = block.sum(axis=1, keepdims=True)
        x[:, lo:hi] = np.where(s > 0, block / np.where(s > 0, s, 1.0), 1.0 / (hi - lo))
    return x


def _schema_of(f, schema):
    if schema is not None:
        return schema
    if isinstance(f, ClassifierModel):
        return f.schema
    raise ContractError("a schema is required for black-box classifiers")


def _finish(method, x_base, x_final, score, it, cfg, t0):
    status = final_status(score, cfg.p, cfg.T, cfg.tol)
    elapsed = time.perf_counter() - t0
    if status == FAILED:
        return CounterfactualResult(x_base, None, method, FAILED, iterations=it, wall_time=elapsed)
    return CounterfactualResult(x_base, x_final, method, status, score, None, it, elapsed)


def gdi_cf(f: Callable, x_base, cfg: GdConfig, schema: Optional[FeatureSchema] = None):
    t0 = time.perf_counter()
    schema = _schema_of(f, schema)
    x = schema.check(x_base).copy()
    x0 = x[0].copy()
    aim = band_centre(cfg.p, cfg.T, cfg.tol)
    xf = schema.harden(x)
    score = _scalar(f, xf)
    it = 0
    while not is_accepted(score, cfg.p, cfg.T, cfg.tol) and it < cfg.max_iters:
        it += 1
        s, g = score_and_input_grad(f, x, cfg)
        x = x - cfg.lr * (-2.0 * (aim - s) * g)
        project_simplex_blocks(x, schema)
        xf = schema.harden(x)
        score = _scalar(f, xf)
    return _finish("gdi", x0, xf[0], score, it, cfg, t0)


def gdl_cf(f: Callable, uvae: VaeModel, x_base, cfg: GdConfig):
    t0 = time.perf_counter()
    schema = uvae.schema
    x_base = schema.check(x_base)
    aim = band_centre(cfg.p, cfg.T, cfg.tol)
    z = encode(uvae, x_base)[0]
    x_soft = decode(uvae, z)
    xf = schema.harden(x_soft)
    score = _scalar(f, xf)
    it = 0
    while not is_accepted(score, cfg.p, cfg.T, cfg.tol) and it < cfg.max_iters:
        it += 1
        if cfg.gradient_mode == "analytic":
            s, gx = score_and_input_grad(f, x_soft, cfg)
            gz = decoder_input_gradient(uvae, z, (-2.0 * (aim - s) * gx)[None])[0]
        else:
            loss = lambda v: (aim - _scalar(f, decode(uvae, v))) ** 2
            gz = _fd_grad(loss, z[0], cfg.fd_step)
        z = z - cfg.lr * gz
        x_soft = decode(uvae, z)
        xf = schema.harden(x_soft)
        score = _scalar(f, xf)
    return _finish("gdl", x_base[0], xf[0], score, it, cfg, t0)
