"""Counterfactual search along the latent line between a base sample and its projection.

A base sample is pushed through the target-class VAE to obtain a projection
that should classify as the target class. Both points are embedded with the
unified VAE's encoder mean, and candidates ``z(a) = (1 - a) z_base + a z_proj``
are decoded and scored by the classifier. ``line_search_cf`` scans a grid of
``a`` values in ascending order; ``alpha_gd_cf`` runs a 1-D descent on ``a``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ContractError
from .results import (CROSSED, FAILED, VALID, CounterfactualResult, band_centre,
                      final_status, is_accepted)
from .vae import VaeModel, decode, encode, reconstruct

ALPHA_MIN = 1e-6


@dataclass
class SharpShooterConfig:
    p: float = 0.5
    tol: float = 0.05
    target: Optional[float] = None  # defaults to p
    n_alpha: int = 100
    sampling: str = "grid"  # or "random"
    sampling_seed: int = 0
    gd_lr: float = 0.5
    gd_max_iters: int = 100
    gd_fd_step: float = 1e-3
    gd_alpha0: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ContractError("p must lie in (0, 1)")
        if self.tol <= 0:
            raise ContractError("tol must be positive")
        if self.n_alpha < 1:
            raise ContractError("n_alpha must be >= 1")
        if self.gd_lr <= 0:
            raise ContractError("gd_lr must be positive")
        if self.gd_max_iters < 0:
            raise ContractError("gd_max_iters must be >= 0")
        if self.sampling not in ("grid", "random"):
            raise ContractError("sampling must be 'grid' or 'random'")
        if not 0.0 < self.gd_alpha0 <= 1.0:
            raise ContractError("gd_alpha0 must lie in (0, 1]")

    @property
    def T(self) -> float:
        return self.p if self.target is None else self.target


def interpolate_codes(z_base, z_target, alpha):
    """``(1 - alpha) * z_base + alpha * z_target``; endpoints are returned exactly.

    Evaluated as ``z_base + alpha * (z_target - z_base)`` so a degenerate line
    returns ``z_base`` bit-for-bit. ``alpha`` may be a scalar or a column of
    coefficients (one row each).
    """
    z_base = np.asarray(z_base, dtype=np.float64)
    z_target = np.asarray(z_target, dtype=np.float64)
    if z_base.shape != z_target.shape:
        raise ContractError(f"code shapes differ: {z_base.shape} vs {z_target.shape}")
    a = np.asarray(alpha, dtype=np.float64)
    z = z_base + a * (z_target - z_base)
    z = np.where(a == 0.0, z_base, z)
    return np.where(a == 1.0, z_target, z)


def alpha_grid(cfg: SharpShooterConfig) -> np.ndarray:
    S = cfg.n_alpha
    if cfg.sampling == "grid":
        return np.arange(1, S + 1, dtype=np.float64) / S
    rng = np.random.default_rng(cfg.sampling_seed)
    # uniform on (0, 1]
    return np.sort(1.0 - rng.random(S))


def select_candidate(scores, cfg: SharpShooterConfig):
    """Index and status chosen from scores listed in ascending-alpha order.

    First index meeting both acceptance conditions wins. Otherwise the
    crossing candidate closest to the target score (lowest index on ties),
    otherwise ``(None, FAILED)``.
    """
    scores = np.asarray(scores, dtype=np.float64)
    T = cfg.T
    ok = (np.abs(scores - T) < cfg.tol) & (scores > cfg.p)
    hits = np.flatnonzero(ok)
    if hits.size:
        return int(hits[0]), VALID
    crossed = np.flatnonzero(scores > cfg.p)
    if crossed.size:
        return int(crossed[np.argmin(np.abs(scores[crossed] - T))]), CROSSED
    return None, FAILED


def endpoints(tvae: VaeModel, uvae: VaeModel, x_base):
    """Latent codes of the base sample and of its target-class projection."""
    if tvae.role != "target":
        raise ContractError("the projection model must have role 'target'")
    if tvae.schema != uvae.schema:
        raise ContractError("TVAE and UVAE schemas differ")
    x_base = uvae.schema.check(x_base)
    x_proj = project_to_target(tvae, x_base)
    return encode(uvae, x_base)[0], encode(uvae, x_proj)[0]


def project_to_target(tvae: VaeModel, x_base):
    return reconstruct(tvae, x_base)


def decode_candidates(uvae: VaeModel, z):
    """Decode codes and make them schema-valid (one-hot / clipped pixels)."""
    return uvae.schema.harden(decode(uvae, z))


def line_search_cf(f: Callable, tvae: VaeModel, uvae: VaeModel, x_base,
                   cfg: SharpShooterConfig) -> CounterfactualResult:
    t0 = time.perf_counter()
    x_base = uvae.schema.check(x_base)
    z_b, z_t = endpoints(tvae, uvae, x_base)
    alphas = alpha_grid(cfg)
    cands = decode_candidates(uvae, interpolate_codes(z_b, z_t, alphas[:, None]))
    scores = np.asarray(f(cands), dtype=np.float64).reshape(-1)
    idx, status = select_candidate(scores, cfg)
    elapsed = time.perf_counter() - t0
    if idx is None:
        return CounterfactualResult(x_base[0], None, "ss-line", FAILED,
                                    iterations=len(alphas), wall_time=elapsed)
    return CounterfactualResult(x_base[0], cands[idx], "ss-line", status, float(scores[idx]),
                                float(alphas[idx]), len(alphas), elapsed)


def alpha_gd_cf(f: Callable, tvae: VaeModel, uvae: VaeModel, x_base,
                cfg: SharpShooterConfig) -> CounterfactualResult:
    """Descend ``(c - f(decode(z(a))))**2`` in ``a``, with ``c`` the centre of the accepted band.

    The derivative in ``a`` is a central difference. A step that raises the
    loss is rejected and the learning rate halved.
    """
    t0 = time.perf_counter()
    x_base = uvae.schema.check(x_base)
    z_b, z_t = endpoints(tvae, uvae, x_base)
    p, T, tol = cfg.p, cfg.T, cfg.tol
    aim = band_centre(p, T, tol)
    h = cfg.gd_fd_step

    def candidate(a):
        x = decode_candidates(uvae, interpolate_codes(z_b, z_t, a))
        return x, float(f(x)[0])

    alpha = cfg.gd_alpha0
    x, score = candidate(alpha)
    lr = cfg.gd_lr
    it = 0
    while not is_accepted(score, p, T, tol) and it < cfg.gd_max_iters:
        it += 1
        slope = (candidate(alpha + h)[1] - candidate(alpha - h)[1]) / (2.0 * h)
        grad = 2.0 * (score - aim) * slope
        if grad == 0.0:
            break
        new_alpha = float(np.clip(alpha - lr * grad, ALPHA_MIN, 1.0))
        new_x, new_score = candidate(new_alpha)
        if (new_score - aim) ** 2 > (score - aim) ** 2:
            lr *= 0.5
            continue
        alpha, x, score = new_alpha, new_x, new_score
    status = final_status(score, p, T, tol)
    elapsed = time.perf_counter() - t0
    if status == FAILED:
        return CounterfactualResult(x_base[0], None, "ss-gd", FAILED, alpha=alpha,
                                    iterations=it, wall_time=elapsed)
    return CounterfactualResult(x_base[0], x[0], "ss-gd", status, score, alpha, it, elapsed)
