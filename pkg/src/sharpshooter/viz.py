"""Plot-ready data for latent-space views: PCA, boundary clouds, hexbins, traces, sweeps.

Nothing here draws; every function returns arrays or records that the CLI
writes out as CSV.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, NumericError
from .shooter import decode_candidates, endpoints, interpolate_codes, project_to_target
from .vae import build_vae, negative_elbo, train_vae

SQRT3 = math.sqrt(3.0)


# ---------------------------------------------------------------------------
# PCA

def jacobi_eigh(a, tol=1e-15, max_sweeps=100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(values, vectors)`` sorted by decreasing eigenvalue; eigenvectors
    are the columns of ``vectors``.
    """
    a = np.array(a, dtype=np.float64, copy=True)
    n = a.shape[0]
    if a.shape != (n, n) or not np.allclose(a, a.T):
        raise ContractError("jacobi_eigh needs a symmetric square matrix")
    v = np.eye(n)
    scale = max(np.linalg.norm(a), 1e-300)
    for _ in range(max_sweeps):
        off = math.sqrt(max(float(np.sum(a * a) - np.sum(np.diag(a) ** 2)), 0.0))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(diff) > 1e100 * abs(apq):
                    # tiny rotation: tan(angle) ~ apq / diff, and theta**2 would overflow
                    t = apq / diff
                else:
                    theta = diff / (2.0 * apq)
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                col_p, col_q = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p, row_q = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    values = np.diag(a).copy()
    order = np.argsort(-values, kind="stable")
    return values[order], v[:, order]


@dataclass
class PcaProjector:
    mean: np.ndarray
    axes: np.ndarray  # (2, dim), orthonormal rows
    explained_variance: np.ndarray

    def project(self, points) -> np.ndarray:
        return (np.atleast_2d(points) - self.mean) @ self.axes.T


def pca_fit(points) -> PcaProjector:
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 3 or x.shape[1] < 2:
        raise ContractError("PCA needs at least 3 points of dimension >= 2")
    mean = x.mean(axis=0)
    centred = x - mean
    if not np.any(centred):
        raise ContractError("PCA input is degenerate: all points identical")
    cov = centred.T @ centred / (x.shape[0] - 1)
    cov = 0.5 * (cov + cov.T)
    values, vectors = jacobi_eigh(cov)
    axes = vectors[:, :2].T.copy()
    for k in range(2):
        # sign convention: largest-magnitude component positive
        if axes[k, np.argmax(np.abs(axes[k]))] < 0:
            axes[k] = -axes[k]
    return PcaProjector(mean, axes, values[:2].copy())


def pca_fit_project(points):
    proj = pca_fit(points)
    return proj, proj.project(points)


# ---------------------------------------------------------------------------
# hexagonal binning (pointy-top axial coordinates)

def hex_round(qf, rf):
    xf, zf = qf, rf
    yf = -xf - zf
    rx, ry, rz = np.round(xf), np.round(yf), np.round(zf)
    dx, dy, dz = np.abs(rx - xf), np.abs(ry - yf), np.abs(rz - zf)
    fix_x = (dx > dy) & (dx > dz)
    fix_z = ~fix_x & ~(dy > dz)
    rx = np.where(fix_x, -ry - rz, rx)
    rz = np.where(fix_z, -rx - ry, rz)
    return rx.astype(np.int64), rz.astype(np.int64)


def point_to_hex(xy, size: float):
    xy = np.atleast_2d(np.asarray(xy, dtype=np.float64))
    qf = (SQRT3 / 3.0 * xy[:, 0] - xy[:, 1] / 3.0) / size
    rf = (2.0 / 3.0 * xy[:, 1]) / size
    return hex_round(qf, rf)


def hex_center(q, r, size: float):
    return size * SQRT3 * (q + r / 2.0), size * 1.5 * r


@dataclass
class HexbinGrid:
    cell_size: float
    cells: dict = field(default_factory=dict)  # (q, r) -> [weight_sum, count]

    @property
    def total_count(self) -> int:
        return sum(c for _, c in self.cells.values())

    def mean_score(self, key) -> float:
        w, c = self.cells[key]
        return w / c

    def rows(self):
        """(q, r, centre_x, centre_y, count, mean_score) sorted by (q, r)."""
        out = []
        for q, r in sorted(self.cells):
            cx, cy = hex_center(q, r, self.cell_size)
            w, c = self.cells[(q, r)]
            out.append((q, r, cx, cy, c, w / c))
        return out


def build_hexbin(points, scores, cell_size: float) -> HexbinGrid:
    if cell_size <= 0:
        raise ContractError("cell_size must be positive")
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if len(points) != len(scores):
        raise ContractError("one score per point is required")
    grid = HexbinGrid(cell_size)
    if len(points) == 0:
        return grid
    qs, rs = point_to_hex(points, cell_size)
    for q, r, s in zip(qs.tolist(), rs.tolist(), scores.tolist()):
        cell = grid.cells.setdefault((q, r), [0.0, 0])
        cell[0] += s
        cell[1] += 1
    return grid


# ---------------------------------------------------------------------------
# interpolation-line views

def sample_boundary_cloud(f, uvae, pairs, alpha_count: int, projector=None):
    """Score points along each latent line ``(z_base, z_proj)``.

    Returns ``(projector, points_2d, scores)`` with ``len(pairs) * alpha_count``
    rows; the projector is fitted on the union of endpoint codes unless given.
    """
    if alpha_count < 2:
        raise ContractError("alpha_count must be >= 2")
    zb = np.vstack([np.atleast_2d(a) for a, _ in pairs])
    zt = np.vstack([np.atleast_2d(b) for _, b in pairs])
    if projector is None:
        projector = pca_fit(np.vstack([zb, zt]))
    alphas = np.linspace(0.0, 1.0, alpha_count)
    pts, scores = [], []
    for i in range(len(zb)):
        z = interpolate_codes(zb[i], zt[i], alphas[:, None])
        scores.append(np.asarray(f(decode_candidates(uvae, z))).reshape(-1))
        pts.append(projector.project(z))
    return projector, np.vstack(pts), np.concatenate(scores)


def trace_interpolation(f, tvae, uvae, x_base, alphas):
    """``[(alpha, decoded candidate, score), ...]`` in ascending alpha."""
    alphas = np.sort(np.asarray(alphas, dtype=np.float64).reshape(-1))
    if alphas.size == 0 or alphas.min() <= 0.0 or alphas.max() > 1.0:
        raise ContractError("alphas must lie in (0, 1]")
    z_b, z_t = endpoints(tvae, uvae, x_base)
    cands = decode_candidates(uvae, interpolate_codes(z_b, z_t, alphas[:, None]))
    scores = np.asarray(f(cands)).reshape(-1)
    return [(float(a), cands[i], float(scores[i])) for i, a in enumerate(alphas)]


def latent_lines(tvae, uvae, base_rows):
    """Pairs of (z_base, z_proj) codes for each base row."""
    return [endpoints(tvae, uvae, row) for row in np.atleast_2d(base_rows)]


# ---------------------------------------------------------------------------
# hyperparameter sweep

@dataclass
class SweepRecord:
    beta: float
    axis: str  # "latent_dim" or "w_cat"
    value: float
    mse: float
    kld: float
    avg_proj_prob: float
    diverged: bool = False
    on_front: bool = False


def pareto_front(objectives) -> list:
    """Indices of non-dominated rows (both columns minimized).

    Exact duplicates appear once: the earliest index is kept.
    """
    pts = [tuple(map(float, o)) for o in objectives]
    order = sorted(range(len(pts)), key=lambda i: (pts[i][0], pts[i][1], i))
    front = []
    best_second = math.inf
    for i in order:
        if pts[i][1] < best_second:
            front.append(i)
            best_second = pts[i][1]
    return sorted(front)


def cell_seed(base_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([base_seed, index]).generate_state(1)[0])


@dataclass
class SweepSettings:
    hidden: tuple = (32,)
    epochs: int = 50
    batch_size: int = 64
    lr: float = 3e-3
    latent_dim: int = 2
    w_cat: float = 0.5
    role: str = "target"
    seed: int = 0


def _run_cell(args):
    idx, beta, axis, value, train_rows, eval_rows, base_rows, f, schema, st = args
    latent = int(value) if axis == "latent_dim" else st.latent_dim
    w_cat = float(value) if axis == "w_cat" else st.w_cat
    seed = cell_seed(st.seed, idx)
    model = build_vae(schema, latent, st.hidden, beta=beta, w_cat=w_cat, role=st.role, seed=seed)
    try:
        model, _ = train_vae(model, train_rows, st.epochs, st.batch_size, seed, st.lr)
        loss = negative_elbo(model, eval_rows)
        proj = schema.harden(project_to_target(model, base_rows))
        prob = float(np.mean(np.asarray(f(proj)).reshape(-1)))
        vals = (loss.reconstruction, loss.kl, prob)
        if not all(map(math.isfinite, vals)):
            raise NumericError("non-finite sweep objective")
    except NumericError:
        nan = float("nan")
        return SweepRecord(beta, axis, float(value), nan, nan, nan, diverged=True)
    return SweepRecord(beta, axis, float(value), *vals)


def sweep_and_pareto(f, schema, train_rows, eval_rows, base_rows, betas, values,
                     axis="latent_dim", settings=None, jobs=1):
    """Train one VAE per (beta, value) cell and mark the (mse, kld) Pareto front.

    ``train_rows`` are the rows the VAE learns from (target-class rows for a
    TVAE sweep), ``eval_rows`` the held-out rows for the objectives, and
    ``base_rows`` the held-out base-class rows whose projections are scored.
    """
    if not len(betas) or not len(values):
        raise ContractError("sweep grids must be non-empty")
    if axis not in ("latent_dim", "w_cat"):
        raise ContractError("axis must be 'latent_dim' or 'w_cat'")
    st = settings or SweepSettings()
    tasks = []
    for i, (b, v) in enumerate((b, v) for b in betas for v in values):
        tasks.append((i, float(b), axis, v, train_rows, eval_rows, base_rows, f, schema, st))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            records = list(ex.map(_run_cell, tasks))
    else:
        records = [_run_cell(t) for t in tasks]
    ok = [i for i, r in enumerate(records) if not r.diverged]
    for k in pareto_front([(records[i].mse, records[i].kld) for i in ok]):
        records[ok[k]].on_front = True
    front = [r for r in records if r.on_front]
    return records, front
