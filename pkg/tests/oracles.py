"""Independent recomputations used as test oracles.

These deliberately avoid the package's numeric helpers: forward passes,
losses and aggregates are re-derived with explicit per-element loops.
"""
import math

import numpy as np

from sharpshooter.classifier import build_classifier
from sharpshooter.results import CROSSED, FAILED, VALID, CounterfactualResult
from sharpshooter.schema import FeatureSchema
from sharpshooter.vae import build_vae


def _act(name, a, groups):
    if name == "identity":
        return list(a)
    if name == "relu":
        return [max(v, 0.0) for v in a]
    if name == "sigmoid":
        return [1.0 / (1.0 + math.exp(-v)) for v in a]
    if name == "tanh":
        return [math.tanh(v) for v in a]
    out = list(a)
    for lo, hi in groups:
        m = max(a[lo:hi])
        e = [math.exp(v - m) for v in a[lo:hi]]
        s = sum(e)
        out[lo:hi] = [v / s for v in e]
    return out


def forward_row(net, row):
    h = [float(v) for v in row]
    for layer in net.layers:
        w, b = layer.weights, layer.bias
        a = [sum(w[i, j] * h[j] for j in range(len(h))) + b[i] for i in range(len(b))]
        h = _act(layer.activation, a, layer.groups)
    return h


def score(classifier, row):
    return forward_row(classifier.net, row)[0]


def encode_mean(vae, row):
    return forward_row(vae.encoder, row)[:vae.latent_dim]


def neg_elbo(vae, row):
    out = forward_row(vae.encoder, row)
    mu, lv = out[:vae.latent_dim], out[vae.latent_dim:]
    xhat = forward_row(vae.decoder, mu)
    schema = vae.schema
    k = schema.n_continuous if not schema.pixel_mode else schema.input_dim
    mse = sum((xhat[i] - row[i]) ** 2 for i in range(k)) / k if k else 0.0
    groups = schema.group_slices
    ce = 0.0
    for lo, hi in groups:
        ce -= sum(row[i] * math.log(max(xhat[i], 1e-12)) for i in range(lo, hi))
    ce = ce / len(groups) if groups else 0.0
    if schema.pixel_mode:
        recon = mse
    elif k and groups:
        recon = (1 - vae.w_cat) * mse + vae.w_cat * ce
    else:
        recon = mse + ce
    kl = -0.5 * sum(1 + lv[j] - mu[j] ** 2 - math.exp(lv[j]) for j in range(len(mu)))
    return recon + vae.beta * kl


def changed_fraction(schema, xb, xc, pixel_threshold):
    if schema.pixel_mode:
        return sum(1 for a, b in zip(xb, xc) if abs(a - b) > pixel_threshold) / len(xb)
    n = 0
    for i in range(schema.n_continuous):
        if abs(xb[i] - xc[i]) > 1e-9:
            n += 1
    for lo, hi in schema.group_slices:
        ab = max(range(lo, hi), key=lambda i: (xb[i], -i))
        ac = max(range(lo, hi), key=lambda i: (xc[i], -i))
        n += ab != ac
    return n / (schema.n_continuous + schema.n_groups)


def brute_force_report(f, uvae, results, p, pixel_threshold):
    """Fold-left recomputation of every reported aggregate."""
    kept = [r for r in results if r.x_cf is not None and score(f, r.x_cf) > p]
    totals = {"proximity": 0.0, "sparsity": 0.0, "classifier_shift": 0.0, "reconstruction": 0.0}
    for r in kept:
        zb, zc = encode_mean(uvae, r.x_base), encode_mean(uvae, r.x_cf)
        totals["proximity"] += math.sqrt(sum((a - b) ** 2 for a, b in zip(zb, zc)))
        totals["sparsity"] += changed_fraction(uvae.schema, r.x_base, r.x_cf, pixel_threshold)
        recon = forward_row(uvae.decoder, encode_mean(uvae, r.x_cf))
        totals["classifier_shift"] += abs(score(f, r.x_cf) - score(f, recon))
        totals["reconstruction"] += neg_elbo(uvae, r.x_cf)
    out = {k: (v / len(kept) if kept else float("nan")) for k, v in totals.items()}
    out["validity"] = len(kept) / len(results)
    t = 0.0
    for r in results:
        t += r.wall_time
    out["time"] = t / len(results)
    out["n_valid"] = len(kept)
    return out


def random_batch(rng, pixel=False):
    """A random classifier, UVAE and result batch with a mix of statuses."""
    if pixel:
        schema = FeatureSchema.pixels(int(rng.integers(4, 10)))
    else:
        schema = FeatureSchema(tuple(f"c{i}" for i in range(int(rng.integers(1, 4)))),
                               categorical=tuple((f"g{j}", int(rng.integers(2, 4)))
                                                 for j in range(int(rng.integers(0, 3)))))
    f = build_classifier(schema, (4,), seed=int(rng.integers(1 << 30)))
    f.net.layers[-1].weights *= 4
    uvae = build_vae(schema, int(rng.integers(1, 4)), (5,), beta=float(rng.uniform(0, 2)),
                     w_cat=float(rng.uniform()), seed=int(rng.integers(1 << 30)))

    def row():
        if schema.pixel_mode:
            return rng.uniform(size=schema.input_dim)
        x = np.zeros(schema.input_dim)
        x[:schema.n_continuous] = rng.normal(size=schema.n_continuous)
        for lo, hi in schema.group_slices:
            x[lo + rng.integers(hi - lo)] = 1.0
        return x

    results = []
    for _ in range(int(rng.integers(1, 12))):
        xb = row()
        status = (VALID, CROSSED, FAILED)[int(rng.integers(3))]
        if status == FAILED:
            xc = None
        elif rng.uniform() < 0.3:
            xc = xb.copy()
            if not schema.pixel_mode and schema.n_continuous:
                xc[0] += rng.normal()
        else:
            xc = row()
        results.append(CounterfactualResult(xb, xc, "gdi", status, wall_time=float(rng.uniform())))
    return f, uvae, results


def pareto_oracle(points):
    """O(n^2) dominance check; exact duplicates keep their first index."""
    front = []
    for i, a in enumerate(points):
        dominated = any(b[0] <= a[0] and b[1] <= a[1] and (b[0] < a[0] or b[1] < a[1])
                        for b in points)
        duplicate = any(points[j] == a for j in range(i))
        if not dominated and not duplicate:
            front.append(i)
    return front


def scan_grid(curve, S, p, T, tol):
    """Exhaustive scan of the S-point ascending grid: (alpha, status)."""
    best = None
    for s in range(1, S + 1):
        a = s / S
        v = float(curve(np.array([a]))[0])
        if abs(v - T) < tol and v > p:
            return a, VALID
        if v > p and (best is None or abs(v - T) < best[1]):
            best = (a, abs(v - T))
    return (best[0], CROSSED) if best else (None, FAILED)


def pairwise_auc(scores, labels):
    wins = total = 0.0
    for sp, lp in zip(scores, labels):
        if lp != 1:
            continue
        for sn, ln in zip(scores, labels):
            if ln != 0:
                continue
            total += 1
            wins += 1.0 if sp > sn else 0.5 if sp == sn else 0.0
    return wins / total
