"""beta-VAE with a diagonal Gaussian code, mixed-type reconstruction loss and Adam training.

The same model class serves as the target-class VAE (``role="target"``) and
the unified VAE trained on both classes (``role="unified"``).
"""
from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import ContractError, NumericError
from .schema import FeatureSchema

ROLES = ("target", "unified")


@dataclass
class VaeLossBreakdown:
    reconstruction: float
    kl: float
    total: float

    def to_dict(self) -> dict:
        return {"reconstruction": self.reconstruction, "kl": self.kl, "total": self.total}


@dataclass
class VaeModel:
    encoder: nn.MlpNetwork
    decoder: nn.MlpNetwork
    latent_dim: int
    schema: FeatureSchema
    beta: float = 1.0
    w_cat: float = 0.5
    role: str = "unified"

    def __post_init__(self):
        if self.role not in ROLES:
            raise ContractError(f"role must be one of {ROLES}")
        if self.beta < 0:
            raise ContractError("beta must be >= 0")
        if not 0.0 <= self.w_cat <= 1.0:
            raise ContractError("w_cat must lie in [0, 1]")
        if self.encoder.n_in != self.schema.input_dim:
            raise ContractError("encoder input does not match schema")
        if self.encoder.n_out != 2 * self.latent_dim:
            raise ContractError("encoder must emit 2 * latent_dim outputs")
        if self.decoder.n_in != self.latent_dim or self.decoder.n_out != self.schema.input_dim:
            raise ContractError("decoder dimensions do not match latent_dim / schema")

    def params(self) -> list:
        return self.encoder.params() + self.decoder.params()

    def copy(self) -> "VaeModel":
        return copy.deepcopy(self)


def output_activation(schema: FeatureSchema):
    if schema.pixel_mode:
        return "sigmoid", ()
    if schema.n_groups:
        return "softmax-grouped", schema.group_slices
    return "identity", ()


def build_vae(schema: FeatureSchema, latent_dim: int, hidden=(32,), *, beta=1.0, w_cat=0.5,
              role="unified", activation="tanh", seed=0) -> VaeModel:
    rng = np.random.default_rng(seed)
    hidden = list(hidden)
    enc = nn.init_mlp([schema.input_dim, *hidden, 2 * latent_dim],
                      [activation] * len(hidden) + ["identity"], rng)
    out_act, groups = output_activation(schema)
    dec = nn.init_mlp([latent_dim, *hidden[::-1], schema.input_dim],
                      [activation] * len(hidden) + [out_act], rng, output_groups=groups)
    return VaeModel(enc, dec, latent_dim, schema, beta, w_cat, role)


def encode(model: VaeModel, x):
    h = nn.forward(model.encoder, model.schema.check(x))
    return h[:, :model.latent_dim], h[:, model.latent_dim:]


def decode(model: VaeModel, z):
    return nn.forward(model.decoder, z)


def reconstruct(model: VaeModel, x):
    """Mean decoding: decode(encode-mean(x)); no sampling."""
    return decode(model, encode(model, x)[0])


def reparameterize(mu, logvar, eps):
    return mu + np.exp(0.5 * logvar) * eps


def kl_diag_gaussian(mu, logvar) -> float:
    """KL(N(mu, exp(logvar)) || N(0, I)) summed over dims, averaged over rows."""
    mu = np.atleast_2d(mu)
    logvar = np.atleast_2d(logvar)
    with np.errstate(over="ignore"):
        per_row = -0.5 * np.sum(1.0 + logvar - mu * mu - np.exp(logvar), axis=1)
    return float(per_row.mean())


def _recon_loss(model: VaeModel, x, xhat):
    """Reconstruction term and its gradient with respect to ``xhat``.

    Tabular: (1 - w_cat) * MSE over continuous columns + w_cat * mean grouped
    cross-entropy. A schema with only one kind of feature uses that term alone.
    Pixel mode: MSE over all pixels.
    """
    schema = model.schema
    if schema.pixel_mode:
        return nn.mse_loss(xhat, x)
    groups = schema.group_slices
    for lo, hi in groups:
        sums = xhat[:, lo:hi].sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-6):
            raise ContractError("reconstructed categorical block is not normalized")
    k = schema.n_continuous
    grad = np.zeros_like(xhat)
    if k and groups:
        w_cont, w_cat = 1.0 - model.w_cat, model.w_cat
    else:
        w_cont = w_cat = 1.0
    value = 0.0
    if k:
        v, g = nn.mse_loss(xhat[:, :k], x[:, :k])
        value += w_cont * v
        grad[:, :k] = w_cont * g
    if groups:
        v, g = nn.grouped_ce_loss(xhat, x, groups)
        value += w_cat * v
        grad += w_cat * g
    return value, grad


def elbo_loss(model: VaeModel, x, xhat, mu, logvar) -> VaeLossBreakdown:
    x = model.schema.check(x)
    xhat = model.schema.check(xhat)
    recon, _ = _recon_loss(model, x, xhat)
    kl = kl_diag_gaussian(mu, logvar)
    return VaeLossBreakdown(recon, kl, recon + model.beta * kl)


def negative_elbo(model: VaeModel, x) -> VaeLossBreakdown:
    """Loss of ``x`` under the model with the noise fixed at zero."""
    mu, logvar = encode(model, x)
    return elbo_loss(model, x, decode(model, mu), mu, logvar)


def elbo_and_grads(model: VaeModel, x, eps=None):
    """Loss breakdown and gradients for ``model.params()`` (encoder first)."""
    x = model.schema.check(x)
    d = model.latent_dim
    h, enc_cache = nn.forward(model.encoder, x, return_cache=True)
    mu, logvar = h[:, :d], h[:, d:]
    if eps is None:
        eps = np.zeros_like(mu)
    sigma = np.exp(0.5 * logvar)
    z = mu + sigma * eps
    xhat, dec_cache = nn.forward(model.decoder, z, return_cache=True)
    recon, g_xhat = _recon_loss(model, x, xhat)
    kl = kl_diag_gaussian(mu, logvar)
    dec_grads, g_z = nn.backward(model.decoder, dec_cache, g_xhat)
    n = x.shape[0]
    g_mu = g_z + model.beta * mu / n
    g_logvar = g_z * eps * 0.5 * sigma + model.beta * 0.5 * (np.exp(logvar) - 1.0) / n
    enc_grads, _ = nn.backward(model.encoder, enc_cache, np.hstack([g_mu, g_logvar]))
    return VaeLossBreakdown(recon, kl, recon + model.beta * kl), enc_grads + dec_grads


def decoder_input_gradient(model: VaeModel, z, grad_xhat):
    """Pull a gradient on the decoded sample back to the latent code."""
    _, cache = nn.forward(model.decoder, z, return_cache=True)
    return nn.backward(model.decoder, cache, grad_xhat)[1]


def train_vae(model: VaeModel, rows, epochs: int, batch_size=64, seed=0, lr=1e-3,
              labels=None):
    """Train a copy of ``model`` with Adam.

    Returns ``(trained, history)`` where ``history`` holds one full-set,
    noise-free loss breakdown per epoch.
    """
    rows = model.schema.check(rows)
    if len(rows) == 0:
        raise ContractError("cannot train on an empty dataset")
    if model.role == "target" and labels is not None and np.any(np.asarray(labels) != 1):
        raise ContractError("a target-role VAE trains on target-class rows only")
    trained = model.copy()
    if epochs <= 0:
        return trained, []
    rng = np.random.default_rng(seed)
    state = nn.AdamState(lr=lr)
    params = trained.params()
    history = []
    n = len(rows)
    for epoch in range(epochs):
        order = rng.permutation(n)
        try:
            for start in range(0, n, batch_size):
                batch = rows[order[start:start + batch_size]]
                eps = rng.standard_normal((len(batch), trained.latent_dim))
                loss, grads = elbo_and_grads(trained, batch, eps)
                if not np.isfinite(loss.total):
                    raise NumericError(f"non-finite VAE loss at epoch {epoch}", epoch=epoch)
                nn.adam_step(params, grads, state)
            summary = negative_elbo(trained, rows)
        except NumericError as exc:
            raise NumericError(f"VAE training diverged at epoch {epoch}: {exc}",
                               layer=exc.layer, epoch=epoch) from exc
        if not np.isfinite(summary.total):
            raise NumericError(f"non-finite VAE loss at epoch {epoch}", epoch=epoch)
        history.append(summary)
    return trained, history


def vae_to_dict(model: VaeModel) -> dict:
    return {
        "version": nn.FORMAT_VERSION,
        "kind": "vae",
        "role": model.role,
        "beta": model.beta,
        "w_cat": model.w_cat,
        "latent_dim": model.latent_dim,
        "schema": model.schema.to_dict(),
        "encoder": nn.network_to_dict(model.encoder),
        "decoder": nn.network_to_dict(model.decoder),
    }


def vae_from_dict(d: dict) -> VaeModel:
    if d.get("kind") != "vae":
        raise ValueError("not a serialized VAE")
    return VaeModel(nn.network_from_dict(d["encoder"]), nn.network_from_dict(d["decoder"]),
                    int(d["latent_dim"]), FeatureSchema.from_dict(d["schema"]),
                    float(d["beta"]), float(d["w_cat"]), d["role"])
