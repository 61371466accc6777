"""Binary probabilistic classifier ``f(x) -> p(target)`` and pairwise AUC."""
from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import ContractError
from .schema import FeatureSchema

LOSS_CLAMP = 1e-9


@dataclass
class ClassifierModel:
    net: nn.MlpNetwork
    schema: FeatureSchema

    def __post_init__(self):
        last = self.net.layers[-1]
        if last.n_out != 1 or last.activation != "sigmoid":
            raise ContractError("classifier must end in a single sigmoid unit")
        if self.net.n_in != self.schema.input_dim:
            raise ContractError("classifier input does not match schema")

    def __call__(self, x) -> np.ndarray:
        return classify(self, x)

    def copy(self) -> "ClassifierModel":
        return copy.deepcopy(self)


def build_classifier(schema: FeatureSchema, hidden=(16,), activation="tanh", seed=0):
    rng = np.random.default_rng(seed)
    hidden = list(hidden)
    net = nn.init_mlp([schema.input_dim, *hidden, 1], [activation] * len(hidden) + ["sigmoid"], rng)
    return ClassifierModel(net, schema)


def classify(model: ClassifierModel, x) -> np.ndarray:
    return nn.forward(model.net, model.schema.check(x))[:, 0]


def classify_with_input_grad(model: ClassifierModel, x):
    """Probabilities and d p / d x, one row per sample."""
    out, cache = nn.forward(model.net, model.schema.check(x), return_cache=True)
    _, gx = nn.backward(model.net, cache, np.ones_like(out))
    return out[:, 0], gx


def train_classifier(model: ClassifierModel, rows, labels, epochs: int, batch_size=64, seed=0,
                     lr=1e-2):
    """Binary cross-entropy training with Adam on a copy of ``model``."""
    rows = model.schema.check(rows)
    labels = np.asarray(labels, dtype=np.float64).reshape(-1)
    if not set(np.unique(labels)) <= {0.0, 1.0}:
        raise ContractError("labels must be 0 or 1")
    if len(np.unique(labels)) < 2:
        raise ContractError("training data must contain both classes")
    trained = model.copy()
    history = []
    if epochs <= 0:
        return trained, history
    rng = np.random.default_rng(seed)
    state = nn.AdamState(lr=lr)
    params = trained.net.params()
    loss = lambda p, t: nn.bce_loss(p, t, LOSS_CLAMP)
    for _ in range(epochs):
        order = rng.permutation(len(rows))
        for start in range(0, len(rows), batch_size):
            idx = order[start:start + batch_size]
            _, grads = nn.loss_and_grads(trained.net, rows[idx], labels[idx, None], loss)
            nn.adam_step(params, grads, state)
        p = classify(trained, rows)
        history.append(loss(p[:, None], labels[:, None])[0])
    return trained, history


def auc(scores, labels) -> float:
    """Probability that a random positive outscores a random negative; ties count 1/2."""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    if len(pos) == 0 or len(neg) == 0:
        raise ContractError("AUC needs both classes present")
    diff = pos[:, None] - neg[None, :]
    wins = np.count_nonzero(diff > 0) + 0.5 * np.count_nonzero(diff == 0)
    return float(wins / (len(pos) * len(neg)))


def classifier_to_dict(model: ClassifierModel) -> dict:
    return {"version": nn.FORMAT_VERSION, "kind": "classifier", "role": "classifier",
            "schema": model.schema.to_dict(), "net": nn.network_to_dict(model.net)}


def classifier_from_dict(d: dict) -> ClassifierModel:
    if d.get("kind") != "classifier":
        raise ValueError("not a serialized classifier")
    return ClassifierModel(nn.network_from_dict(d["net"]), FeatureSchema.from_dict(d["schema"]))
