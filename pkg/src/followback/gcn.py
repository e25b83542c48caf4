"""Two-layer graph convolutional classifier and its edgeless twin (an MLP).

    Z1 = Â X W1 + b1,  H = act(Z1),  Z2 = Â H W2 + b2,  P = softmax(Z2)

with Â = D̃^-1/2 (A + I) D̃^-1/2 on the undirected projection. Loss is mean
cross-entropy over labelled nodes; training is full-batch gradient descent.
"""

from __future__ import annotations

import json
import struct
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .graph import FollowGraph

N_CLASSES = 2


def normalized_adjacency(graph: FollowGraph, nodes: Sequence[str]) -> sp.csr_matrix:
    index = {n: i for i, n in enumerate(nodes)}
    n = len(nodes)
    rows, cols = [], []
    for u, v in graph.edges:
        if u in index and v in index:
            rows += [index[u], index[v]]
            cols += [index[v], index[u]]
    a = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    a = ((a > 0).astype(float) + sp.identity(n, format="csr")).tocsr()
    d = np.asarray(a.sum(axis=1)).ravel()
    inv = sp.diags(1.0 / np.sqrt(d))
    return sp.csr_matrix(inv @ a @ inv)


def init_params(in_dim: int, hidden: int, seed: int) -> dict[str, np.ndarray]:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    b1 = np.sqrt(6.0 / (in_dim + hidden))
    b2 = np.sqrt(6.0 / (hidden + N_CLASSES))
    return {
        "W1": rng.uniform(-b1, b1, size=(in_dim, hidden)),
        "b1": np.zeros(hidden),
        "W2": rng.uniform(-b2, b2, size=(hidden, N_CLASSES)),
        "b2": np.zeros(N_CLASSES),
    }


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _act(z, kind):
    return np.maximum(z, 0.0) if kind == "relu" else z


def _act_grad(z, kind):
    return (z > 0).astype(float) if kind == "relu" else np.ones_like(z)


def forward(params, a_hat, X, activation="relu"):
    """Returns (probabilities, cache). ``a_hat=None`` means no propagation (MLP)."""
    prop = (lambda m: a_hat @ m) if a_hat is not None else (lambda m: m)
    ax = prop(X)
    z1 = ax @ params["W1"] + params["b1"]
    h = _act(z1, activation)
    ah = prop(h)
    z2 = ah @ params["W2"] + params["b2"]
    return _softmax(z2), (ax, z1, h, ah)


def loss_and_grads(params, a_hat, X, y, mask, activation="relu"):
    """Mean cross-entropy over ``mask`` rows and its analytic gradient."""
    probs, (ax, z1, h, ah) = forward(params, a_hat, X, activation)
    n_lab = mask.sum()
    onehot = np.zeros_like(probs)
    onehot[np.arange(len(y)), y] = 1.0
    loss = -np.sum(np.log(np.clip(probs[mask, y[mask]], 1e-300, None))) / n_lab
    dz2 = (probs - onehot) * mask[:, None] / n_lab
    grads = {"W2": ah.T @ dz2, "b2": dz2.sum(axis=0)}
    dah = dz2 @ params["W2"].T
    dh = a_hat.T @ dah if a_hat is not None else dah
    dz1 = dh * _act_grad(z1, activation)
    grads["W1"] = ax.T @ dz1
    grads["b1"] = dz1.sum(axis=0)
    return loss, grads


@dataclass
class GCNModel:
    nodes: tuple[str, ...]
    columns: tuple[str, ...]
    params: dict[str, np.ndarray]
    activation: str = "relu"
    propagate: bool = True
    losses: list[float] = field(default_factory=list)

    def predict_proba(self, X, graph: FollowGraph | None = None) -> np.ndarray:
        """P(follow-back) for every row of ``X`` (FeatureMatrix aligned with ``graph``)."""
        values = np.asarray(X.values, dtype=float)
        a_hat = None
        if self.propagate:
            if graph is None:
                raise ValueError("a GCN needs the graph to predict")
            a_hat = normalized_adjacency(graph, X.user_ids)
        probs, _ = forward(self.params, a_hat, values, self.activation)
        return probs[:, 1]

    def save(self, path) -> None:
        names = sorted(self.params)
        header = {
            "kind": "gcn" if self.propagate else "mlp",
            "activation": self.activation,
            "columns": list(self.columns),
            "arrays": [{"name": k, "shape": list(self.params[k].shape)} for k in names],
        }
        blob = json.dumps(header, separators=(",", ":")).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(struct.pack("<Q", len(blob)))
            fh.write(blob)
            for k in names:
                fh.write(np.ascontiguousarray(self.params[k], dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> GCNModel:
        raw = Path(path).read_bytes()
        (hlen,) = struct.unpack("<Q", raw[:8])
        header = json.loads(raw[8:8 + hlen].decode("utf-8"))
        off = 8 + hlen
        params = {}
        for spec in header["arrays"]:
            count = int(np.prod(spec["shape"])) if spec["shape"] else 1
            params[spec["name"]] = np.frombuffer(raw, dtype="<f8", count=count, offset=off).reshape(spec["shape"]).copy()
            off += 8 * count
        if off != len(raw):
            raise ValueError(f"{path}: trailing bytes in model file")
        return cls((), tuple(header["columns"]), params, header["activation"], header["kind"] == "gcn")


def _check_labels(y, n):
    y = np.asarray(y)
    if y.shape != (n,):
        raise ValueError("labels must have one entry per node (-1 for unlabelled)")
    mask = y >= 0
    if not mask.any():
        raise ValueError("no labelled nodes")
    if (y[mask] >= N_CLASSES).any():
        raise ValueError("labels must be 0/1 (or -1 for unlabelled)")
    return np.where(mask, y, 0).astype(int), mask


def _fit(params, a_hat, X, y, mask, epochs, lr, activation):
    losses = []
    for _ in range(epochs):
        loss, grads = loss_and_grads(params, a_hat, X, y, mask, activation)
        losses.append(float(loss))
        for k in params:
            params[k] -= lr * grads[k]
    return losses


def train_gcn(graph: FollowGraph, X, y, hidden: int = 64, epochs: int = 2500, lr: float = 0.01,
              seed: int = 42, activation: str = "relu") -> GCNModel:
    """``X`` rows must list exactly the nodes of ``graph``; ``y`` holds 0/1 or -1 (unlabelled)."""
    if set(X.user_ids) != set(graph.nodes) or len(X.user_ids) != len(graph):
        raise ValueError("feature rows do not align with graph nodes")
    values = np.asarray(X.values, dtype=float)
    y, mask = _check_labels(y, len(values))
    a_hat = normalized_adjacency(graph, X.user_ids)
    params = init_params(values.shape[1], hidden, seed)
    losses = _fit(params, a_hat, values, y, mask, epochs, lr, activation)
    return GCNModel(tuple(X.user_ids), tuple(X.columns), params, activation, True, losses)


def train_mlp(X, y, hidden: int = 64, epochs: int = 2500, lr: float = 0.01, seed: int = 42,
              activation: str = "relu") -> GCNModel:
    values = np.asarray(X.values, dtype=float)
    y, mask = _check_labels(y, len(values))
    params = init_params(values.shape[1], hidden, seed)
    losses = _fit(params, None, values, y, mask, epochs, lr, activation)
    return GCNModel(tuple(X.user_ids), tuple(X.columns), params, activation, False, losses)


def finite_difference_check(params, a_hat, X, y, mask, activation="relu", eps=1e-6) -> float:
    """Max relative error between analytic and central-difference gradients."""
    _, grads = loss_and_grads(params, a_hat, X, y, mask, activation)
    worst = 0.0
    for k, w in params.items():
        it = np.nditer(w, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = w[i]
            w[i] = old + eps
            lp, _ = loss_and_grads(params, a_hat, X, y, mask, activation)
            w[i] = old - eps
            lm, _ = loss_and_grads(params, a_hat, X, y, mask, activation)
            w[i] = old
            num = (lp - lm) / (2 * eps)
            ana = grads[k][i]
            denom = max(abs(num), abs(ana), 1e-8)
            worst = max(worst, abs(num - ana) / denom)
    return worst
