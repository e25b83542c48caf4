"""node2vec: second-order biased walks plus skip-gram with negative sampling."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np

from .graph import FollowGraph

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Node2VecParams:
    dim: int = 256
    walk_length: int = 40
    walks_per_node: int = 5
    window: int = 5
    p: float = 1.0
    q: float = 0.5
    negatives_per_positive: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    seed: int = 42

    def __post_init__(self):
        for name in ("dim", "walk_length", "walks_per_node", "window", "negatives_per_positive", "epochs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.p <= 0 or self.q <= 0 or self.learning_rate <= 0:
            raise ValueError("p, q and learning_rate must be positive")


def _csr(graph: FollowGraph) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Undirected projection as CSR arrays with sorted neighbour lists."""
    nodes = list(graph.nodes)
    index = {n: i for i, n in enumerate(nodes)}
    nbrs: list[set] = [set() for _ in nodes]
    for u, v in graph.edges:
        a, b = index[u], index[v]
        nbrs[a].add(b)
        nbrs[b].add(a)
    indptr = np.zeros(len(nodes) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(s) for s in nbrs])
    indices = np.array([x for s in nbrs for x in sorted(s)], dtype=np.int64)
    return nodes, indptr, indices


@numba.njit(cache=True)
def _adjacent(indptr, indices, a, b):
    lo, hi = indptr[a], indptr[a + 1]
    k = lo + np.searchsorted(indices[lo:hi], b)
    return k < hi and indices[k] == b


@numba.njit(cache=True)
def _weights(indptr, indices, prev, cur, p, q):
    lo, hi = indptr[cur], indptr[cur + 1]
    w = np.empty(hi - lo)
    for j in range(lo, hi):
        x = indices[j]
        if x == prev:
            w[j - lo] = 1.0 / p
        elif _adjacent(indptr, indices, prev, x):
            w[j - lo] = 1.0
        else:
            w[j - lo] = 1.0 / q
    return w / w.sum()


def transition_probs(prev: int, cur: int, indptr, indices, p: float, q: float) -> np.ndarray:
    """Normalised probabilities over the neighbours of ``cur`` given the previous node."""
    return _weights(indptr, indices, prev, cur, p, q)


@numba.njit(cache=True)
def _walk(indptr, indices, start, uniforms, p, q):
    length = uniforms.shape[0]
    walk = np.full(length, -1, dtype=np.int64)
    walk[0] = start
    for s in range(1, length):
        cur = walk[s - 1]
        lo, hi = indptr[cur], indptr[cur + 1]
        if hi == lo:
            break
        if s == 1:
            j = min(int(uniforms[s] * (hi - lo)), hi - lo - 1)
        else:
            probs = _weights(indptr, indices, walk[s - 2], cur, p, q)
            assert abs(probs.sum() - 1.0) < 1e-9
            j = min(np.searchsorted(np.cumsum(probs), uniforms[s], side="right"), hi - lo - 1)
        walk[s] = indices[lo + j]
    return walk


def biased_walks(graph: FollowGraph, params: Node2VecParams = Node2VecParams()) -> list[list[str]]:
    """``walks_per_node`` walks from every node over the undirected projection.

    Each walk draws from its own generator seeded by (seed, round, start index),
    so a walk does not depend on the ones generated before it. Walks stop early
    at nodes without neighbours.
    """
    if len(graph) == 0:
        raise ValueError("biased walks need a non-empty graph")
    nodes, indptr, indices = _csr(graph)
    walks = []
    for r in range(params.walks_per_node):
        for start in range(len(nodes)):
            u = np.random.default_rng([params.seed, r, start]).random(params.walk_length)
            walk = _walk(indptr, indices, start, u, params.p, params.q)
            walks.append([nodes[i] for i in walk if i >= 0])
    return walks


def _context_pairs(walks: list[list[int]], window: int) -> np.ndarray:
    pairs = []
    for walk in walks:
        w = np.asarray(walk, dtype=np.int32)
        for off in range(1, window + 1):
            if len(w) <= off:
                break
            pairs.append(np.column_stack([w[:-off], w[off:]]))
            pairs.append(np.column_stack([w[off:], w[:-off]]))
    if not pairs:
        return np.zeros((0, 2), dtype=np.int32)
    return np.concatenate(pairs)


@numba.njit(cache=True)
def _sgns_chunk(emb_in, emb_out, pairs, negs, lr0, step0, total_steps):
    """Sequential SGD over ``pairs`` with the given negatives; returns the summed loss."""
    d = emb_in.shape[1]
    k = negs.shape[1]
    grad_h = np.empty(d)
    loss = 0.0
    for i in range(pairs.shape[0]):
        lr = lr0 * max(1e-4, 1.0 - (step0 + i) / total_steps)
        c = pairs[i, 0]
        grad_h[:] = 0.0
        for t in range(k + 1):
            if t == 0:
                o = pairs[i, 1]
                sign = 1.0
            else:
                o = negs[i, t - 1]
                sign = -1.0
            score = 0.0
            for j in range(d):
                score += emb_in[c, j] * emb_out[o, j]
            x = sign * score
            # -log sigmoid(x), stable
            loss += np.log1p(np.exp(-abs(x))) + max(-x, 0.0)
            g = -sign / (1.0 + np.exp(x))
            for j in range(d):
                grad_h[j] += g * emb_out[o, j]
                emb_out[o, j] -= lr * g * emb_in[c, j]
        for j in range(d):
            emb_in[c, j] -= lr * grad_h[j]
    return loss


_CHUNK = 1 << 16


def train_embeddings(walks: list[list[str]], params: Node2VecParams = Node2VecParams()
                     ) -> dict[str, np.ndarray]:
    """Skip-gram with negative sampling over walk co-occurrences.

    Noise words follow the unigram distribution raised to 0.75. The learning
    rate decays linearly to 1e-4 of its start value. Training stops early once
    the epoch loss improves by less than 0.1%. Nodes that never appear in a
    context pair keep their zero vector.
    """
    if not walks:
        raise ValueError("no walks to train on")
    vocab = sorted({n for w in walks for n in w})
    index = {n: i for i, n in enumerate(vocab)}
    ids = [[index[n] for n in w] for w in walks]
    pairs = _context_pairs(ids, params.window)
    v, d = len(vocab), params.dim
    rng = np.random.default_rng(params.seed)
    emb_in = np.zeros((v, d))
    emb_out = np.zeros((v, d))
    if len(pairs) == 0:
        return {n: emb_in[i].copy() for n, i in index.items()}
    active = np.zeros(v, dtype=bool)
    active[pairs[:, 0]] = True
    emb_in[active] = (rng.random((int(active.sum()), d)) - 0.5) / d
    counts = np.bincount(np.concatenate([np.asarray(w) for w in ids]), minlength=v).astype(float)
    noise = counts ** 0.75
    noise_cdf = np.cumsum(noise / noise.sum())
    noise_cdf[-1] = 1.0
    k = params.negatives_per_positive
    total_steps = params.epochs * len(pairs)
    step = 0
    prev_loss = None
    for epoch in range(params.epochs):
        order = rng.permutation(len(pairs))
        loss = 0.0
        for s in range(0, len(pairs), _CHUNK):
            chunk = pairs[order[s:s + _CHUNK]]
            negs = np.minimum(np.searchsorted(noise_cdf, rng.random((len(chunk), k)), side="right"), v - 1)
            loss += _sgns_chunk(emb_in, emb_out, chunk, negs, params.learning_rate, step, total_steps)
            step += len(chunk)
        loss /= len(pairs)
        log.debug("node2vec epoch %d loss %.6f", epoch, loss)
        if prev_loss is not None and prev_loss - loss < 1e-3 * prev_loss:
            break
        prev_loss = loss
    return {n: emb_in[i].copy() for n, i in index.items()}


def node2vec(graph: FollowGraph, params: Node2VecParams = Node2VecParams()) -> dict[str, np.ndarray]:
    emb = train_embeddings(biased_walks(graph, params), params)
    return {n: emb[n] for n in graph.nodes}


def write_embeddings(path, embeddings: dict[str, np.ndarray]) -> None:
    dim = len(next(iter(embeddings.values()))) if embeddings else 0
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", *(f"v{i}" for i in range(dim))])
        for node, vec in embeddings.items():
            w.writerow([node, *(repr(float(x)) for x in vec)])


def read_embeddings(path) -> dict[str, np.ndarray]:
    path = Path(path)
    out = {}
    with open(path, encoding="utf-8", newline="") as fh:
        r = csv.reader(fh)
        next(r)
        for row in r:
            out[row[0]] = np.array([float(x) for x in row[1:]])
    return out
