"""Whole-network node statistics on sparse matrices.

Path-based measures (betweenness, closeness, eccentricity) use the undirected
projection; PageRank and HITS use the directed follow graph.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .graph import FollowGraph


def adjacency(graph: FollowGraph) -> tuple[sp.csr_matrix, list[str]]:
    """Directed 0/1 adjacency (row follows column) in ``graph.nodes`` order."""
    nodes = list(graph.nodes)
    index = {n: i for i, n in enumerate(nodes)}
    if graph.edges:
        rows, cols = zip(*((index[u], index[v]) for u, v in graph.edges))
    else:
        rows, cols = (), ()
    n = len(nodes)
    a = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    return a, nodes


def undirected(a: sp.csr_matrix) -> sp.csr_matrix:
    u = ((a + a.T) > 0).astype(float)
    return sp.csr_matrix(u)


def shortest_path_stats(u: sp.csr_matrix, batch: int | None = None):
    """Betweenness (normalised), closeness and eccentricity of an undirected graph.

    Brandes' accumulation, run level-synchronously for a batch of sources at a
    time so every step is a sparse-dense product.
    """
    n = u.shape[0]
    between = np.zeros(n)
    closeness = np.zeros(n)
    ecc = np.zeros(n)
    if n == 0:
        return between, closeness, ecc
    batch = batch or max(1, min(n, 2_000_000 // max(n, 1)))
    for start in range(0, n, batch):
        src = np.arange(start, min(n, start + batch))
        b = len(src)
        dist = np.full((n, b), -1, dtype=np.int32)
        sigma = np.zeros((n, b))
        dist[src, np.arange(b)] = 0
        sigma[src, np.arange(b)] = 1.0
        frontier = sigma.copy()
        levels = [dist == 0]
        d = 0
        while frontier.any():
            reach = u @ frontier
            new = (reach > 0) & (dist < 0)
            if not new.any():
                break
            d += 1
            dist[new] = d
            sigma[new] = reach[new]
            frontier = np.where(new, sigma, 0.0)
            levels.append(new)
        delta = np.zeros((n, b))
        for lvl in range(len(levels) - 1, 0, -1):
            coef = np.where(levels[lvl], (1.0 + delta) / np.where(sigma > 0, sigma, 1.0), 0.0)
            back = u @ coef
            delta += np.where(levels[lvl - 1], sigma * back, 0.0)
        delta[src, np.arange(b)] = 0.0
        between += delta.sum(axis=1)
        reached = dist >= 0
        r = reached.sum(axis=0)  # includes the source
        tot = np.where(reached, dist, 0).sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            c = np.where(tot > 0, (r - 1) / tot * (r - 1) / max(n - 1, 1), 0.0)
        closeness[src] = c
        ecc[src] = dist.max(axis=0)
    if n > 2:
        between /= (n - 1) * (n - 2)
    else:
        between[:] = 0.0
    return between, closeness, ecc


def pagerank(a: sp.csr_matrix, damping: float = 0.85, tol: float = 1e-10,
             max_iter: int = 10_000) -> np.ndarray:
    n = a.shape[0]
    if n == 0:
        return np.zeros(0)
    out = np.asarray(a.sum(axis=1)).ravel()
    dangling = out == 0
    inv = np.where(dangling, 0.0, 1.0 / np.where(dangling, 1.0, out))
    p = sp.diags(inv) @ a
    pt = sp.csr_matrix(p.T)
    x = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        nxt = damping * (pt @ x) + (damping * x[dangling].sum() + 1.0 - damping) / n
        nxt /= nxt.sum()
        err = np.abs(nxt - x).sum()
        x = nxt
        if err < tol:
            break
    return x


def hits(a: sp.csr_matrix, tol: float = 1e-12, max_iter: int = 100_000):
    """Hub and authority scores (each summing to one) by power iteration."""
    n = a.shape[0]
    if n == 0 or a.nnz == 0:
        return np.zeros(n), np.zeros(n)
    at = sp.csr_matrix(a.T)
    h = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        auth = at @ h
        auth /= auth.sum()
        nxt = a @ auth
        nxt /= nxt.sum()
        err = np.abs(nxt - h).max()
        h = nxt
        if err < tol:
            break
    auth = at @ h
    auth /= auth.sum()
    return h, auth


def clustering(u: sp.csr_matrix) -> np.ndarray:
    deg = np.asarray(u.sum(axis=1)).ravel()
    tri = np.asarray((u @ u).multiply(u).sum(axis=1)).ravel() / 2.0
    denom = deg * (deg - 1) / 2.0
    return np.where(denom > 0, tri / np.where(denom > 0, denom, 1.0), 0.0)


def in_mutual_triangle(a: sp.csr_matrix) -> np.ndarray:
    m = sp.csr_matrix(a.multiply(a.T))
    tri = np.asarray((m @ m).multiply(m).sum(axis=1)).ravel()
    return tri > 0


def giant_component_mask(u: sp.csr_matrix, nodes: list[str]) -> np.ndarray:
    n = u.shape[0]
    if n == 0:
        return np.zeros(0, dtype=bool)
    ncomp, labels = connected_components(u, directed=False)
    sizes = np.bincount(labels, minlength=ncomp)
    largest = np.flatnonzero(sizes == sizes.max())
    # equal-size components: the one holding the smallest node id wins
    best = min(largest, key=lambda c: min(nodes[i] for i in np.flatnonzero(labels == c)))
    return labels == best


def node_reciprocity(a: sp.csr_matrix) -> np.ndarray:
    out = np.asarray(a.sum(axis=1)).ravel()
    inc = np.asarray(a.sum(axis=0)).ravel()
    mutual = np.asarray(a.multiply(a.T).sum(axis=1)).ravel()
    total = out + inc
    return np.where(total > 0, 2 * mutual / np.where(total > 0, total, 1.0), 0.0)
