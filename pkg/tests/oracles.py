"""Brute-force reference implementations. None of these import the code they check."""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np


def floyd_warshall(node_ids, edges):
    """All-pairs hop distances with edges taken as undirected."""
    idx = {v: k for k, v in enumerate(node_ids)}
    n = len(node_ids)
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0)
    for s, _, d in edges:
        dist[idx[s], idx[d]] = dist[idx[d], idx[s]] = 1
    for k in range(n):
        dist = np.minimum(dist, dist[:, k:k + 1] + dist[k:k + 1, :])
    return {(a, b): dist[idx[a], idx[b]] for a in node_ids for b in node_ids}


def all_shortest_paths_maximal(node_ids, edges, source):
    """Enumerate every simple path from ``source`` by DFS, keep those that are
    shortest to their endpoint, then drop paths whose node set is a strict
    subset of another kept path's set. Returns node-id sets."""
    adj = {v: set() for v in node_ids}
    for s, _, d in edges:
        adj[s].add(d)
        adj[d].add(s)
    paths = []

    def walk(path):
        paths.append(tuple(path))
        for nxt in sorted(adj[path[-1]]):
            if nxt not in path:
                walk(path + [nxt])

    walk([source])
    best = {}
    for p in paths:
        best[p[-1]] = min(best.get(p[-1], math.inf), len(p))
    shortest = [p for p in paths if len(p) == best[p[-1]]]
    sets = {frozenset(p) for p in shortest}
    return {s for s in sets if not any(s < o for o in sets)}


def pairwise_overlap(concepts_i, triples_i, concepts_j, triples_j):
    """Double-loop counts of shared distinct concepts and shared distinct triples."""
    shared_nodes = []
    for a in concepts_i:
        for b in concepts_j:
            if a == b and a not in shared_nodes:
                shared_nodes.append(a)
    shared_edges = []
    for a in triples_i:
        for b in triples_j:
            if a[0] == b[0] and a[1] == b[1] and a[2] == b[2] and a not in shared_edges:
                shared_edges.append(a)
    return len(shared_nodes), len(shared_edges)


def strictly_higher_ranks(scores):
    n = len(scores)
    ranks = [1 + sum(1 for j in range(n) if scores[j] > scores[i]) for i in range(n)]
    ties = [sum(1 for j in range(n) if scores[j] == scores[i]) for i in range(n)]
    return ranks, ties


def tie_break_orderings(scores):
    """Every total order consistent with ``scores`` (descending), ties permuted."""
    values = sorted(set(scores), reverse=True)
    blocks = [[i for i, s in enumerate(scores) if s == v] for v in values]
    for combo in itertools.product(*(itertools.permutations(b) for b in blocks)):
        yield [i for block in combo for i in block]


def exact_expected_hits(scores, positives, k):
    """Per positive, the exact fraction of tie-break orders placing it in the top k."""
    hits = {p: 0 for p in positives}
    total = 0
    for order in tie_break_orderings(scores):
        total += 1
        top = set(order[:k])
        for p in positives:
            hits[p] += p in top
    return {p: Fraction(h, total) for p, h in hits.items()}


def monte_carlo_hits(scores, positives, k, samples, rng):
    """Mean top-k hit rate of the positives over random tie-breaks."""
    s = np.asarray(scores, dtype=float)
    pos = np.asarray(positives)
    noise = rng.random((samples, len(s)))
    # primary key: score (desc), secondary: noise
    order = np.lexsort((noise, np.broadcast_to(-s, noise.shape)), axis=1)
    rank = np.empty_like(order)
    rows = np.arange(samples)[:, None]
    rank[rows, order] = np.arange(len(s))[None, :]
    return float((rank[:, pos] < k).mean())


def central_difference(f, arr, h=1e-5):
    """Gradient of scalar ``f()`` wrt ``arr`` (mutated in place and restored)."""
    grad = np.zeros_like(arr)
    for idx in np.ndindex(arr.shape):
        old = arr[idx]
        arr[idx] = old + h
        up = f()
        arr[idx] = old - h
        down = f()
        arr[idx] = old
        grad[idx] = (up - down) / (2 * h)
    return grad


def relative_error(g, fd, floor=1e-6):
    """Blockwise ``|g - fd| / max(|g|, |fd|, floor)``; the floor only matters
    for blocks whose true gradient is identically zero."""
    return float(np.linalg.norm(g - fd) / max(np.linalg.norm(g), np.linalg.norm(fd), floor))
