"""Extremely randomized regression trees.

Every node draws one uniform cut-point per candidate feature between the
node-local minimum and maximum, keeps the candidate with the largest variance
reduction, and recurses.  Each tree sees the full training sample.

Randomness is supplied up front: tree ``t`` gets a matrix ``U`` with one row
per potential node, indexed by node id in creation order.  Columns ``0..d-1``
place the cut-points, columns ``d..2d-1`` order the features for candidate
selection.  This makes a tree a pure function of ``(X, y, U)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit


def max_nodes(n_samples: int, min_leaf: int) -> int:
    return 2 * (n_samples // max(min_leaf, 1)) + 1


@njit(cache=True, nogil=True)
def _build_tree(X, y, min_leaf, min_split, k_features, U):
    n, d = X.shape
    cap = U.shape[0]
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros(cap)

    idx = np.arange(n)
    st_node = np.empty(cap, np.int64)
    st_lo = np.empty(cap, np.int64)
    st_hi = np.empty(cap, np.int64)
    top = 0
    st_node[0] = 0
    st_lo[0] = 0
    st_hi[0] = n
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = st_node[top]
        lo = st_lo[top]
        hi = st_hi[top]
        m = hi - lo

        total = 0.0
        for r in range(lo, hi):
            total += y[idx[r]]
        mean = total / m
        value[node] = mean
        if m < min_split or m < 2 * min_leaf:
            continue
        spread = 0.0
        for r in range(lo, hi):
            dev = y[idx[r]] - mean
            spread += dev * dev
        if spread <= 0.0:
            continue

        order = np.argsort(U[node, d:])
        best_score = -1.0
        best_f = -1
        best_cut = 0.0
        visited = 0
        for q in range(d):
            if visited >= k_features:
                break
            f = order[q]
            fmin = X[idx[lo], f]
            fmax = fmin
            for r in range(lo + 1, hi):
                v = X[idx[r], f]
                if v < fmin:
                    fmin = v
                elif v > fmax:
                    fmax = v
            if fmax <= fmin:
                continue
            visited += 1
            cut = fmin + U[node, f] * (fmax - fmin)
            if cut >= fmax:
                cut = fmin
            n_left = 0
            s_left = 0.0
            for r in range(lo, hi):
                if X[idx[r], f] <= cut:
                    n_left += 1
                    s_left += y[idx[r]] - mean
            n_right = m - n_left
            if n_left < min_leaf or n_right < min_leaf:
                continue
            # centred sums: the right sum is -s_left
            score = s_left * s_left * (1.0 / n_left + 1.0 / n_right)
            if score > best_score:
                best_score = score
                best_f = f
                best_cut = cut
        if best_f < 0:
            continue

        i = lo
        j = hi - 1
        while i <= j:
            if X[idx[i], best_f] <= best_cut:
                i += 1
            else:
                tmp = idx[i]
                idx[i] = idx[j]
                idx[j] = tmp
                j -= 1
        feature[node] = best_f
        threshold[node] = best_cut
        left[node] = n_nodes
        right[node] = n_nodes + 1
        # push right first so the left subtree is expanded (and numbered) first
        st_node[top] = n_nodes + 1
        st_lo[top] = i
        st_hi[top] = hi
        top += 1
        st_node[top] = n_nodes
        st_lo[top] = lo
        st_hi[top] = i
        top += 1
        n_nodes += 2

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
    )


@njit(cache=True, nogil=True)
def _predict_forest(X, roots, feature, threshold, left, right, value):
    n = X.shape[0]
    n_trees = roots.shape[0]
    out = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for t in range(n_trees):
            node = roots[t]
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            acc += value[node]
        out[i] = acc / n_trees
    return out


@dataclass(frozen=True, eq=False)
class ForestState:
    """All trees flattened into shared node arrays; child links are global ids."""

    roots: np.ndarray
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_trees(self) -> int:
        return int(self.roots.size)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        return _predict_forest(
            X, self.roots, self.feature, self.threshold, self.left, self.right, self.value
        )


def tree_uniforms(rng: np.random.Generator, n_samples: int, n_features: int, min_leaf: int):
    return rng.random((max_nodes(n_samples, min_leaf), 2 * n_features))


def build_tree(X, y, U, min_leaf: int = 7, min_split: int | None = None, k_features: int | None = None) -> ForestState:
    """One tree grown with the given uniforms ``U`` (see :func:`tree_uniforms`)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    d = X.shape[1]
    U = np.ascontiguousarray(U, dtype=np.float64)
    if U.shape != (max_nodes(X.shape[0], min_leaf), 2 * d):
        raise ValueError(f"U must have shape {(max_nodes(X.shape[0], min_leaf), 2 * d)}")
    parts = _build_tree(
        X, y, min_leaf, d + 1 if min_split is None else min_split, d if k_features is None else k_features, U
    )
    return ForestState(np.zeros(1, np.int64), *parts)


def fit_extra_trees(
    X: np.ndarray,
    y: np.ndarray,
    n_trees: int = 100,
    min_leaf: int = 7,
    min_split: int | None = None,
    k_features: int | None = None,
    seed: int = 0,
) -> ForestState:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, d = X.shape
    if min_split is None:
        min_split = d + 1
    if k_features is None:
        k_features = d
    rng = np.random.default_rng(seed)
    parts = []
    offset = 0
    roots = np.empty(n_trees, np.int64)
    for t in range(n_trees):
        U = tree_uniforms(rng, n, d, min_leaf)
        f, thr, lft, rgt, val = _build_tree(X, y, min_leaf, min_split, k_features, U)
        roots[t] = offset
        lft = np.where(lft >= 0, lft + offset, -1)
        rgt = np.where(rgt >= 0, rgt + offset, -1)
        parts.append((f, thr, lft, rgt, val))
        offset += f.size
    cat = [np.concatenate([p[i] for p in parts]) for i in range(5)]
    return ForestState(roots, *cat)
