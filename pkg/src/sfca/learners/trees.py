"""CART trees on binned features, compiled with numba.

Split search works on per-feature histograms of (weight, weighted target,
count). Features with at most ``max_bins`` distinct training values are
binned at midpoints between those values, which makes the search exact;
wider features are cut at quantiles.

Both criteria reduce to maximizing ``S_L^2/W_L + S_R^2/W_R``: for a 0/1 target
the weighted Gini impurity of a child is ``2 (S - S^2/W)`` and for a real
target the weighted SSE is ``sum(w y^2) - S^2/W``, so one scan serves both.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

MAX_BINS = 255

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


@njit(cache=True, nogil=True)
def _splitmix(state):
    state[0] = state[0] + _GOLDEN
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True)
def _randint(state, k):
    u = (_splitmix(state) >> np.uint64(11)) * (1.0 / 9007199254740992.0)
    r = int(u * k)
    return r if r < k else k - 1


@dataclass
class Binner:
    edges: list

    @classmethod
    def fit(cls, X: np.ndarray, max_bins: int = MAX_BINS) -> "Binner":
        edges = []
        for j in range(X.shape[1]):
            u = np.unique(X[:, j])
            if u.size <= max_bins:
                e = (u[:-1] + u[1:]) / 2.0
            else:
                q = np.quantile(X[:, j], np.linspace(0, 1, max_bins + 1)[1:-1])
                e = np.unique(q)
            edges.append(e.astype(float))
        return cls(edges)

    def transform(self, X: np.ndarray) -> np.ndarray:
        """Bin codes, laid out feature-major: shape (n_features, n_rows)."""
        codes = np.empty((X.shape[1], X.shape[0]), dtype=np.uint8)
        for j, e in enumerate(self.edges):
            codes[j] = np.searchsorted(e, X[:, j], side="left")
        return codes

    def flat(self):
        n_bins = np.array([e.size + 1 for e in self.edges], dtype=np.int64)
        offsets = np.zeros(len(self.edges) + 1, dtype=np.int64)
        offsets[1:] = np.cumsum([e.size for e in self.edges])
        flat = np.concatenate(self.edges) if self.edges else np.zeros(0)
        return n_bins, flat.astype(float), offsets


@njit(cache=True, nogil=True)
def build_tree(codes, y, w, rows_in, n_bins, edges, edge_off, max_depth, min_leaf, mtry, seed):
    """Grow one tree greedily; returns node arrays.

    ``rows_in`` lists the training rows (those with positive weight). Leaves
    have ``feature == -1``; internal nodes send ``x <= threshold`` left.
    """
    p = codes.shape[0]
    rows = rows_in.copy()
    n = rows.size
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    weight = np.zeros(cap)

    state = np.empty(1, dtype=np.uint64)
    state[0] = np.uint64(seed)
    perm = np.arange(p)
    maxb = 1
    for j in range(p):
        if n_bins[j] > maxb:
            maxb = n_bins[j]
    hw = np.zeros(maxb)
    hs = np.zeros(maxb)
    hc = np.zeros(maxb, dtype=np.int64)
    sc = np.empty(n, dtype=np.int64)

    # stack entries: node id, start, end, depth
    st_node = np.empty(cap, dtype=np.int64)
    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    top = 0
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = n
    st_depth[0] = 0
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = st_node[top]
        a = st_start[top]
        b = st_end[top]
        depth = st_depth[top]

        W = 0.0
        S = 0.0
        ymin = np.inf
        ymax = -np.inf
        for k in range(a, b):
            r = rows[k]
            W += w[r]
            S += w[r] * y[r]
            if y[r] < ymin:
                ymin = y[r]
            if y[r] > ymax:
                ymax = y[r]
        value[node] = S / W if W > 0 else 0.0
        weight[node] = W
        count = b - a
        if (max_depth >= 0 and depth >= max_depth) or count < 2 * min_leaf or ymax - ymin <= 0.0:
            continue

        parent = S * S / W
        best_score = -np.inf
        best_f = -1
        best_b = -1
        # partial Fisher-Yates draw of mtry features
        for i in range(mtry):
            jpos = i + _randint(state, p - i)
            tmp = perm[i]
            perm[i] = perm[jpos]
            perm[jpos] = tmp
            f = perm[i]
            nb = n_bins[f]
            if nb < 2:
                continue
            if 4 * count < nb:
                # few rows: sort their codes instead of scanning every bin
                for k in range(count):
                    r = rows[a + k]
                    sc[k] = codes[f, r]
                order = np.argsort(sc[:count], kind="mergesort")
                WL = 0.0
                SL = 0.0
                CL = 0
                for k in range(count - 1):
                    r = rows[a + order[k]]
                    WL += w[r]
                    SL += w[r] * y[r]
                    CL += 1
                    if sc[order[k + 1]] == sc[order[k]]:
                        continue
                    if CL < min_leaf:
                        continue
                    if count - CL < min_leaf:
                        break
                    WR = W - WL
                    if WL <= 0.0 or WR <= 0.0:
                        continue
                    SR = S - SL
                    score = SL * SL / WL + SR * SR / WR
                    if score > best_score + 1e-12 * abs(parent):
                        best_score = score
                        best_f = f
                        best_b = sc[order[k]]
                continue
            for q in range(nb):
                hw[q] = 0.0
                hs[q] = 0.0
                hc[q] = 0
            for k in range(a, b):
                r = rows[k]
                c = codes[f, r]
                hw[c] += w[r]
                hs[c] += w[r] * y[r]
                hc[c] += 1
            WL = 0.0
            SL = 0.0
            CL = 0
            for q in range(nb - 1):
                WL += hw[q]
                SL += hs[q]
                CL += hc[q]
                if hc[q] == 0:
                    continue
                if CL < min_leaf:
                    continue
                if count - CL < min_leaf:
                    break
                WR = W - WL
                if WL <= 0.0 or WR <= 0.0:
                    continue
                SR = S - SL
                score = SL * SL / WL + SR * SR / WR
                if score > best_score + 1e-12 * abs(parent):
                    best_score = score
                    best_f = f
                    best_b = q
        if best_f < 0 or best_score < parent - 1e-9 * abs(parent):
            continue

        # partition rows[a:b] by code <= best_b
        i = a
        j = b - 1
        while i <= j:
            if codes[best_f, rows[i]] <= best_b:
                i += 1
            else:
                tmp = rows[i]
                rows[i] = rows[j]
                rows[j] = tmp
                j -= 1
        mid = i
        feature[node] = best_f
        threshold[node] = edges[edge_off[best_f] + best_b]
        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        left[node] = lnode
        right[node] = rnode
        st_node[top] = rnode
        st_start[top] = mid
        st_end[top] = b
        st_depth[top] = depth + 1
        top += 1
        st_node[top] = lnode
        st_start[top] = a
        st_end[top] = mid
        st_depth[top] = depth + 1
        top += 1

    return (
        feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
        right[:n_nodes].copy(), value[:n_nodes].copy(), weight[:n_nodes].copy(),
    )


@njit(cache=True, nogil=True)
def apply_flat(X, feature, threshold, left, right, roots):
    """Leaf index (into the flat node arrays) of every row for every tree."""
    n = X.shape[0]
    out = np.empty((roots.size, n), dtype=np.int64)
    for t in range(roots.size):
        for i in range(n):
            node = roots[t]
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[t, i] = node
    return out


@dataclass
class TreeArrays:
    """A collection of trees stored as flat node arrays.

    Child indices are absolute positions in the flat arrays; ``roots[t]`` is
    the root of tree ``t``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    roots: np.ndarray

    @classmethod
    def from_trees(cls, trees) -> "TreeArrays":
        feats, thr, lefts, rights, vals, roots = [], [], [], [], [], []
        offset = 0
        for f, t, l, r, v in trees:
            roots.append(offset)
            feats.append(f)
            thr.append(t)
            lefts.append(np.where(l >= 0, l + offset, -1))
            rights.append(np.where(r >= 0, r + offset, -1))
            vals.append(v)
            offset += f.size
        return cls(
            np.concatenate(feats).astype(np.int64), np.concatenate(thr).astype(float),
            np.concatenate(lefts).astype(np.int64), np.concatenate(rights).astype(np.int64),
            np.concatenate(vals).astype(float), np.asarray(roots, dtype=np.int64),
        )

    @property
    def n_trees(self) -> int:
        return self.roots.size

    def apply(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=float)
        return apply_flat(X, self.feature, self.threshold, self.left, self.right, self.roots)

    def leaf_values(self, X) -> np.ndarray:
        """Per-tree leaf value of every row, shape (n_trees, n_rows)."""
        return self.value[self.apply(X)]

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("feature", "threshold", "left", "right", "value", "roots")}


def grow(codes, y, w, binner_flat, max_depth, min_leaf, mtry, seed):
    """Grow a tree on the rows with positive weight."""
    n_bins, edges, offsets = binner_flat
    rows = np.flatnonzero(w > 0).astype(np.int64)
    md = -1 if max_depth is None else int(max_depth)
    f, t, l, r, v, _ = build_tree(
        codes, np.ascontiguousarray(y, dtype=float), np.ascontiguousarray(w, dtype=float),
        rows, n_bins, edges, offsets, md, int(min_leaf), int(mtry), np.uint64(seed),
    )
    return f, t, l, r, v
