"""Single CART trees, bagged forests and gradient boosting.

Randomness for tree ``k`` is drawn from ``SeedSequence([seed, k])`` so a fit
does not depend on how trees are scheduled across threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .linear import sigmoid
from .trees import Binner, TreeArrays, grow

MAX_BACKTRACK = 30


def _tree_seed(seed: int, k: int) -> tuple[np.random.Generator, int]:
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, k])
    rng = np.random.default_rng(ss)
    return rng, int(ss.generate_state(1, dtype=np.uint64)[0])


def default_mtry(n_features: int, classification: bool) -> int:
    if classification:
        return max(1, math.ceil(math.sqrt(n_features)))
    return max(1, n_features // 3)


def fit_single_tree(X, y, w, max_depth=None, min_leaf=5, seed=0):
    binner = Binner.fit(X)
    codes = binner.transform(X)
    _, tseed = _tree_seed(seed, 0)
    tree = grow(codes, y, w, binner.flat(), max_depth, min_leaf, X.shape[1], tseed)
    return TreeArrays.from_trees([tree])


def fit_bagging(X, y, w, n_trees=200, max_depth=None, min_leaf=5, mtry=None,
                classification=False, seed=0, n_jobs=1):
    """Bootstrap-aggregated trees.

    Returns the trees and the bootstrap multiplicities (trees x rows) so
    callers can evaluate out-of-bag error.
    """
    n, p = X.shape
    mtry = default_mtry(p, classification) if mtry is None else int(mtry)
    binner = Binner.fit(X)
    codes = binner.transform(X)
    flat = binner.flat()
    y = np.ascontiguousarray(y, dtype=float)

    def one(k):
        rng, tseed = _tree_seed(seed, k)
        counts = np.bincount(rng.integers(0, n, size=n), minlength=n)
        tree = grow(codes, y, w * counts, flat, max_depth, min_leaf, mtry, tseed)
        return tree, counts.astype(np.uint16)

    if n_jobs == 1:
        results = [one(k) for k in range(n_trees)]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(one, range(n_trees)))
    trees = TreeArrays.from_trees([r[0] for r in results])
    return trees, np.vstack([r[1] for r in results])


def vote_fraction(leaf_values: np.ndarray) -> np.ndarray:
    """Mean hard vote over trees; a tied leaf casts half a vote."""
    votes = np.where(leaf_values > 0.5, 1.0, np.where(leaf_values < 0.5, 0.0, 0.5))
    return votes.mean(axis=0)


def fit_boosting(X, y, w, n_rounds=300, max_depth=4, min_leaf=5, learning_rate=0.1,
                 subsample=0.8, classification=False, seed=0):
    """Gradient boosting on squared loss or logistic loss.

    Each round fits a regression tree to the negative gradient on a row
    subsample. Regression leaves take the mean residual; classification
    leaves take a Newton step. A backtracking guard halves a round's step
    until the full training loss does not increase (zero step if it never
    stops increasing), so the recorded loss path is non-increasing.

    Returns ``(trees, init, losses)`` where ``losses[0]`` is the loss of the
    constant model.
    """
    n, p = X.shape
    y = np.asarray(y, dtype=float)
    binner = Binner.fit(X)
    codes = binner.transform(X)
    flat = binner.flat()
    wsum = w.sum()
    if classification:
        pbar = np.clip(w @ y / wsum, 1e-6, 1 - 1e-6)
        init = float(np.log(pbar / (1 - pbar)))
    else:
        init = float(w @ y / wsum)

    def loss(F):
        if classification:
            return float(w @ (np.logaddexp(0.0, F) - y * F) / wsum)
        return float(w @ (y - F) ** 2 / wsum)

    F = np.full(n, init)
    losses = [loss(F)]
    trees = []
    for k in range(n_rounds):
        rng, tseed = _tree_seed(seed, k)
        take = rng.random(n) < subsample if subsample < 1 else np.ones(n, dtype=bool)
        if not take.any():
            take[rng.integers(0, n)] = True
        if classification:
            mu = sigmoid(F)
            grad = y - mu
        else:
            grad = y - F
        wk = np.where(take, w, 0.0)
        f, t, l, r, v = grow(codes, grad, wk, flat, max_depth, min_leaf, p, tseed)
        single = TreeArrays.from_trees([(f, t, l, r, v)])
        leaf_of = single.apply(X)[0]
        if classification:
            num = np.bincount(leaf_of[take], weights=(w * grad)[take], minlength=f.size)
            den = np.bincount(leaf_of[take], weights=(w * mu * (1 - mu))[take], minlength=f.size)
            v = np.where(den > 1e-12, num / np.maximum(den, 1e-12), 0.0)
        step = learning_rate
        for _ in range(MAX_BACKTRACK):
            cand = F + step * v[leaf_of]
            new_loss = loss(cand)
            if new_loss <= losses[-1]:
                break
            step *= 0.5
        else:
            step = 0.0
            cand = F
            new_loss = losses[-1]
        F = cand
        losses.append(new_loss)
        trees.append((f, t, l, r, step * v))
    return TreeArrays.from_trees(trees), init, np.asarray(losses)
