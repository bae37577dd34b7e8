"""Two-step feature selection.

Step one is a model-independent subset search that rewards features
correlating with the label while penalizing redundancy among themselves
(Hall's merit, forward best-first search). Step two ranks the survivors by
their univariate regression F statistic and truncates to the best count.
A step-2-only mode skips the subset search for baseline comparisons.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .errors import (
    DegenerateInput,
    DegenerateLabels,
    EmptySubset,
    KTooLarge,
    LengthMismatch,
    NoUsableFeatures,
    TooFewSamples,
)

# merit improvements smaller than this do not reset the search's patience
MERIT_EPS = 1e-12

# candidates pushed per node expansion; small instances are explored fully
_EXPANSION_FANOUT = 64


def pearson(x, y) -> float:
    """Sample Pearson correlation, clipped into [-1, 1]."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"shapes {x.shape} and {y.shape}")
    if len(x) < 2:
        raise DegenerateInput("need at least two observations")
    xc = x - x.mean()
    yc = y - y.mean()
    nx = float(np.sqrt(xc @ xc))
    ny = float(np.sqrt(yc @ yc))
    if nx == 0.0 or ny == 0.0:
        raise DegenerateInput("zero variance input")
    return float(np.clip((xc @ yc) / (nx * ny), -1.0, 1.0))


class CorrelationCache:
    """Lazily computed correlations over one sample matrix.

    Label correlations are computed in one vectorized pass on first use;
    feature-feature correlations are materialized one column at a time, only
    for features the search actually touches (the full matrix would be
    infeasible at tens of thousands of features).
    """

    def __init__(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim != 2 or len(X) != len(y):
            raise LengthMismatch(f"X is {X.shape}, y has {len(y)} rows")
        if len(X) < 2:
            raise TooFewSamples("need at least two samples")
        self.n, self.d = X.shape
        self._Xc = X - X.mean(axis=0)
        self._norms = np.sqrt(np.einsum("ij,ij->j", self._Xc, self._Xc))
        self.degenerate = self._norms == 0.0
        self._yc = y - y.mean()
        self._ynorm = float(np.sqrt(self._yc @ self._yc))
        self._label_corr: np.ndarray | None = None
        self._columns: dict[int, np.ndarray] = {}

    def label_corr(self) -> np.ndarray:
        """Signed correlation of every feature with the label (0 if degenerate)."""
        if self._label_corr is None:
            if self._ynorm == 0.0:
                r = np.zeros(self.d)
            else:
                denom = np.where(self.degenerate, 1.0, self._norms) * self._ynorm
                r = np.clip((self._yc @ self._Xc) / denom, -1.0, 1.0)
                r[self.degenerate] = 0.0
            self._label_corr = r
        return self._label_corr

    def corr_with_all(self, j: int) -> np.ndarray:
        """Signed correlation of feature ``j`` with every feature (0 if degenerate)."""
        col = self._columns.get(j)
        if col is None:
            if self.degenerate[j]:
                col = np.zeros(self.d)
            else:
                denom = np.where(self.degenerate, 1.0, self._norms) * self._norms[j]
                col = np.clip((self._Xc[:, j] @ self._Xc) / denom, -1.0, 1.0)
                col[self.degenerate] = 0.0
                col[j] = 0.0 if self.degenerate[j] else 1.0
            self._columns[j] = col
        return col

    def feature_corr(self, i: int, j: int) -> float:
        return float(self.corr_with_all(i)[j])


def cfs_merit(subset, cache: CorrelationCache) -> float:
    """Hall's merit: k * r_cf / sqrt(k + k(k-1) * r_ff).

    ``r_cf`` is the mean absolute feature-label correlation over the subset,
    ``r_ff`` the mean absolute pairwise feature-feature correlation.
    Degenerate features contribute zero correlation.
    """
    subset = list(subset)
    k = len(subset)
    if k == 0:
        raise EmptySubset("merit of an empty subset is undefined")
    r_cf = float(np.abs(cache.label_corr()[subset]).mean())
    if k == 1:
        return r_cf
    pair_sum = 0.0
    for a_pos, a in enumerate(subset):
        col = np.abs(cache.corr_with_all(a))
        for b in subset[a_pos + 1:]:
            pair_sum += float(col[b])
    r_ff = pair_sum / (k * (k - 1) / 2)
    return k * r_cf / float(np.sqrt(k + k * (k - 1) * r_ff))


def _expand_merits(subset, cache: CorrelationCache, abs_cf: np.ndarray) -> np.ndarray:
    """Merit of subset+{j} for every candidate j, vectorized; members get -inf."""
    k = len(subset) + 1
    sum_cf = float(abs_cf[list(subset)].sum()) if subset else 0.0
    r_cf = (sum_cf + abs_cf) / k
    if k == 1:
        merits = r_cf
    else:
        pair_sum = 0.0
        members = list(subset)
        for a_pos, a in enumerate(members):
            col = np.abs(cache.corr_with_all(a))
            for b in members[a_pos + 1:]:
                pair_sum += float(col[b])
        cross = np.zeros(cache.d)
        for a in members:
            cross += np.abs(cache.corr_with_all(a))
        r_ff = (pair_sum + cross) / (k * (k - 1) / 2)
        merits = k * r_cf / np.sqrt(k + k * (k - 1) * r_ff)
    merits = np.asarray(merits, dtype=float).copy()
    merits[list(subset)] = -np.inf
    return merits


def cfs_search(X, y, patience: int = 5) -> list[int]:
    """Forward best-first subset search over the merit landscape.

    Starts from the empty set, repeatedly expands the best open subset by one
    feature, and stops once ``patience`` consecutive expansions fail to
    improve the best merit seen. Ties always break toward the lower feature
    index, so the result is deterministic. Returns the best subset, sorted.
    """
    cache = CorrelationCache(X, y)
    if bool(cache.degenerate.all()):
        raise NoUsableFeatures("every feature has zero variance")
    abs_cf = np.abs(cache.label_corr())

    best_merit = -np.inf
    best_subset: tuple[int, ...] = ()
    heap: list[tuple[float, tuple[int, ...]]] = [(0.0, ())]
    visited: set[tuple[int, ...]] = set()
    stale = 0

    while heap and stale < patience:
        _, subset = heapq.heappop(heap)
        if subset in visited:
            continue
        visited.add(subset)
        if len(subset) >= cache.d:
            continue
        merits = _expand_merits(subset, cache, abs_cf)
        order = np.argsort(-merits, kind="stable")[:_EXPANSION_FANOUT]
        top = merits[order[0]]
        if top > best_merit + MERIT_EPS:
            best_merit = float(top)
            best_subset = tuple(sorted(subset + (int(order[0]),)))
            stale = 0
        else:
            stale += 1
        for j in order:
            if not np.isfinite(merits[j]):
                break
            child = tuple(sorted(subset + (int(j),)))
            if child not in visited:
                heapq.heappush(heap, (-float(merits[j]), child))
    return sorted(best_subset)


def f_value(x, y) -> float:
    """Univariate regression F statistic of one feature against the label.

    F = (r^2 / (1 - r^2)) * (n - 2). A zero-variance feature scores 0; a
    perfect fit returns +inf so it sorts above every finite score.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"shapes {x.shape} and {y.shape}")
    n = len(x)
    if n < 3:
        raise TooFewSamples("F statistic needs at least three samples")
    if np.ptp(y) == 0.0:
        raise DegenerateLabels("labels are constant")
    if np.ptp(x) == 0.0:
        return 0.0
    r = pearson(x, y)
    r2 = r * r
    if r2 >= 1.0:
        return float("inf")
    return r2 / (1.0 - r2) * (n - 2)


def f_values(X, y) -> np.ndarray:
    """Vectorized :func:`f_value` across columns (same contracts)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise LengthMismatch(f"X is {X.shape}, y has {len(y)} rows")
    n = len(y)
    if n < 3:
        raise TooFewSamples("F statistic needs at least three samples")
    if np.ptp(y) == 0.0:
        raise DegenerateLabels("labels are constant")
    cache = CorrelationCache(X, y)
    r = cache.label_corr()
    r2 = r * r
    out = np.where(r2 >= 1.0, np.inf, r2 / np.maximum(1.0 - r2, np.finfo(float).tiny) * (n - 2))
    out[cache.degenerate] = 0.0
    return out


def rank_and_truncate(X, y, subset, k: int) -> list[int]:
    """The ``k`` best features of ``subset`` by descending F, ties by index."""
    subset = [int(j) for j in subset]
    if k > len(subset):
        raise KTooLarge(k, len(subset))
    fs = f_values(np.asarray(X, dtype=float)[:, subset], y)
    ranked = sorted(zip(subset, fs), key=lambda jf: (-jf[1], jf[0]))
    return [j for j, _ in ranked[:k]]


MODES = ("two_step", "step2_only")


@dataclass
class SelectionReport:
    mode: str
    cfs_subset: tuple[int, ...]
    f_ranked: tuple[int, ...]
    f_scores: tuple[float, ...]
    chosen_k: int
    patience: int = 5

    @property
    def selected(self) -> tuple[int, ...]:
        return self.f_ranked[: self.chosen_k]

    def to_dict(self, names=None) -> dict:
        def named(indices):
            if names is None:
                return list(indices)
            return [{"index": int(i), "name": names[i]} for i in indices]

        return {
            "mode": self.mode,
            "patience": self.patience,
            "cfs_subset": named(self.cfs_subset),
            "chosen_k": self.chosen_k,
            "ranking": [
                {
                    "index": int(j),
                    "name": None if names is None else names[j],
                    "f_value": float(f) if np.isfinite(f) else "inf",
                }
                for j, f in zip(self.f_ranked, self.f_scores)
            ],
            "selected": named(self.selected),
        }


class TwoStepSelector(BaseEstimator, TransformerMixin):
    """Sklearn-style transformer running the full selection pipeline.

    ``mode="two_step"`` searches the merit-best subset first and ranks it;
    ``mode="step2_only"`` ranks every feature directly. ``top_k=None`` keeps
    the whole ranking.
    """

    def __init__(self, mode: str = "two_step", patience: int = 5, top_k: int | None = None):
        self.mode = mode
        self.patience = patience
        self.top_k = top_k

    def fit(self, X, y):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.mode == "two_step":
            pool = tuple(cfs_search(X, y, patience=self.patience))
        else:
            pool = tuple(range(X.shape[1]))
        fs = f_values(X[:, list(pool)], y)
        order = sorted(zip(pool, fs), key=lambda jf: (-jf[1], jf[0]))
        ranked = tuple(j for j, _ in order)
        scores = tuple(float(f) for _, f in order)
        k = len(ranked) if self.top_k is None else self.top_k
        if k > len(ranked):
            raise KTooLarge(k, len(ranked))
        self.report_ = SelectionReport(
            mode=self.mode,
            cfs_subset=pool if self.mode == "two_step" else (),
            f_ranked=ranked,
            f_scores=scores,
            chosen_k=k,
            patience=self.patience,
        )
        self.selected_ = np.array(self.report_.selected, dtype=int)
        return self

    def transform(self, X):
        if not hasattr(self, "selected_"):
            raise NotFittedError("fit the selector before transforming")
        return np.asarray(X, dtype=float)[:, self.selected_]
