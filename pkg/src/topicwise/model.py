"""Regressors, class balancing, and the hyperparameter grid.

All three regressor families are trained with explicit seeded randomness and
per-feature standardization fitted on the training data only, so a run is a
pure function of (spec, data, seed) regardless of worker parallelism.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError

from .errors import (
    DegenerateInput,
    DimensionMismatch,
    EmptyInput,
    InvalidSpec,
    KTooLarge,
    NonFiniteFeature,
)
from .select import rank_and_truncate
from .util import derive_seed

KINDS = ("sgd_squared", "svr_linear", "random_forest", "mean")

# paper-style default tree grid for random forests
FOREST_GRID_SIZES = (1, 10, 20, 30, 40, 50, 100, 200)


@dataclass(frozen=True)
class RegressorSpec:
    kind: str
    hyper: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidSpec(f"unknown regressor kind {self.kind!r}")

    def label(self) -> str:
        if not self.hyper:
            return self.kind
        inner = ",".join(f"{k}={v}" for k, v in sorted(self.hyper.items()))
        return f"{self.kind}({inner})"

    def with_seed(self, seed: int) -> "RegressorSpec":
        return replace(self, seed=seed)


def oversample(X, y, seed: int):
    """Balance integer score groups by duplicating rows.

    Each score group is duplicated whole ``floor(max/count)`` times and topped
    up with a seeded uniform draw without replacement, so every group ends at
    exactly the majority count. Original rows are always kept; nothing is
    synthesized.
    """
    X = np.asarray(X)
    y = np.asarray(y)
    if len(y) == 0:
        raise EmptyInput("cannot oversample an empty sample set")
    rng = np.random.default_rng(seed)
    scores = np.unique(y)
    groups = {s: np.flatnonzero(y == s) for s in scores}
    target = max(len(g) for g in groups.values())
    extra: list[np.ndarray] = []
    for s in scores:
        idx = groups[s]
        reps = target // len(idx)
        rem = target - reps * len(idx)
        for _ in range(reps - 1):
            extra.append(idx)
        if rem:
            extra.append(rng.choice(idx, size=rem, replace=False))
    take = np.concatenate([np.arange(len(y))] + extra) if extra else np.arange(len(y))
    return X[take], y[take]


class RandomOversampler(BaseEstimator):
    """Resampler-style wrapper around :func:`oversample`."""

    def __init__(self, seed: int = 0):
        self.seed = seed

    def fit_resample(self, X, y):
        return oversample(X, y, self.seed)


def _standardize_fit(X):
    mu = X.mean(axis=0)
    sigma = X.std(axis=0)
    sigma = np.where(sigma == 0.0, 1.0, sigma)
    return mu, sigma


class _GradientDescentBase(BaseEstimator, RegressorMixin):
    """Shared mini-batch gradient loop; subclasses supply the loss gradient."""

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim != 2:
            X = X.reshape(len(y), -1)
        n, d = X.shape
        if n < 2:
            raise DegenerateInput("need at least two training samples")
        self.mu_, self.sigma_ = _standardize_fit(X)
        Z = (X - self.mu_) / self.sigma_
        if not np.isfinite(Z).all():
            raise NonFiniteFeature("non-finite features after standardization")
        self.y_mu_ = float(y.mean())
        y_sigma = float(y.std())
        self.y_sigma_ = y_sigma if y_sigma > 0.0 else 1.0
        t = (y - self.y_mu_) / self.y_sigma_

        rng = np.random.default_rng(self.seed)
        w = np.zeros(d)
        b = 0.0
        step = 0
        batch = max(1, int(self.batch_size))
        for _ in range(int(self.epochs)):
            order = rng.permutation(n)
            for lo in range(0, n, batch):
                idx = order[lo:lo + batch]
                Zb, tb = Z[idx], t[idx]
                err = Zb @ w + b - tb
                gw, gb = self._gradient(Zb, err)
                step += 1
                lr = self.learning_rate / np.sqrt(step)
                w -= lr * (gw + self.l2 * w)
                b -= lr * gb
        self.weights_ = w
        self.bias_ = float(b)
        return self

    def predict(self, X):
        if not hasattr(self, "weights_"):
            raise NotFittedError("fit before predicting")
        X = np.asarray(X, dtype=float)
        if len(X) == 0:
            return np.empty(0)
        if X.ndim != 2 or X.shape[1] != len(self.weights_):
            raise DimensionMismatch(
                f"model expects {len(self.weights_)} features, got {X.shape}"
            )
        Z = (X - self.mu_) / self.sigma_
        return (Z @ self.weights_ + self.bias_) * self.y_sigma_ + self.y_mu_


class SgdRegressor(_GradientDescentBase):
    """Mini-batch gradient descent on squared loss with an L2 penalty."""

    def __init__(self, learning_rate=0.05, epochs=300, l2=1e-4, batch_size=8, seed=0):
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.l2 = l2
        self.batch_size = batch_size
        self.seed = seed

    def _gradient(self, Zb, err):
        return Zb.T @ err / len(err), float(err.mean())


class LinearSvrRegressor(_GradientDescentBase):
    """Same loop with the epsilon-insensitive loss (linear-kernel SVR)."""

    def __init__(self, learning_rate=0.05, epochs=300, l2=1e-4, batch_size=8,
                 epsilon=0.1, seed=0):
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.l2 = l2
        self.batch_size = batch_size
        self.epsilon = epsilon
        self.seed = seed

    def _gradient(self, Zb, err):
        g = np.where(np.abs(err) > self.epsilon, np.sign(err), 0.0)
        return Zb.T @ g / len(g), float(g.mean())


def _build_tree(X, y, rng, max_depth, min_leaf, n_sub, depth=0):
    node_value = float(y.mean())
    n, d = X.shape
    if (max_depth is not None and depth >= max_depth) or n < 2 * min_leaf or np.ptp(y) == 0.0:
        return {"value": node_value}
    if n_sub < d:
        feats = np.sort(rng.choice(d, size=n_sub, replace=False))
    else:
        feats = np.arange(d)
    best = None  # (sse, feature, threshold)
    for f in feats:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        ys = y[order]
        cum = np.cumsum(ys)
        cumsq = np.cumsum(ys * ys)
        total, total_sq = cum[-1], cumsq[-1]
        sizes = np.arange(1, n)
        valid = (xs[:-1] < xs[1:]) & (sizes >= min_leaf) & (n - sizes >= min_leaf)
        if not valid.any():
            continue
        left_sse = cumsq[:-1] - cum[:-1] ** 2 / sizes
        right_n = n - sizes
        right_sum = total - cum[:-1]
        right_sse = (total_sq - cumsq[:-1]) - right_sum ** 2 / right_n
        sse = np.where(valid, left_sse + right_sse, np.inf)
        i = int(np.argmin(sse))
        if np.isfinite(sse[i]) and (best is None or sse[i] < best[0]):
            best = (float(sse[i]), int(f), float((xs[i] + xs[i + 1]) / 2.0))
    if best is None:
        return {"value": node_value}
    _, f, threshold = best
    mask = X[:, f] <= threshold
    return {
        "feature": f,
        "threshold": threshold,
        "left": _build_tree(X[mask], y[mask], rng, max_depth, min_leaf, n_sub, depth + 1),
        "right": _build_tree(X[~mask], y[~mask], rng, max_depth, min_leaf, n_sub, depth + 1),
    }


def _tree_predict(tree, row):
    while "feature" in tree:
        tree = tree["left"] if row[tree["feature"]] <= tree["threshold"] else tree["right"]
    return tree["value"]


class ForestRegressor(BaseEstimator, RegressorMixin):
    """Bagged variance-reduction regression trees with feature subsampling."""

    def __init__(self, tree_count=10, max_depth=None, min_leaf=1,
                 feature_subsample=1.0, bootstrap=True, seed=0):
        self.tree_count = tree_count
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.feature_subsample = feature_subsample
        self.bootstrap = bootstrap
        self.seed = seed

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        n, d = X.shape
        if n < 2:
            raise DegenerateInput("need at least two training samples")
        self.mu_, self.sigma_ = _standardize_fit(X)
        Z = (X - self.mu_) / self.sigma_
        if not np.isfinite(Z).all():
            raise NonFiniteFeature("non-finite features after standardization")
        n_sub = max(1, int(round(self.feature_subsample * d)))
        self.trees_ = []
        for t in range(int(self.tree_count)):
            rng = np.random.default_rng(derive_seed(self.seed, "tree", t))
            if self.bootstrap:
                sample = rng.integers(0, n, size=n)
            else:
                sample = np.arange(n)
            tree = _build_tree(
                Z[sample], y[sample], rng,
                max_depth=self.max_depth, min_leaf=int(self.min_leaf), n_sub=n_sub,
            )
            self.trees_.append(tree)
        return self

    def predict(self, X):
        if not hasattr(self, "trees_"):
            raise NotFittedError("fit before predicting")
        X = np.asarray(X, dtype=float)
        if len(X) == 0:
            return np.empty(0)
        if X.ndim != 2 or X.shape[1] != len(self.mu_):
            raise DimensionMismatch(f"model expects {len(self.mu_)} features, got {X.shape}")
        Z = (X - self.mu_) / self.sigma_
        preds = np.array([[_tree_predict(t, row) for row in Z] for t in self.trees_])
        return preds.mean(axis=0)


class MeanRegressor(BaseEstimator, RegressorMixin):
    """Constant predictor at the training-label mean (the basic baseline)."""

    def __init__(self):
        pass

    def fit(self, X, y):
        y = np.asarray(y, dtype=float)
        if len(y) == 0:
            raise EmptyInput("no training labels")
        X = np.asarray(X, dtype=float)
        width = X.shape[1] if X.ndim == 2 else 0
        self.mu_ = np.zeros(width)
        self.sigma_ = np.ones(width)
        self.mean_ = float(y.mean())
        return self

    def predict(self, X):
        if not hasattr(self, "mean_"):
            raise NotFittedError("fit before predicting")
        return np.full(len(np.asarray(X)), self.mean_)


_KIND_TO_CLASS = {
    "sgd_squared": SgdRegressor,
    "svr_linear": LinearSvrRegressor,
    "random_forest": ForestRegressor,
    "mean": MeanRegressor,
}


def make_regressor(spec: RegressorSpec):
    cls = _KIND_TO_CLASS[spec.kind]
    est = cls()
    valid = set(est.get_params())
    unknown = set(spec.hyper) - valid
    if unknown:
        raise InvalidSpec(f"{spec.kind} does not accept hyperparameters {sorted(unknown)}")
    est.set_params(**spec.hyper)
    if "seed" in valid:
        est.set_params(seed=spec.seed)
    return est


@dataclass
class TrainedModel:
    spec: RegressorSpec
    estimator: object
    feature_indices: tuple[int, ...]


def train(spec: RegressorSpec, X, y, feature_indices=None) -> TrainedModel:
    """Fit one regressor on an already-column-selected matrix."""
    X = np.asarray(X, dtype=float)
    est = make_regressor(spec).fit(X, y)
    if feature_indices is None:
        feature_indices = tuple(range(X.shape[1]))
    return TrainedModel(spec=spec, estimator=est, feature_indices=tuple(int(i) for i in feature_indices))


def predict(model: TrainedModel, X) -> np.ndarray:
    """Predictions of a trained model; X columns must match its feature list."""
    X = np.asarray(X, dtype=float)
    if len(X) == 0:
        return np.empty(0)
    if X.ndim != 2 or X.shape[1] != len(model.feature_indices):
        raise DimensionMismatch(
            f"model expects {len(model.feature_indices)} columns, got {X.shape}"
        )
    return model.estimator.predict(X)


def save_model(model: TrainedModel, path) -> None:
    est = model.estimator
    state = {
        "mu": est.mu_.tolist(),
        "sigma": est.sigma_.tolist(),
    }
    if isinstance(est, _GradientDescentBase):
        state.update(
            weights=est.weights_.tolist(),
            bias=est.bias_,
            y_mu=est.y_mu_,
            y_sigma=est.y_sigma_,
        )
    elif isinstance(est, ForestRegressor):
        state["trees"] = est.trees_
    elif isinstance(est, MeanRegressor):
        state["mean"] = est.mean_
    payload = {
        "spec": {"kind": model.spec.kind, "hyper": model.spec.hyper, "seed": model.spec.seed},
        "feature_indices": list(model.feature_indices),
        "state": state,
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")


def load_model(path) -> TrainedModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    spec = RegressorSpec(
        kind=payload["spec"]["kind"],
        hyper=dict(payload["spec"]["hyper"]),
        seed=int(payload["spec"]["seed"]),
    )
    est = make_regressor(spec)
    state = payload["state"]
    est.mu_ = np.asarray(state["mu"], dtype=float)
    est.sigma_ = np.asarray(state["sigma"], dtype=float)
    if isinstance(est, _GradientDescentBase):
        est.weights_ = np.asarray(state["weights"], dtype=float)
        est.bias_ = float(state["bias"])
        est.y_mu_ = float(state["y_mu"])
        est.y_sigma_ = float(state["y_sigma"])
    elif isinstance(est, ForestRegressor):
        est.trees_ = state["trees"]
    elif isinstance(est, MeanRegressor):
        est.mean_ = float(state["mean"])
    return TrainedModel(spec=spec, estimator=est,
                        feature_indices=tuple(payload["feature_indices"]))


def default_grid(seed: int = 0) -> list[RegressorSpec]:
    """The search family: SGD, linear SVR, and the eight forest sizes."""
    grid = [RegressorSpec("sgd_squared", seed=seed), RegressorSpec("svr_linear", seed=seed)]
    grid.extend(
        RegressorSpec("random_forest", hyper={"tree_count": t}, seed=seed)
        for t in FOREST_GRID_SIZES
    )
    return grid


@dataclass
class GridResult:
    best_spec: RegressorSpec
    best_k: int
    table: tuple[dict, ...]


def _grid_cell(spec, k, X, y, folds, global_seed):
    """Pooled RMSE of one (model, feature count) cell across all folds."""
    yhat = np.full(len(y), np.nan)
    for fold_no, (tr, te) in enumerate(folds):
        cell = (spec.label(), k, fold_no)
        Xo, yo = oversample(X[tr], y[tr], seed=derive_seed(global_seed, "grid", *cell, "balance"))
        cols = rank_and_truncate(Xo, yo, range(X.shape[1]), k)
        fitted = train(spec.with_seed(derive_seed(global_seed, "grid", *cell, "train")),
                       Xo[:, cols], yo)
        yhat[te] = predict(fitted, X[te][:, cols])
    return float(np.sqrt(np.mean((y - yhat) ** 2)))


def grid_search(grid, k_range, X, y, folds, global_seed: int = 0, jobs: int = 1) -> GridResult:
    """Exhaustive (model, k) search scored by pooled cross-validated RMSE.

    ``folds`` is a sequence of (train_indices, test_indices) pairs. Each cell
    runs the per-fold pipeline: oversample the training part, rank its
    features by F, truncate to k, train, and predict the held-out part.
    Ties break toward fewer features, then grid order. Results do not depend
    on ``jobs``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    k_range = [int(k) for k in k_range]
    folds = [(np.asarray(tr, dtype=int), np.asarray(te, dtype=int)) for tr, te in folds]
    for k in k_range:
        if k > X.shape[1]:
            raise KTooLarge(k, X.shape[1])
    cells = [(spec, k) for spec in grid for k in k_range]
    if jobs == 1:
        scores = [_grid_cell(spec, k, X, y, folds, global_seed) for spec, k in cells]
    else:
        scores = Parallel(n_jobs=jobs)(
            delayed(_grid_cell)(spec, k, X, y, folds, global_seed) for spec, k in cells
        )
    table = tuple(
        {"model": spec.label(), "k": k, "rmse": score}
        for (spec, k), score in zip(cells, scores)
    )
    best_pos = min(range(len(cells)), key=lambda i: (scores[i], cells[i][1], i))
    best_spec, best_k = cells[best_pos]
    return GridResult(best_spec=best_spec, best_k=best_k, table=table)
