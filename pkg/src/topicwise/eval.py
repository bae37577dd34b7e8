"""Metrics, fold planning, and the three test protocols.

The cross-validation protocol mirrors the intended experimental discipline:
oversampling and the model-dependent ranking step run per fold on training
data only, while the model-independent subset search runs once on the whole
pool it is given (a knowingly optimistic shortcut, flagged in every report).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from joblib import Parallel, delayed

from .corpus import Dataset
from .errors import (
    DegenerateInput,
    EmptyInput,
    LengthMismatch,
    OverlapError,
    TooFewSamples,
)
from .features import VectorTable, WordCategoryDictionary, context_unaware_table
from .model import MeanRegressor, RegressorSpec, oversample, predict, train
from .select import cfs_search, pearson, rank_and_truncate
from .util import derive_seed

DEPRESSION_THRESHOLD = 10.0


def _paired(y, yhat):
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.shape != yhat.shape or y.ndim != 1:
        raise LengthMismatch(f"shapes {y.shape} and {yhat.shape}")
    return y, yhat


def rmse(y, yhat) -> float:
    y, yhat = _paired(y, yhat)
    if len(y) == 0:
        raise EmptyInput("no predictions to score")
    return float(np.sqrt(np.mean((y - yhat) ** 2)))


def mae(y, yhat) -> float:
    y, yhat = _paired(y, yhat)
    if len(y) == 0:
        raise EmptyInput("no predictions to score")
    return float(np.mean(np.abs(y - yhat)))


def pearson_cc(y, yhat) -> float:
    """Correlation between truth and prediction; 0.0 (with a warning) when
    either side is constant and the coefficient is undefined."""
    y, yhat = _paired(y, yhat)
    try:
        return pearson(y, yhat)
    except DegenerateInput:
        warnings.warn("constant predictions or labels: correlation undefined, reporting 0.0")
        return 0.0


def f1_at_threshold(y, yhat, threshold: float = DEPRESSION_THRESHOLD) -> float:
    """F1 of the binarized (score >= threshold) depression decision."""
    y, yhat = _paired(y, yhat)
    if len(y) == 0:
        raise EmptyInput("no predictions to score")
    pos = y >= threshold
    pred = yhat >= threshold
    tp = float(np.sum(pos & pred))
    denom = 2 * tp + float(np.sum(~pos & pred)) + float(np.sum(pos & ~pred))
    if denom == 0.0:
        warnings.warn("no true or predicted positives: F1 undefined, reporting 0.0")
        return 0.0
    return 2 * tp / denom


def _degenerate_cc(y, yhat) -> bool:
    return np.ptp(y) == 0.0 or np.ptp(yhat) == 0.0


def _metrics_row(y, yhat) -> dict:
    cc_flag = _degenerate_cc(y, yhat)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return {
            "rmse": rmse(y, yhat),
            "mae": mae(y, yhat),
            "cc": 0.0 if cc_flag else pearson(y, yhat),
            "cc_degenerate": cc_flag,
            "f1": f1_at_threshold(y, yhat),
            "n": int(len(y)),
        }


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple
    labels: np.ndarray
    seed: int

    def splits(self):
        """Yield (train_indices, test_indices) per fold."""
        all_idx = np.sort(np.concatenate(self.folds))
        for held_out in self.folds:
            held_out = np.asarray(held_out)
            yield np.setdiff1d(all_idx, held_out), held_out


def stratified_folds(scores, k: int = 10, seed: int = 0,
                     threshold: float = DEPRESSION_THRESHOLD) -> FoldPlan:
    """K folds stratified on the binary depressed label.

    Within each class the indices are shuffled with the seeded generator and
    dealt round-robin, so per-fold class counts differ by at most one.
    """
    scores = np.asarray(scores, dtype=float)
    n = len(scores)
    if n < k:
        raise TooFewSamples(f"{n} samples cannot fill {k} folds")
    labels = (scores >= threshold).astype(int)
    rng = np.random.default_rng(seed)
    assignment = np.empty(n, dtype=int)
    counter = 0
    for cls in (1, 0):
        idx = np.flatnonzero(labels == cls)
        rng.shuffle(idx)
        for i in idx:
            assignment[i] = counter % k
            counter += 1
    folds = tuple(np.flatnonzero(assignment == f) for f in range(k))
    return FoldPlan(folds=folds, labels=labels, seed=seed)


@dataclass
class EvalConfig:
    model: RegressorSpec
    selection_mode: str = "two_step"
    top_k: int | None = None
    patience: int = 5
    folds: int = 10
    seed: int = 0
    clamp: bool = False
    jobs: int = 1

    def echo(self) -> dict:
        out = asdict(self)
        out["model"] = {"kind": self.model.kind, "hyper": dict(self.model.hyper),
                        "seed": self.model.seed}
        return out


@dataclass
class EvalReport:
    protocol: str
    rmse: float
    mae: float
    cc: float
    f1: float
    cc_degenerate: bool
    n: int
    per_fold: tuple = ()
    config: dict = field(default_factory=dict)
    notes: tuple = ()

    def to_json(self) -> str:
        payload = asdict(self)
        payload["per_fold"] = list(self.per_fold)
        payload["notes"] = list(self.notes)
        return json.dumps(payload, indent=2, sort_keys=True)

    def row(self) -> dict:
        return {"rmse": self.rmse, "mae": self.mae, "cc": self.cc, "f1": self.f1}


def format_report_table(entries) -> str:
    """Aligned text table, one row per (label, report) pair."""
    headers = ["method", "protocol", "RMSE", "MAE", "CC", "F1", "n"]
    rows = []
    for label, report in entries:
        cc = f"{report.cc:.2f}" + ("*" if report.cc_degenerate else "")
        rows.append(
            [label, report.protocol, f"{report.rmse:.2f}", f"{report.mae:.2f}",
             cc, f"{report.f1:.2f}", str(report.n)]
        )
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
    for r in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)))
    lines.append("(* = correlation undefined for constant predictions, reported as 0)")
    return "\n".join(lines)


def _fit_predict_once(X, y, tr, te, candidates, config: EvalConfig, tag) -> np.ndarray:
    """One train/predict pass of the shared pipeline on a given split."""
    Xo, yo = oversample(X[tr], y[tr], seed=derive_seed(config.seed, *tag, "balance"))
    k = config.top_k if config.top_k is not None else len(candidates)
    cols = rank_and_truncate(Xo, yo, candidates, k)
    spec = config.model.with_seed(derive_seed(config.seed, *tag, "train"))
    fitted = train(spec, Xo[:, cols], yo)
    yhat = predict(fitted, X[te][:, cols])
    if config.clamp:
        yhat = np.clip(yhat, 0.0, 24.0)
    return yhat


def _candidate_pool(X, y, config: EvalConfig):
    notes = []
    if config.selection_mode == "two_step":
        pool = cfs_search(X, y, patience=config.patience)
        notes.append(
            "subset search ran once on the full pool; cross-validated scores "
            "are optimistic for that step"
        )
    else:
        pool = list(range(X.shape[1]))
        notes.append("step2_only selection: no subset search, F-ranking over all features")
    return pool, notes


def run_cv(table: VectorTable, config: EvalConfig) -> EvalReport:
    """Stratified k-fold protocol over one vector table (the train+dev pool)."""
    X, y = table.X, table.y
    pool, notes = _candidate_pool(X, y, config)
    plan = stratified_folds(y, k=config.folds, seed=config.seed)
    splits = list(plan.splits())

    def fold_task(fold_no, tr, te):
        return _fit_predict_once(X, y, tr, te, pool, config, ("cv", fold_no))

    if config.jobs == 1:
        fold_preds = [fold_task(i, tr, te) for i, (tr, te) in enumerate(splits)]
    else:
        fold_preds = Parallel(n_jobs=config.jobs)(
            delayed(fold_task)(i, tr, te) for i, (tr, te) in enumerate(splits)
        )
    yhat = np.full(len(y), np.nan)
    per_fold = []
    for fold_no, ((_, te), preds) in enumerate(zip(splits, fold_preds)):
        yhat[te] = preds
        per_fold.append({"fold": fold_no, **_metrics_row(y[te], preds)})
    pooled = _metrics_row(y, yhat)
    return EvalReport(
        protocol="cv",
        rmse=pooled["rmse"], mae=pooled["mae"], cc=pooled["cc"], f1=pooled["f1"],
        cc_degenerate=pooled["cc_degenerate"], n=pooled["n"],
        per_fold=tuple(per_fold),
        config={**config.echo(), "cfs_subset_size": len(pool)},
        notes=tuple(notes),
    )


def run_holdout(train_table: VectorTable, test_table: VectorTable,
                config: EvalConfig, protocol: str = "dev") -> EvalReport:
    """Fit the full pipeline on one table, evaluate once on another."""
    train_ids = set(train_table.session_ids)
    test_ids = set(test_table.session_ids)
    notes = []
    if train_ids == test_ids:
        notes.append("sanity mode: holdout set equals the training set")
    elif train_ids & test_ids:
        raise OverlapError(
            f"{len(train_ids & test_ids)} session(s) appear in both train and holdout"
        )
    X, y = train_table.X, train_table.y
    pool, pool_notes = _candidate_pool(X, y, config)
    notes.extend(pool_notes)
    n_train = len(y)
    X_all = np.vstack([X, test_table.X])
    y_all = np.concatenate([y, test_table.y])
    tr = np.arange(n_train)
    te = np.arange(n_train, len(y_all))
    yhat = _fit_predict_once(X_all, y_all, tr, te, pool, config, ("holdout", protocol))
    pooled = _metrics_row(test_table.y, yhat)
    return EvalReport(
        protocol=protocol,
        rmse=pooled["rmse"], mae=pooled["mae"], cc=pooled["cc"], f1=pooled["f1"],
        cc_degenerate=pooled["cc_degenerate"], n=pooled["n"],
        config={**config.echo(), "cfs_subset_size": len(pool)},
        notes=tuple(notes),
    )


def baseline_mean(y_train):
    """Constant predictor at the training mean, fitted and ready to use."""
    y_train = np.asarray(y_train, dtype=float)
    if len(y_train) == 0:
        raise EmptyInput("no training labels")
    return MeanRegressor().fit(np.empty((len(y_train), 0)), y_train)


def baseline_context_unaware(dataset: Dataset, word_dict: WordCategoryDictionary,
                             config: EvalConfig) -> EvalReport:
    """CV protocol on whole-interview (391-dim) vectors, same pipeline."""
    table = context_unaware_table(dataset, word_dict)
    report = run_cv(table, config)
    report.notes = report.notes + ("context-unaware vectors (no topic slots)",)
    return report
