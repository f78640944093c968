"""Fold allocation, weighted F1 and the cross-validation driver."""

import logging
from dataclasses import dataclass, field

import numpy as np

from .classifiers import N_CLASSES, fit_model, predict_labels
from .errors import DataError, FoldAllocationError
from .featurize import standardize_apply, standardize_fit
from .ingest import SEIZURE_TYPES, TYPE_INDEX

log = logging.getLogger(__name__)

MODES = ("seizure", "patient")


@dataclass(frozen=True)
class FoldAssignment:
    """``fold_of[i]`` is the fold of seizure ``i`` (manifest event index).

    ``order`` records the type processing order; for patient-wise folds
    ``patient_fold`` maps every patient to its fold.
    """

    k: int
    fold_of: np.ndarray
    mode: str
    seed: int
    order: tuple = ()
    patient_fold: dict = field(default_factory=dict)

    def members(self, fold):
        return np.flatnonzero(self.fold_of == fold)

    def sizes(self):
        return np.bincount(self.fold_of, minlength=self.k)


def _by_type(events):
    groups = {}
    for i, ev in enumerate(events):
        groups.setdefault(ev.type, []).append(i)
    return groups


def seizure_wise_folds(events, k=5, seed=0):
    """Shuffle each type's seizures and deal them round-robin into ``k`` folds."""
    events = list(events)
    rng = np.random.default_rng(seed)
    fold_of = np.full(len(events), -1, dtype=np.int64)
    groups = _by_type(events)
    order = [t for t in SEIZURE_TYPES if t in groups]
    for code in order:
        ids = np.array(groups[code])
        if ids.size < k:
            raise FoldAllocationError(f"type {code} has {ids.size} seizures, fewer than k={k}")
        fold_of[rng.permutation(ids)] = np.arange(ids.size) % k
    return FoldAssignment(k=k, fold_of=fold_of, mode="seizure", seed=seed, order=tuple(order))


def patient_wise_folds(events, k=3, seed=0):
    """Allocate patients to folds, rarest types first.

    Types are visited in ascending order of distinct patient count (ties in
    type order).  Each type's not-yet-allocated patients are shuffled and
    dealt round-robin; a patient keeps the fold of the first type that
    allocated them.
    """
    events = list(events)
    rng = np.random.default_rng(seed)
    patients = {}
    for ev in events:
        patients.setdefault(ev.type, set()).add(ev.patient_id)
    order = sorted(patients, key=lambda t: (len(patients[t]), TYPE_INDEX[t]))
    allocated = {}
    for code in order:
        fresh = sorted(p for p in patients[code] if p not in allocated)
        if len(fresh) < k:
            raise FoldAllocationError(
                f"type {code} has {len(fresh)} unallocated patients, fewer than k={k}"
            )
        for j, idx in enumerate(rng.permutation(len(fresh))):
            allocated[fresh[idx]] = j % k
    fold_of = np.array([allocated[ev.patient_id] for ev in events], dtype=np.int64)
    return FoldAssignment(k=k, fold_of=fold_of, mode="patient", seed=seed, order=tuple(order),
                          patient_fold=allocated)


def make_folds(events, mode, k=None, seed=0):
    if mode == "seizure":
        return seizure_wise_folds(events, k or 5, seed)
    if mode == "patient":
        return patient_wise_folds(events, k or 3, seed)
    raise ValueError(f"unknown CV mode {mode!r}")


def fold_balance_report(events, k, mode, seeds):
    """Seizures per fold for each seed, with the max pairwise deviation."""
    seeds = list(seeds)
    if len(seeds) < 2:
        raise ValueError("need at least two seeds")
    counts = []
    deviation = []
    for s in seeds:
        sizes = make_folds(events, mode, k, s).sizes()
        counts.append(sizes.tolist())
        deviation.append(int(sizes.max() - sizes.min()))
    return {"mode": mode, "k": k, "seeds": seeds, "counts": counts,
            "deviation": deviation, "max_deviation": max(deviation)}


# --------------------------------------------------------------------------
# metrics


def confusion_matrix(y_true, y_pred, n_classes=N_CLASSES):
    """Counts with rows = true class, columns = predicted class."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred differ in length")
    flat = np.bincount(y_true * n_classes + y_pred, minlength=n_classes * n_classes)
    return flat.reshape(n_classes, n_classes)


def per_class_metrics(cm):
    """Precision, recall, F1 and support per class; 0 where undefined."""
    cm = np.asarray(cm, dtype=np.float64)
    tp = np.diag(cm)
    support = cm.sum(axis=1)
    predicted = cm.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(predicted > 0, tp / predicted, 0.0)
        recall = np.where(support > 0, tp / support, 0.0)
        denom = precision + recall
        f1 = np.where(denom > 0, 2 * precision * recall / denom, 0.0)
    return precision, recall, f1, support


def weighted_f1(cm):
    """Support-weighted mean of per-class F1."""
    cm = np.asarray(cm)
    total = cm.sum()
    if cm.size == 0 or total <= 0:
        raise ValueError("weighted F1 of an empty confusion matrix")
    _, _, f1, support = per_class_metrics(cm)
    return float(np.dot(support, f1) / support.sum())


def weighted_f1_score(y_true, y_pred):
    return weighted_f1(confusion_matrix(y_true, y_pred))


# --------------------------------------------------------------------------
# cross-validation


@dataclass
class FoldResult:
    fold: int
    n_train: int
    n_test: int
    weighted_f1: float
    confusion: np.ndarray
    seizure_weighted_f1: float
    seizure_confusion: np.ndarray
    scaler: object = None

    def to_dict(self):
        return {
            "fold": self.fold, "n_train": self.n_train, "n_test": self.n_test,
            "weighted_f1": self.weighted_f1, "confusion": self.confusion.tolist(),
            "seizure_weighted_f1": self.seizure_weighted_f1,
            "seizure_confusion": self.seizure_confusion.tolist(),
        }


@dataclass
class MetricsReport:
    kind: str
    params: dict
    mode: str
    k: int
    seed: int
    folds: list
    mean_weighted_f1: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    spec: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "classifier": self.kind,
            "params": self.params,
            "cv": {"mode": self.mode, "k": self.k, "seed": self.seed},
            "mean_weighted_f1": self.mean_weighted_f1,
            "fold_weighted_f1": [f.weighted_f1 for f in self.folds],
            "per_class": {
                code: {"precision": float(self.precision[i]), "recall": float(self.recall[i]),
                       "f1": float(self.f1[i]), "support": int(self.support[i])}
                for i, code in enumerate(SEIZURE_TYPES)
            },
            "folds": [f.to_dict() for f in self.folds],
            "spec": self.spec,
        }


def _seizure_votes(seizure_ids, y_true, y_pred):
    ids = np.unique(seizure_ids)
    truth = np.empty(ids.size, dtype=np.int64)
    vote = np.empty(ids.size, dtype=np.int64)
    for j, sid in enumerate(ids):
        rows = seizure_ids == sid
        truth[j] = y_true[rows][0]
        vote[j] = int(np.argmax(np.bincount(y_pred[rows], minlength=N_CLASSES)))
    return truth, vote


def split_fold(fm, folds, fold):
    """Boolean test mask over the feature rows for ``fold``."""
    return folds.fold_of[fm.seizure_ids] == fold


def evaluate_split(fm, kind, params, test_mask, seed=0, standardize=True, labels=None):
    """Fit on rows outside ``test_mask``, predict rows inside it.

    Returns ``(y_true, y_pred, scaler)``.
    """
    y = fm.labels if labels is None else labels
    train_mask = ~test_mask
    if not test_mask.any():
        raise DataError("test split has zero windows")
    if not train_mask.any():
        raise DataError("training split has zero windows")
    Xtr = fm.X[train_mask]
    Xte = fm.X[test_mask]
    scaler = None
    if standardize:
        scaler = standardize_fit(Xtr)
        Xtr = standardize_apply(scaler, Xtr)
        Xte = standardize_apply(scaler, Xte)
    ytr = y[train_mask]
    missing = set(np.unique(y[test_mask])) - set(np.unique(ytr))
    if missing:
        log.warning("classes %s absent from the training split",
                    [SEIZURE_TYPES[c] for c in sorted(missing)])
    model = fit_model(kind, params, Xtr, ytr, seed=seed)
    return y[test_mask], predict_labels(model, Xte), scaler


def run_cv(fm, kind, params, folds, seed=0, standardize=True, labels=None, spec=None):
    """Window-level k-fold cross-validation.

    Every fold trains on the windows of seizures outside the fold (scaling
    fitted on those rows only) and scores the windows inside it.  The mean
    is the unweighted average of per-fold weighted F1.
    """
    y = fm.labels if labels is None else np.asarray(labels)
    results = []
    pooled = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    for f in range(folds.k):
        test = split_fold(fm, folds, f)
        if not test.any():
            raise DataError(f"fold {f} has zero windows")
        y_true, y_pred, scaler = evaluate_split(fm, kind, params, test, seed=seed,
                                                standardize=standardize, labels=y)
        cm = confusion_matrix(y_true, y_pred)
        pooled += cm
        st, sp = _seizure_votes(fm.seizure_ids[test], y_true, y_pred)
        scm = confusion_matrix(st, sp)
        results.append(FoldResult(
            fold=f, n_train=int((~test).sum()), n_test=int(test.sum()),
            weighted_f1=weighted_f1(cm), confusion=cm,
            seizure_weighted_f1=weighted_f1(scm), seizure_confusion=scm, scaler=scaler,
        ))
    precision, recall, f1, support = per_class_metrics(pooled)
    return MetricsReport(
        kind=kind, params=dict(params or {}), mode=folds.mode, k=folds.k, seed=folds.seed,
        folds=results, mean_weighted_f1=float(np.mean([r.weighted_f1 for r in results])),
        precision=precision, recall=recall, f1=f1, support=support.astype(np.int64),
        spec=dict(spec or {}),
    )


def permuted_labels(fm, rng):
    """Window labels after permuting the labels of whole seizures."""
    sids = np.unique(fm.seizure_ids)
    first = np.array([np.flatnonzero(fm.seizure_ids == s)[0] for s in sids])
    shuffled = rng.permutation(fm.labels[first])
    lookup = dict(zip(sids.tolist(), shuffled.tolist()))
    return np.array([lookup[s] for s in fm.seizure_ids.tolist()], dtype=np.int64)


def permutation_scores(fm, kind, params, folds, n_shuffles=20, seed=0, standardize=True):
    """Mean weighted F1 of ``run_cv`` under ``n_shuffles`` seizure-level label shuffles."""
    rng = np.random.default_rng(seed)
    scores = []
    for _ in range(n_shuffles):
        labels = permuted_labels(fm, rng)
        rep = run_cv(fm, kind, params, folds, seed=seed, standardize=standardize, labels=labels)
        scores.append(rep.mean_weighted_f1)
    return np.array(scores)
