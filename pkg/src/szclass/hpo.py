"""Preprocessing grid sweep and seeded random search over classifier settings."""

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import SearchFailedError
from .evaluation import evaluate_split, make_folds, split_fold, weighted_f1_score
from .featurize import FeatureSpec, WindowSpec, featurize_clips, load_clips
from .ingest import DEFAULT_FS

log = logging.getLogger(__name__)

SAMPLER = "random-v1"
F_MAX_GRID = (12, 24, 48, 64, 96)
WINDOW_GRID = (1, 2, 4, 8, 16)
OVERLAP_RATIOS = (0.5, 0.75)
SWEEP_COLUMNS = ("method", "classifier", "f_max", "W_l", "O", "weighted_f1")


@dataclass(frozen=True)
class IntRange:
    low: int
    high: int

    def __post_init__(self):
        if self.high < self.low:
            raise ValueError("empty integer range")

    def sample(self, rng):
        return int(rng.integers(self.low, self.high + 1))


@dataclass(frozen=True)
class RealRange:
    low: float
    high: float
    log: bool = False

    def __post_init__(self):
        if self.high < self.low:
            raise ValueError("empty real range")
        if self.log and self.low <= 0:
            raise ValueError("log-scale bounds must be positive")

    def sample(self, rng):
        if self.log:
            return float(math.exp(rng.uniform(math.log(self.low), math.log(self.high))))
        return float(rng.uniform(self.low, self.high))


@dataclass(frozen=True)
class Categorical:
    values: tuple

    def __post_init__(self):
        if not self.values:
            raise ValueError("empty categorical set")

    def sample(self, rng):
        return self.values[int(rng.integers(len(self.values)))]


@dataclass(frozen=True)
class SearchSpace:
    dims: dict

    def sample(self, seed, index):
        """Config of trial ``index``; depends only on (space, seed, index)."""
        rng = np.random.default_rng((seed, index))
        return {name: self.dims[name].sample(rng) for name in sorted(self.dims)}


def default_spaces():
    return {
        "knn": SearchSpace({
            "k": IntRange(1, 30),
            "vote": Categorical(("uniform", "inverse-distance")),
        }),
        "sgd": SearchSpace({
            "alpha": RealRange(1e-7, 1e-1, log=True),
            "lr": RealRange(1e-4, 1.0, log=True),
            "schedule": Categorical(("constant", "inv-scaling")),
            "epochs": IntRange(5, 50),
        }),
        "gbt": SearchSpace({
            "rounds": IntRange(20, 300),
            "depth": IntRange(2, 8),
            "learning_rate": RealRange(0.01, 0.5, log=True),
            "min_leaf": IntRange(1, 20),
        }),
    }


@dataclass
class Trial:
    index: int
    config: dict
    objective: float = float("nan")
    status: str = "ok"
    reason: str = ""
    duration: float = 0.0

    def to_dict(self):
        out = {"index": self.index, "config": self.config,
               "objective": self.objective if self.status == "ok" else None,
               "status": self.status, "duration": self.duration}
        if self.reason:
            out["reason"] = self.reason
        return out


@dataclass
class SearchResult:
    trials: list
    best: Trial
    budget: int
    seed: int
    sampler: str = SAMPLER

    def to_dict(self):
        return {"sampler": self.sampler, "budget": self.budget, "seed": self.seed,
                "best": self.best.to_dict(), "trials": [t.to_dict() for t in self.trials]}


def random_search(space, objective, budget=100, seed=0, workers=1):
    """Evaluate ``budget`` independently sampled configs and keep the best.

    Configs are generated before any evaluation, so worker count never
    changes the result.  A trial whose objective raises is recorded as
    failed and still counts against the budget.  Ties go to the earliest
    trial.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    configs = [space.sample(seed, i) for i in range(budget)]

    def run(i):
        t0 = time.perf_counter()
        try:
            value = float(objective(configs[i]))
            if not math.isfinite(value):
                raise ValueError(f"non-finite objective {value}")
            return Trial(i, configs[i], value, duration=time.perf_counter() - t0)
        except Exception as exc:  # noqa: BLE001 - any objective failure is a failed trial
            return Trial(i, configs[i], status="failed", reason=f"{type(exc).__name__}: {exc}",
                         duration=time.perf_counter() - t0)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            trials = list(pool.map(run, range(budget)))
    else:
        trials = [run(i) for i in range(budget)]
    ok = [t for t in trials if t.status == "ok"]
    if not ok:
        raise SearchFailedError(f"all {budget} trials failed; first: {trials[0].reason}")
    best = ok[0]
    for t in ok[1:]:
        if t.objective > best.objective:
            best = t
    return SearchResult(trials=trials, best=best, budget=budget, seed=seed)


def trial_log_lines(result):
    return "".join(json.dumps(t.to_dict(), sort_keys=True) + "\n" for t in result.trials)


# --------------------------------------------------------------------------
# preprocessing grid


def preproc_grid(f_max=F_MAX_GRID, windows=WINDOW_GRID, ratios=OVERLAP_RATIOS):
    """``(f_max, W_l, O)`` triples in deterministic order, f_max outermost."""
    return [(f, w, r * w) for f in f_max for w in windows for r in ratios]


@dataclass(frozen=True)
class SweepRow:
    method: int
    classifier: str
    f_max: int
    window: float
    overlap: float
    weighted_f1: float
    best_config: dict = field(default_factory=dict, compare=False)


def sweep_preproc_grid(manifest, kind, montage, method=1, fold=0, budget=100, cv_mode="seizure",
                       k=None, seed=0, fs=DEFAULT_FS, standardize=True, grid=None, clips=None,
                       space=None, workers=1):
    """Best single-split weighted F1 for every grid point.

    Every point is featurized from the same loaded clips, split on fold
    ``fold`` of the requested CV mode, and scored by a random search of
    ``budget`` trials.
    """
    grid = preproc_grid() if grid is None else grid
    space = space or default_spaces()[kind]
    if clips is None:
        clips, skipped = load_clips(manifest, montage, fs=fs, workers=workers)
    else:
        skipped = []
    folds = make_folds(manifest.events, cv_mode, k, seed)
    rows = []
    for f_max, wl, ov in grid:
        fm = featurize_clips(manifest, clips, montage, WindowSpec(wl, ov),
                             FeatureSpec(method, f_max), skipped)
        test = split_fold(fm, folds, fold)

        def objective(params, fm=fm, test=test):
            y_true, y_pred, _ = evaluate_split(fm, kind, params, test, seed=seed,
                                               standardize=standardize)
            return weighted_f1_score(y_true, y_pred)

        try:
            res = random_search(space, objective, budget=budget, seed=seed, workers=workers)
        except SearchFailedError as exc:
            # keep the table complete; the point ranks last
            log.warning("sweep method=%d %s f_max=%s W_l=%s O=%s failed: %s",
                        method, kind, f_max, wl, ov, exc)
            rows.append(SweepRow(method, kind, f_max, wl, ov, float("nan")))
            continue
        log.info("sweep method=%d %s f_max=%s W_l=%s O=%s -> %.4f",
                 method, kind, f_max, wl, ov, res.best.objective)
        rows.append(SweepRow(method, kind, f_max, wl, ov, res.best.objective, res.best.config))
    return rows


def select_top_configs(rows, n=4):
    """Top ``n`` ``(f_max, W_l, O)`` by score; ties keep table order and
    failed (NaN) points rank last."""
    rows = list(rows)
    if not rows:
        raise ValueError("empty sweep table")
    if n > len(rows):
        raise ValueError(f"asked for {n} configs from {len(rows)} rows")

    def key(i):
        score = rows[i].weighted_f1
        return (math.isnan(score), -score if not math.isnan(score) else 0.0, i)

    ranked = sorted(range(len(rows)), key=key)
    return [(rows[i].f_max, rows[i].window, rows[i].overlap) for i in ranked[:n]]


def _num(x):
    return f"{x:.10g}"


def sweep_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for r in rows:
        writer.writerow([r.method, r.classifier, r.f_max, _num(r.window), _num(r.overlap),
                         repr(float(r.weighted_f1))])
    return buf.getvalue()


def read_sweep_csv(text):
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != SWEEP_COLUMNS:
        raise ValueError(f"sweep CSV header must be {','.join(SWEEP_COLUMNS)}")
    return [SweepRow(int(r["method"]), r["classifier"], int(r["f_max"]), float(r["W_l"]),
                     float(r["O"]), float(r["weighted_f1"])) for r in reader]
