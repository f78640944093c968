"""Multi-class classifiers written against plain numpy.

All models predict integer class ids in ``range(N_CLASSES)``.  They are
immutable once fitted; ``fit_model``/``predict_labels`` give a uniform
facade over the three kinds and ``model_to_json``/``model_from_json``
persist them.
"""

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from ._treekernels import best_split, partition
from .errors import DimensionError, DivergenceError

log = logging.getLogger(__name__)

N_CLASSES = 7
KINDS = ("knn", "sgd", "gbt")
VOTES = ("uniform", "inverse-distance")
SCHEDULES = ("constant", "inv-scaling")


def _check_xy(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2:
        raise DimensionError("X must be 2-D")
    if X.shape[0] == 0:
        raise ValueError("empty training set")
    if y.shape != (X.shape[0],):
        raise DimensionError(f"y has {y.size} labels for {X.shape[0]} rows")
    if y.min() < 0 or y.max() >= N_CLASSES:
        raise ValueError(f"class ids must lie in [0, {N_CLASSES})")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite values")
    return X, y


def _check_query(model, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1 and X.size == 0:
        X = X.reshape(0, model.n_features)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DimensionError(
            f"model expects {model.n_features} features, got shape {X.shape}"
        )
    return X


def softmax(z):
    z = np.asarray(z, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _one_hot(y):
    out = np.zeros((y.size, N_CLASSES))
    out[np.arange(y.size), y] = 1.0
    return out


# --------------------------------------------------------------------------
# k-nearest neighbors


@dataclass(frozen=True)
class KnnModel:
    X: np.ndarray
    y: np.ndarray
    k: int
    vote: str = "uniform"

    @property
    def n_features(self):
        return self.X.shape[1]


def knn_fit(X, y, k=5, vote="uniform"):
    X, y = _check_xy(X, y)
    k = int(k)
    if not 1 <= k <= X.shape[0]:
        raise ValueError(f"k={k} must lie in [1, {X.shape[0]}]")
    if vote not in VOTES:
        raise ValueError(f"vote must be one of {VOTES}")
    return KnnModel(X=X.copy(), y=y.copy(), k=k, vote=vote)


def _neighbors(d2_row, k):
    """Indices of the k nearest rows, ordered by (distance, index)."""
    if k < d2_row.size:
        kth = np.partition(d2_row, k - 1)[k - 1]
        cand = np.flatnonzero(d2_row <= kth)
    else:
        cand = np.arange(d2_row.size)
    order = np.lexsort((cand, d2_row[cand]))
    return cand[order[:k]]


def _vote(labels, dist, mode):
    if mode == "uniform":
        weights = np.ones_like(dist)
    else:
        zero = dist == 0.0
        weights = zero.astype(float) if zero.any() else 1.0 / dist
    score = np.bincount(labels, weights=weights, minlength=N_CLASSES)
    tied = np.flatnonzero(score == score.max())
    if tied.size == 1:
        return int(tied[0])
    # nearest neighbour among tied classes, then lowest class id
    nearest = [dist[labels == c].min() for c in tied]
    return int(tied[int(np.argmin(nearest))])


def knn_predict(model, X, chunk=512):
    X = _check_query(model, X)
    out = np.empty(X.shape[0], dtype=np.int64)
    train_sq = np.einsum("ij,ij->i", model.X, model.X)
    for s in range(0, X.shape[0], chunk):
        q = X[s:s + chunk]
        d2 = np.einsum("ij,ij->i", q, q)[:, None] - 2.0 * q @ model.X.T + train_sq[None, :]
        np.maximum(d2, 0.0, out=d2)
        for r in range(q.shape[0]):
            nb = _neighbors(d2[r], model.k)
            out[s + r] = _vote(model.y[nb], np.sqrt(d2[r, nb]), model.vote)
    return out


# --------------------------------------------------------------------------
# multinomial logistic regression trained by per-sample SGD


@dataclass(frozen=True)
class SgdConfig:
    alpha: float = 1e-4
    lr: float = 0.01
    schedule: str = "inv-scaling"
    epochs: int = 10

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}")


@dataclass(frozen=True)
class LinearModel:
    W: np.ndarray
    b: np.ndarray
    config: SgdConfig
    seed: int = 0
    loss_history: tuple = ()

    @property
    def n_features(self):
        return self.W.shape[1]


def sgd_objective(W, b, X, y, alpha):
    """Mean cross-entropy plus ``alpha/2 * ||W||^2`` and its gradient.

    Returns ``(loss, dW, db)``; the bias is not regularized.
    """
    X = np.asarray(X, dtype=np.float64)
    p = softmax(X @ W.T + b)
    n = X.shape[0]
    logp = np.log(np.maximum(p[np.arange(n), y], 1e-300))
    loss = -logp.mean() + 0.5 * alpha * np.sum(W * W)
    resid = (p - _one_hot(y)) / n
    return loss, resid.T @ X + alpha * W, resid.sum(axis=0)


def sgd_fit(X, y, config=None, seed=0):
    """Per-sample SGD over seeded shuffles of the training rows.

    The L2 term is applied as an implicit step, ``W <- W / (1 + lr*alpha)``,
    which stays stable for any ``alpha``.
    """
    X, y = _check_xy(X, y)
    config = config or SgdConfig()
    rng = np.random.default_rng(seed)
    n, d = X.shape
    W = np.zeros((N_CLASSES, d))
    b = np.zeros(N_CLASSES)
    t = 0
    history = []
    for epoch in range(config.epochs):
        with np.errstate(over="ignore", invalid="ignore"):
            _sgd_epoch(X, y, W, b, config, rng.permutation(n), t)
            loss = sgd_objective(W, b, X, y, config.alpha)[0]
        t += n
        if not (np.isfinite(loss) and np.all(np.isfinite(W))):
            raise DivergenceError(epoch)
        history.append(float(loss))
    return LinearModel(W=W, b=b, config=config, seed=seed, loss_history=tuple(history))


def _sgd_epoch(X, y, W, b, config, order, t):
    """One pass over ``order``; updates ``W`` and ``b`` in place."""
    eye = np.eye(N_CLASSES)
    for i in order:
        if config.schedule == "constant":
            lr = config.lr
        else:
            lr = config.lr / (1.0 + config.lr * config.alpha * t)
        x = X[i]
        z = W @ x + b
        z -= z.max()
        e = np.exp(z)
        g = e / e.sum() - eye[y[i]]
        W -= lr * np.outer(g, x)
        if config.alpha:
            W /= 1.0 + lr * config.alpha
        b -= lr * g
        t += 1


def sgd_predict_proba(model, X):
    X = _check_query(model, X)
    return softmax(X @ model.W.T + model.b)


def sgd_predict(model, X):
    X = _check_query(model, X)
    return np.argmax(X @ model.W.T + model.b, axis=1)


# --------------------------------------------------------------------------
# gradient-boosted regression trees, softmax objective


@dataclass(frozen=True)
class GbtConfig:
    rounds: int = 100
    depth: int = 3
    learning_rate: float = 0.1
    min_leaf: int = 1
    algorithm: str = "gbt-exact"

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.depth < 0:
            raise ValueError("depth must be >= 0")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")


@dataclass(frozen=True)
class Tree:
    """Flat binary tree; ``feature[i] == -1`` marks a leaf.  Rows with
    ``x[feature] <= threshold`` go left."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X):
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return self.value[node]
            rows = np.flatnonzero(inner)
            n = node[rows]
            go_left = X[rows, f[rows]] <= self.threshold[n]
            node[rows] = np.where(go_left, self.left[n], self.right[n])


@dataclass(frozen=True)
class GbtModel:
    prior: np.ndarray
    trees: tuple
    config: GbtConfig
    n_features: int
    seed: int = 0
    loss_history: tuple = field(default=())

    def decision_function(self, X):
        X = _check_query(self, X)
        F = np.tile(self.prior, (X.shape[0], 1))
        for round_trees in self.trees:
            for c, tree in enumerate(round_trees):
                F[:, c] += self.config.learning_rate * tree.predict(X)
        return F


def _fit_tree(XT, g, S_root, depth, min_leaf):
    """Grow one regression tree on residuals ``g`` by exact greedy splits.

    Leaves hold the mean residual of their rows.
    """
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    root = new_node()
    stack = [(root, S_root, 0)]
    go = np.zeros(XT.shape[1], dtype=np.bool_)
    while stack:
        node, S, level = stack.pop()
        rows = S[0]
        m = rows.size
        node_g = g[rows]
        value[node] = float(node_g.mean())
        if level >= depth or m < 2 * min_leaf:
            continue
        gain, f, pos = best_split(XT, g, S, min_leaf)
        scale = node_g.sum() ** 2 / m
        if f < 0 or not gain > 1e-12 * max(1.0, scale):
            continue
        lo = XT[f, S[f, pos]]
        hi = XT[f, S[f, pos + 1]]
        thr = 0.5 * (lo + hi)
        if not lo <= thr < hi:
            thr = lo
        go[rows] = XT[f, rows] <= thr
        S_left, S_right = partition(S, go)
        feature[node] = int(f)
        threshold[node] = float(thr)
        left[node] = new_node()
        right[node] = new_node()
        stack.append((right[node], S_right, level + 1))
        stack.append((left[node], S_left, level + 1))
    return Tree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value),
    )


def _log_loss(F, y):
    p = softmax(F)
    return float(-np.log(np.maximum(p[np.arange(y.size), y], 1e-300)).mean())


def gbt_fit(X, y, config=None, seed=0):
    """Gradient boosting with one regression tree per class and round.

    Scores start at the log class frequencies; each round fits every
    class's tree to ``one_hot - softmax`` residuals by exact greedy splits,
    leaves hold the mean residual, and the update is scaled by
    ``learning_rate``.  ``seed`` is recorded only: the fit has no random
    component.
    """
    X, y = _check_xy(X, y)
    config = config or GbtConfig()
    n, d = X.shape
    counts = np.bincount(y, minlength=N_CLASSES)
    prior = np.log(np.maximum(counts / n, 1e-12))
    if np.count_nonzero(counts) == 1:
        log.warning("gbt_fit: training set holds a single class; model is constant")
        return GbtModel(prior=prior, trees=(), config=config, n_features=d, seed=seed,
                        loss_history=(_log_loss(np.tile(prior, (n, 1)), y),))
    XT = np.ascontiguousarray(X.T)
    S_root = np.argsort(XT, axis=1, kind="stable").astype(np.int32)
    target = _one_hot(y)
    F = np.tile(prior, (n, 1))
    history = [_log_loss(F, y)]
    trees = []
    for _ in range(config.rounds):
        resid = target - softmax(F)
        round_trees = tuple(
            _fit_tree(XT, np.ascontiguousarray(resid[:, c]), S_root, config.depth, config.min_leaf)
            for c in range(N_CLASSES)
        )
        for c, tree in enumerate(round_trees):
            F[:, c] += config.learning_rate * tree.predict(X)
        trees.append(round_trees)
        history.append(_log_loss(F, y))
    return GbtModel(prior=prior, trees=tuple(trees), config=config, n_features=d, seed=seed,
                    loss_history=tuple(history))


def gbt_predict_proba(model, X):
    return softmax(model.decision_function(X))


def gbt_predict(model, X):
    return np.argmax(model.decision_function(X), axis=1)


# --------------------------------------------------------------------------
# facade


def default_params(kind):
    if kind == "knn":
        return {"k": 5, "vote": "uniform"}
    if kind == "sgd":
        return asdict(SgdConfig())
    if kind == "gbt":
        cfg = asdict(GbtConfig())
        cfg.pop("algorithm")
        return cfg
    raise ValueError(f"unknown classifier kind {kind!r}")


def fit_model(kind, params, X, y, seed=0):
    params = {**default_params(kind), **(params or {})}
    if kind == "knn":
        return knn_fit(X, y, k=params["k"], vote=params["vote"])
    if kind == "sgd":
        return sgd_fit(X, y, SgdConfig(**params), seed=seed)
    return gbt_fit(X, y, GbtConfig(**params), seed=seed)


def model_kind(model):
    if isinstance(model, KnnModel):
        return "knn"
    if isinstance(model, LinearModel):
        return "sgd"
    if isinstance(model, GbtModel):
        return "gbt"
    raise TypeError(f"not a model: {type(model).__name__}")


def predict_labels(model, X):
    kind = model_kind(model)
    X = _check_query(model, X)
    if X.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    if kind == "knn":
        return knn_predict(model, X)
    if kind == "sgd":
        return sgd_predict(model, X)
    return gbt_predict(model, X)


def model_to_dict(model):
    """JSON-ready document with a ``kind`` tag and flat parameter arrays."""
    kind = model_kind(model)
    if kind == "knn":
        return {"kind": kind, "k": model.k, "vote": model.vote,
                "n_features": model.n_features, "X": model.X.ravel().tolist(),
                "y": model.y.tolist()}
    if kind == "sgd":
        return {"kind": kind, "config": asdict(model.config), "seed": model.seed,
                "n_features": model.n_features, "W": model.W.ravel().tolist(),
                "b": model.b.tolist(), "loss_history": list(model.loss_history)}
    return {
        "kind": kind, "config": asdict(model.config), "seed": model.seed,
        "n_features": model.n_features, "prior": model.prior.tolist(),
        "loss_history": list(model.loss_history),
        "trees": [[{"feature": t.feature.tolist(), "threshold": t.threshold.tolist(),
                    "left": t.left.tolist(), "right": t.right.tolist(),
                    "value": t.value.tolist()} for t in rnd] for rnd in model.trees],
    }


def model_from_dict(doc):
    kind = doc["kind"]
    d = doc["n_features"]
    if kind == "knn":
        X = np.array(doc["X"], dtype=np.float64).reshape(-1, d)
        return KnnModel(X=X, y=np.array(doc["y"], dtype=np.int64), k=doc["k"], vote=doc["vote"])
    if kind == "sgd":
        return LinearModel(W=np.array(doc["W"]).reshape(N_CLASSES, d), b=np.array(doc["b"]),
                           config=SgdConfig(**doc["config"]), seed=doc["seed"],
                           loss_history=tuple(doc["loss_history"]))
    if kind == "gbt":
        trees = tuple(
            tuple(Tree(feature=np.array(t["feature"], dtype=np.int64),
                       threshold=np.array(t["threshold"], dtype=np.float64),
                       left=np.array(t["left"], dtype=np.int64),
                       right=np.array(t["right"], dtype=np.int64),
                       value=np.array(t["value"], dtype=np.float64)) for t in rnd)
            for rnd in doc["trees"]
        )
        return GbtModel(prior=np.array(doc["prior"]), trees=trees,
                        config=GbtConfig(**doc["config"]), n_features=d, seed=doc["seed"],
                        loss_history=tuple(doc["loss_history"]))
    raise ValueError(f"unknown model kind {kind!r}")


def model_to_json(model):
    return json.dumps(model_to_dict(model))


def model_from_json(text):
    return model_from_dict(json.loads(text))
