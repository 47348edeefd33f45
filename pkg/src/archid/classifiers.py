"""Five classifier families over the 293-feature vectors.

All training is deterministic: zero or seeded initialization, fixed
iteration order, and every tie broken by ascending class-name order (or
by lowest feature index, then lowest threshold, inside trees).  Features
are consumed at their natural [0, 1] frequency scale; no standardization
layer is applied, so distance- and margin-based families see the raw
densities on purpose.

Models trained on a feature subset (ablation experiments) carry the
subset as `feature_indices` and apply it to incoming full-width vectors
at prediction time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonFinite, SchemaMismatch, TooFewClasses, TooFewSamples
from .features import FeatureVector, samples_to_matrix

FAMILIES = ("knn", "logistic_regression", "naive_bayes", "decision_tree", "random_forest")


@dataclass
class TrainedModel:
    family: str
    hyperparameters: dict
    parameters: dict
    schema_version: int
    class_names: list[str]
    feature_indices: np.ndarray | None = None  # None means all columns

    @property
    def n_classes(self) -> int:
        return len(self.class_names)


@dataclass(frozen=True)
class Prediction:
    label: str
    probabilities: dict


def _prepare(samples, feature_indices):
    X, y, class_names = samples_to_matrix(samples)
    schema_version = samples[0].features.schema_version
    if feature_indices is not None:
        feature_indices = np.asarray(feature_indices, dtype=np.int64)
        X = X[:, feature_indices]
    return X, y, class_names, schema_version, feature_indices


def _mask(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    if model.feature_indices is None:
        return X
    return X[:, model.feature_indices]


# --- k nearest neighbors -------------------------------------------------

def train_knn(samples, k: int = 3, feature_indices=None) -> TrainedModel:
    X, y, class_names, version, idx = _prepare(samples, feature_indices)
    if len(X) < k:
        raise TooFewSamples(f"need at least k={k} samples, got {len(X)}")
    return TrainedModel(
        family="knn",
        hyperparameters={"k": int(k)},
        parameters={"train_x": X, "train_y": y},
        schema_version=version,
        class_names=class_names,
        feature_indices=idx,
    )


def _knn_probs(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    tx = model.parameters["train_x"]
    ty = model.parameters["train_y"]
    k = model.hyperparameters["k"]
    n_classes = model.n_classes
    d2 = (
        np.sum(X * X, axis=1)[:, None]
        + np.sum(tx * tx, axis=1)[None, :]
        - 2.0 * (X @ tx.T)
    )
    np.maximum(d2, 0.0, out=d2)
    probs = np.zeros((len(X), n_classes))
    for i in range(len(X)):
        # Stable sort: equal distances resolve to the lowest training index.
        order = np.argsort(d2[i], kind="stable")[:k]
        votes = np.bincount(ty[order], minlength=n_classes)
        probs[i] = votes / k
    return probs


# --- multinomial logistic regression --------------------------------------

def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def logistic_loss_grad(weights, X, y, n_classes, c, penalty):
    """Objective value and gradient at `weights` ([classes, features+1]).

    Objective: sum of cross-entropies plus (1/c) times the penalty,
    normalized by the sample count, i.e. mean CE + penalty/(c*n).  The
    inverse regularization c therefore trades off against the total
    loss, which is the convention the usual C grids assume.  Penalty is
    sum(|w|) for l1 or 0.5*sum(w^2) for l2, bias excluded.  The l1 term
    contributes its subgradient sign(w); exact only away from zero,
    which is how the finite-difference check exercises it.
    """
    n = len(X)
    Xb = np.hstack([X, np.ones((n, 1))])
    probs = _softmax(Xb @ weights.T)
    logp = np.log(np.clip(probs[np.arange(n), y], 1e-300, None))
    loss = -float(np.mean(logp))
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0
    grad = (probs - onehot).T @ Xb / n
    w_nobias = weights[:, :-1]
    if penalty == "l2":
        loss += 0.5 / (c * n) * float(np.sum(w_nobias ** 2))
        grad[:, :-1] += w_nobias / (c * n)
    elif penalty == "l1":
        loss += float(np.sum(np.abs(w_nobias))) / (c * n)
        grad[:, :-1] += np.sign(w_nobias) / (c * n)
    return loss, grad


def train_logistic(
    samples,
    c: float = 1000.0,
    penalty: str = "l1",
    max_iter: int = 2000,
    tol: float = 1e-8,
    learning_rate: float = 1.0,
    feature_indices=None,
) -> TrainedModel:
    """Accelerated proximal gradient descent from zero weights.

    Nesterov momentum keeps convergence usable on the tiny [0, 1]
    density scale of the features; l1 applies soft-thresholding after
    each gradient step, so the optimum stays sparse.  Deterministic:
    zero init, fixed iteration order, no RNG.
    """
    if c <= 0:
        raise ValueError("c must be positive")
    if penalty not in ("l1", "l2", "none"):
        raise ValueError(f"unknown penalty {penalty!r}")
    X, y, class_names, version, idx = _prepare(samples, feature_indices)
    n_classes = len(class_names)
    if n_classes < 2:
        raise TooFewClasses("logistic regression needs at least 2 classes")

    n, d = X.shape
    Xb = np.hstack([X, np.ones((n, 1))])
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0

    def smooth_loss_grad(weights):
        probs = _softmax(Xb @ weights.T)
        logp = np.log(np.clip(probs[np.arange(n), y], 1e-300, None))
        loss = -float(np.mean(logp))
        grad = (probs - onehot).T @ Xb / n
        if penalty == "l2":
            loss += 0.5 / (c * n) * float(np.sum(weights[:, :-1] ** 2))
            grad[:, :-1] += weights[:, :-1] / (c * n)
        return loss, grad

    W = np.zeros((n_classes, d + 1))
    Z = W
    momentum = 1.0
    prev_loss = None
    for _ in range(max_iter):
        _, grad = smooth_loss_grad(Z)
        W_next = Z - learning_rate * grad
        if penalty == "l1":
            shrink = learning_rate / (c * n)
            w = W_next[:, :-1]
            W_next[:, :-1] = np.sign(w) * np.maximum(np.abs(w) - shrink, 0.0)
        momentum_next = (1.0 + math.sqrt(1.0 + 4.0 * momentum * momentum)) / 2.0
        Z = W_next + ((momentum - 1.0) / momentum_next) * (W_next - W)
        W, momentum = W_next, momentum_next

        loss, _ = smooth_loss_grad(W)
        if penalty == "l1":
            loss += float(np.sum(np.abs(W[:, :-1]))) / (c * n)
        if not math.isfinite(loss):
            raise NonFinite("logistic loss diverged")
        if prev_loss is not None and abs(prev_loss - loss) <= tol * max(1.0, abs(prev_loss)):
            break
        prev_loss = loss

    return TrainedModel(
        family="logistic_regression",
        hyperparameters={
            "c": float(c),
            "penalty": penalty,
            "max_iter": int(max_iter),
            "tol": float(tol),
            "learning_rate": float(learning_rate),
        },
        parameters={"weights": W},
        schema_version=version,
        class_names=class_names,
        feature_indices=idx,
    )


def _logistic_probs(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    W = model.parameters["weights"]
    Xb = np.hstack([X, np.ones((len(X), 1))])
    return _softmax(Xb @ W.T)


# --- Gaussian naive Bayes --------------------------------------------------

def train_naive_bayes(samples, var_smoothing: float = 1e-9, feature_indices=None) -> TrainedModel:
    X, y, class_names, version, idx = _prepare(samples, feature_indices)
    n_classes = len(class_names)
    if n_classes < 2:
        raise TooFewClasses("naive Bayes needs at least 2 classes")
    means = np.zeros((n_classes, X.shape[1]))
    variances = np.zeros((n_classes, X.shape[1]))
    priors = np.zeros(n_classes)
    for ci in range(n_classes):
        rows = X[y == ci]
        means[ci] = rows.mean(axis=0)
        variances[ci] = rows.var(axis=0)
        priors[ci] = len(rows) / len(X)
    floor = var_smoothing * float(X.var(axis=0).max())
    if floor <= 0.0:
        floor = var_smoothing
    np.maximum(variances, floor, out=variances)
    return TrainedModel(
        family="naive_bayes",
        hyperparameters={"var_smoothing": float(var_smoothing)},
        parameters={"means": means, "variances": variances, "priors": priors},
        schema_version=version,
        class_names=class_names,
        feature_indices=idx,
    )


def naive_bayes_log_posterior(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    """Unnormalized log posteriors, one row per sample."""
    means = model.parameters["means"]
    variances = model.parameters["variances"]
    priors = model.parameters["priors"]
    out = np.empty((len(X), model.n_classes))
    for ci in range(model.n_classes):
        diff = X - means[ci]
        out[:, ci] = np.log(priors[ci]) - 0.5 * np.sum(
            np.log(2.0 * np.pi * variances[ci]) + diff * diff / variances[ci], axis=1
        )
    return out


def _nb_probs(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    logpost = naive_bayes_log_posterior(model, X)
    shifted = logpost - logpost.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


# --- decision tree ----------------------------------------------------------

def _gini_scan(values, labels, n_classes, min_leaf):
    """Best (weighted child gini, threshold) for one feature, or None.

    Candidate thresholds are midpoints between adjacent distinct sorted
    values; ties resolve to the lowest threshold.
    """
    order = np.argsort(values, kind="stable")
    sv = values[order]
    sy = labels[order]
    n = len(sv)
    boundaries = np.nonzero(sv[1:] != sv[:-1])[0]
    if len(boundaries) == 0:
        return None
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), sy] = 1.0
    cum = np.cumsum(onehot, axis=0)
    total = cum[-1]

    n_left = boundaries + 1
    n_right = n - n_left
    valid = (n_left >= min_leaf) & (n_right >= min_leaf)
    thresholds = (sv[boundaries] + sv[boundaries + 1]) / 2.0
    # Guard against midpoints rounding up onto the right value.
    valid &= thresholds < sv[boundaries + 1]
    if not valid.any():
        return None
    boundaries = boundaries[valid]
    n_left = n_left[valid]
    n_right = n_right[valid]
    thresholds = thresholds[valid]

    left = cum[boundaries]
    right = total[None, :] - left
    gini_left = 1.0 - np.sum((left / n_left[:, None]) ** 2, axis=1)
    gini_right = 1.0 - np.sum((right / n_right[:, None]) ** 2, axis=1)
    weighted = (n_left * gini_left + n_right * gini_right) / n
    j = int(np.argmin(weighted))  # first minimum = lowest threshold
    return float(weighted[j]), float(thresholds[j])


class _TreeBuilder:
    def __init__(self, X, y, n_classes, max_depth, min_leaf, feature_subsample, rng):
        self.X = X
        self.y = y
        self.n_classes = n_classes
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.feature_subsample = feature_subsample
        self.rng = rng
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.counts = []

    def _new_node(self, idx):
        node = len(self.feature)
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.counts.append(np.bincount(self.y[idx], minlength=self.n_classes).astype(np.float64))
        return node

    def build(self, idx, depth=0):
        node = self._new_node(idx)
        counts = self.counts[node]
        if (
            len(idx) < 2 * self.min_leaf
            or np.count_nonzero(counts) <= 1
            or (self.max_depth is not None and depth >= self.max_depth)
        ):
            return node

        d = self.X.shape[1]
        if self.feature_subsample is not None and self.feature_subsample < d:
            candidates = np.sort(self.rng.choice(d, size=self.feature_subsample, replace=False))
        else:
            candidates = np.arange(d)

        best = None  # (weighted gini, feature, threshold)
        sub_y = self.y[idx]
        for f in candidates:
            scan = _gini_scan(self.X[idx, f], sub_y, self.n_classes, self.min_leaf)
            if scan is None:
                continue
            weighted, thr = scan
            if best is None or weighted < best[0]:
                best = (weighted, int(f), thr)
        if best is None:
            return node

        _, f, thr = best
        go_left = self.X[idx, f] <= thr
        self.feature[node] = f
        self.threshold[node] = thr
        left_child = self.build(idx[go_left], depth + 1)
        right_child = self.build(idx[~go_left], depth + 1)
        self.left[node] = left_child
        self.right[node] = right_child
        return node

    def arrays(self):
        return {
            "feature": np.array(self.feature, dtype=np.int64),
            "threshold": np.array(self.threshold, dtype=np.float64),
            "left": np.array(self.left, dtype=np.int64),
            "right": np.array(self.right, dtype=np.int64),
            "counts": np.stack(self.counts),
        }


def _grow_tree(X, y, n_classes, max_depth, min_leaf, feature_subsample, rng):
    builder = _TreeBuilder(X, y, n_classes, max_depth, min_leaf, feature_subsample, rng)
    builder.build(np.arange(len(X)))
    return builder.arrays()


def train_tree(
    samples,
    max_depth: int | None = None,
    min_leaf: int = 1,
    rng_seed: int = 42,
    feature_subsample: int | None = None,
    feature_indices=None,
) -> TrainedModel:
    if min_leaf < 1:
        raise ValueError("min_leaf must be >= 1")
    X, y, class_names, version, idx = _prepare(samples, feature_indices)
    rng = np.random.default_rng(rng_seed)
    tree = _grow_tree(X, y, len(class_names), max_depth, min_leaf, feature_subsample, rng)
    return TrainedModel(
        family="decision_tree",
        hyperparameters={
            "max_depth": max_depth,
            "min_leaf": int(min_leaf),
            "rng_seed": int(rng_seed),
            "feature_subsample": feature_subsample,
        },
        parameters={"tree": tree},
        schema_version=version,
        class_names=class_names,
        feature_indices=idx,
    )


def _tree_leaf_distributions(tree, X):
    """Leaf class distribution for each row, by vectorized descent."""
    feature = tree["feature"]
    threshold = tree["threshold"]
    left = tree["left"]
    right = tree["right"]
    counts = tree["counts"]
    pos = np.zeros(len(X), dtype=np.int64)
    while True:
        feats = feature[pos]
        internal = feats >= 0
        if not internal.any():
            break
        rows = np.nonzero(internal)[0]
        node_ids = pos[rows]
        go_left = X[rows, feats[rows]] <= threshold[node_ids]
        pos[rows] = np.where(go_left, left[node_ids], right[node_ids])
    dist = counts[pos]
    return dist / dist.sum(axis=1, keepdims=True)


def _tree_probs(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    return _tree_leaf_distributions(model.parameters["tree"], X)


# --- random forest -----------------------------------------------------------

def forest_feature_subsample(n_features: int) -> int:
    return int(math.floor(math.log2(n_features))) + 1


def bootstrap_indices(seed: int, n: int) -> np.ndarray:
    """The bootstrap resample a tree with this seed trains on."""
    return np.random.default_rng(seed).integers(0, n, size=n)


def train_forest(
    samples,
    n_trees: int = 100,
    rng_seed: int = 42,
    max_depth: int | None = None,
    min_leaf: int = 1,
    bootstrap: bool = True,
    feature_indices=None,
) -> TrainedModel:
    """Bootstrap-aggregated trees with per-split random feature subsets.

    Each tree draws its own resample from a per-tree seed derived from
    rng_seed; `bootstrap=False` is a degenerate hook that trains every
    tree on the full sample set (useful to compare with a single tree).
    """
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    X, y, class_names, version, idx = _prepare(samples, feature_indices)
    n = len(X)
    subsample = forest_feature_subsample(X.shape[1])
    tree_seeds = np.random.SeedSequence(rng_seed).generate_state(n_trees).astype(np.uint64)

    trees = []
    for seed in tree_seeds:
        rng = np.random.default_rng(int(seed))
        if bootstrap:
            rows = rng.integers(0, n, size=n)
        else:
            rows = np.arange(n)
        trees.append(
            _grow_tree(X[rows], y[rows], len(class_names), max_depth, min_leaf, subsample, rng)
        )

    return TrainedModel(
        family="random_forest",
        hyperparameters={
            "n_trees": int(n_trees),
            "rng_seed": int(rng_seed),
            "max_depth": max_depth,
            "min_leaf": int(min_leaf),
            "bootstrap": bool(bootstrap),
            "feature_subsample": subsample,
        },
        parameters={"trees": trees, "tree_seeds": tree_seeds},
        schema_version=version,
        class_names=class_names,
        feature_indices=idx,
    )


def _forest_probs(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    trees = model.parameters["trees"]
    acc = np.zeros((len(X), model.n_classes))
    for tree in trees:
        acc += _tree_leaf_distributions(tree, X)
    return acc / len(trees)


# --- uniform prediction surface -----------------------------------------------

_PROB_FNS = {
    "knn": _knn_probs,
    "logistic_regression": _logistic_probs,
    "naive_bayes": _nb_probs,
    "decision_tree": _tree_probs,
    "random_forest": _forest_probs,
}


def predict_batch(model: TrainedModel, X: np.ndarray):
    """Class probabilities (rows summing to 1) and argmax label indices."""
    X = np.asarray(X, dtype=np.float64)
    probs = _PROB_FNS[model.family](model, _mask(model, X))
    probs = probs / probs.sum(axis=1, keepdims=True)
    labels = np.argmax(probs, axis=1)  # first maximum: ascending class-name tie-break
    return labels, probs


def predict(model: TrainedModel, v: FeatureVector) -> Prediction:
    if v.schema_version != model.schema_version:
        raise SchemaMismatch(
            f"feature schema v{v.schema_version} does not match model schema "
            f"v{model.schema_version}"
        )
    labels, probs = predict_batch(model, v.values[None, :])
    return Prediction(
        label=model.class_names[labels[0]],
        probabilities={c: float(p) for c, p in zip(model.class_names, probs[0])},
    )


TRAINER_DEFAULTS = {
    "knn": {"k": 3},
    "logistic_regression": {
        "c": 1000.0, "penalty": "l1", "max_iter": 2000, "tol": 1e-8, "learning_rate": 1.0,
    },
    "naive_bayes": {"var_smoothing": 1e-9},
    "decision_tree": {"max_depth": None, "min_leaf": 1, "rng_seed": 42, "feature_subsample": None},
    "random_forest": {"n_trees": 100, "rng_seed": 42, "max_depth": None, "min_leaf": 1},
}

_TRAINERS = {
    "knn": train_knn,
    "logistic_regression": train_logistic,
    "naive_bayes": train_naive_bayes,
    "decision_tree": train_tree,
    "random_forest": train_forest,
}


def train_family(family: str, samples, hyperparams=None, feature_indices=None) -> TrainedModel:
    if family not in _TRAINERS:
        raise ValueError(f"unknown classifier family {family!r}; choose from {FAMILIES}")
    kwargs = dict(TRAINER_DEFAULTS[family])
    kwargs.update(hyperparams or {})
    return _TRAINERS[family](samples, feature_indices=feature_indices, **kwargs)
