"""One-vs-rest maximum-margin head trained by stochastic subgradient descent.

Ten binary hinge-loss problems, each minimizing lam/2 ||w||^2 + mean hinge
with the classic 1/(lam * t) step schedule. Features are optionally expanded
with an explicit degree-2 polynomial map, then z-scored with statistics
frozen from the training set; the bias rides along as an appended constant
feature. Prediction is the argmax of the ten decision values, ties to the
smallest class id.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, InvalidParameterError

N_CLASSES = 10
FEATURE_MODES = ("linear", "poly2")


@dataclass(frozen=True)
class SvmConfig:
    lam: float = 1e-4
    epochs: int = 20
    feature_mode: str = "linear"

    def __post_init__(self):
        if self.lam <= 0:
            raise InvalidParameterError(f"lam must be > 0, got {self.lam}")
        if self.epochs < 1:
            raise InvalidParameterError(f"epochs must be >= 1, got {self.epochs}")
        if self.feature_mode not in FEATURE_MODES:
            raise InvalidParameterError(f"unknown feature mode {self.feature_mode!r}")


@dataclass
class SvmModel:
    weights: np.ndarray  # (10, expanded_dim + 1), last column is the bias weight
    mean: np.ndarray     # (expanded_dim,) training-set statistics
    std: np.ndarray      # (expanded_dim,)
    lam: float
    feature_mode: str

    @property
    def input_dim(self) -> int:
        """Raw feature dimension the model expects before expansion."""
        d = self.mean.shape[0]
        if self.feature_mode == "linear":
            return d
        # d = h + h (h + 1) / 2  =>  h = (sqrt(9 + 8 d) - 3) / 2
        return int(round((np.sqrt(9 + 8 * d) - 3) / 2))


def poly2_expand(v: np.ndarray) -> np.ndarray:
    """[v_i] followed by all products v_i * v_j for i <= j (row-major pairs)."""
    arr = np.asarray(v, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    h = arr.shape[1]
    i, j = np.triu_indices(h)
    out = np.concatenate([arr, arr[:, i] * arr[:, j]], axis=1)
    return out[0] if single else out


def poly2_dim(h: int) -> int:
    return h + h * (h + 1) // 2


def _expand(features: np.ndarray, mode: str) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    return poly2_expand(x) if mode == "poly2" else x


def standardize_fit(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-dimension mean and population std of the training matrix."""
    return x.mean(axis=0), x.std(axis=0)


def standardize_apply(x: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    """Z-score; zero-variance dimensions map to 0."""
    return np.where(std > 0, (x - mean) / np.where(std > 0, std, 1.0), 0.0)


def hinge_objective(w: np.ndarray, x: np.ndarray, y: np.ndarray, lam: float) -> float:
    """lam/2 ||w||^2 + mean max(0, 1 - y w.x)."""
    margins = 1.0 - y * (x @ w)
    return float(0.5 * lam * (w @ w) + np.maximum(margins, 0.0).mean())


def _pegasos(
    x: np.ndarray, y: np.ndarray, lam: float, epochs: int, rng: np.random.Generator
) -> np.ndarray:
    n, dim = x.shape
    w = np.zeros(dim)
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            w *= 1.0 - 1.0 / t
            if y[i] * (x[i] @ w) < 1.0:
                w += eta * y[i] * x[i]
    return w


def train_svm(
    features: np.ndarray,
    labels: np.ndarray,
    config: SvmConfig,
    rng: np.random.Generator,
) -> SvmModel:
    """Fit the ten one-vs-rest hinge problems on (optionally expanded) features."""
    labels = np.asarray(labels, dtype=np.int64)
    if np.unique(labels).size < 2:
        raise DegenerateInputError("need at least two classes to train")
    expanded = _expand(features, config.feature_mode)
    if expanded.shape[0] != labels.shape[0]:
        raise InvalidParameterError("features and labels disagree on sample count")
    mean, std = standardize_fit(expanded)
    xs = standardize_apply(expanded, mean, std)
    xb = np.concatenate([xs, np.ones((xs.shape[0], 1))], axis=1)
    weights = np.zeros((N_CLASSES, xb.shape[1]))
    class_rngs = rng.spawn(N_CLASSES)
    for c in range(N_CLASSES):
        y = np.where(labels == c, 1.0, -1.0)
        weights[c] = _pegasos(xb, y, config.lam, config.epochs, class_rngs[c])
    return SvmModel(
        weights=weights, mean=mean, std=std,
        lam=config.lam, feature_mode=config.feature_mode,
    )


def decision_scores(model: SvmModel, features: np.ndarray) -> np.ndarray:
    """(n, 10) decision values for raw (unexpanded) feature rows."""
    x = np.asarray(features, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    expanded = _expand(x, model.feature_mode)
    if expanded.shape[1] != model.mean.shape[0]:
        raise InvalidParameterError(
            f"expanded dimension {expanded.shape[1]} != model's {model.mean.shape[0]}"
        )
    xs = standardize_apply(expanded, model.mean, model.std)
    xb = np.concatenate([xs, np.ones((xs.shape[0], 1))], axis=1)
    scores = xb @ model.weights.T
    return scores[0] if single else scores


def predict(model: SvmModel, features: np.ndarray):
    """Class id(s) plus decision scores; argmax ties go to the smallest id."""
    scores = decision_scores(model, features)
    if scores.ndim == 1:
        return int(np.argmax(scores)), scores
    return scores.argmax(axis=1), scores


def accuracy(model: SvmModel, features: np.ndarray, labels: np.ndarray) -> float:
    pred, _ = predict(model, features)
    return float(np.mean(pred == np.asarray(labels)))


def cross_validate(
    features: np.ndarray,
    labels: np.ndarray,
    k: int,
    config: SvmConfig,
    rng: np.random.Generator,
) -> tuple[list[float], np.ndarray]:
    """k-fold cross validation; every sample lands in exactly one test fold.

    Returns per-fold accuracies and the fold assignment vector.
    """
    n = len(labels)
    if k < 2 or k > n:
        raise InvalidParameterError(f"k must be in [2, {n}], got {k}")
    fold_of = np.empty(n, dtype=np.int64)
    fold_of[rng.permutation(n)] = np.arange(n) % k
    accs = []
    for fold in range(k):
        test = fold_of == fold
        model = train_svm(features[~test], labels[~test], config, rng)
        accs.append(accuracy(model, features[test], labels[test]))
    return accs, fold_of
