"""Soft-label cross-entropy training of small scoring models.

The training objective treats the soft label as a target probability:
``-mean(s * log g + (1-s) * log(1-g))``. Its population minimizer is the
conditional mean of the soft label given the features, so a trained scorer
thresholded at T approximates the rule "predict positive when the expected
soft label exceeds T".

Two architectures: a linear-logistic scorer and a one-hidden-layer network
with tanh units and a logistic output. Optimization is plain mini-batch
gradient descent with a fixed learning rate and optional L2 on the weights
(biases excluded); determinism is trivial because all randomness (init and
shuffles) comes from one seeded generator and the epoch loops run in the
selected kernel backend.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .dataset import SoftDataset
from .kernels import sigmoid

ARCH_LINEAR = "linear-logistic"
ARCH_MLP = "mlp-1hidden"
DEFAULT_HIDDEN = 16


@dataclass(frozen=True)
class ScoringModel:
    """A parametric scorer mapping feature vectors to (0, 1).

    ``params`` is flat: [w, b] for the linear scorer, [W1, b1, w2, b2] for
    the one-hidden-layer scorer (W1 row-major, tanh units).
    """

    arch: str
    feature_dim: int
    hidden_width: int
    params: np.ndarray
    seed: int | None = None
    loss_trace: tuple[float, ...] = ()

    def __post_init__(self):
        if self.arch not in (ARCH_LINEAR, ARCH_MLP):
            raise ValueError(f"unknown architecture {self.arch!r}")
        expected = param_count(self.arch, self.feature_dim, self.hidden_width)
        params = np.asarray(self.params, dtype=np.float64)
        if params.shape != (expected,):
            raise ValueError(f"expected {expected} parameters, got {params.shape}")
        object.__setattr__(self, "params", params)

    def scores(self, features) -> np.ndarray:
        """Forward pass; output strictly inside (0, 1) for finite inputs."""
        X = np.atleast_2d(np.asarray(features, dtype=np.float64))
        if X.shape[1] != self.feature_dim:
            raise ValueError(
                f"expected {self.feature_dim} features, got {X.shape[1]}"
            )
        d, h = self.feature_dim, self.hidden_width
        p = self.params
        if self.arch == ARCH_LINEAR:
            return sigmoid(X @ p[:d] + p[d])
        W1 = p[: d * h].reshape(d, h)
        b1 = p[d * h : d * h + h]
        w2 = p[d * h + h : d * h + 2 * h]
        b2 = p[-1]
        return sigmoid(np.tanh(X @ W1 + b1) @ w2 + b2)


def param_count(arch: str, feature_dim: int, hidden_width: int) -> int:
    if arch == ARCH_LINEAR:
        return feature_dim + 1
    if arch == ARCH_MLP:
        if hidden_width < 1:
            raise ValueError("hidden_width must be positive")
        return feature_dim * hidden_width + 2 * hidden_width + 1
    raise ValueError(f"unknown architecture {arch!r}")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float
    epochs: int
    batch_size: int
    seed: int
    l2: float = 0.0

    def __post_init__(self):
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.l2 < 0.0:
            raise ValueError("l2 must be non-negative")


# ---------------------------------------------------------------------------
# loss and gradient
# ---------------------------------------------------------------------------


def soft_ce_loss(scores, soft_labels) -> float:
    """Mean cross-entropy of scores against soft targets.

    Scores must sit strictly inside (0, 1); the logistic output unit of
    :class:`ScoringModel` guarantees that, so an exact 0 or 1 here is a
    caller bug rather than a condition to mask.
    """
    g = np.asarray(scores, dtype=np.float64)
    s = np.asarray(soft_labels, dtype=np.float64)
    if g.shape != s.shape:
        raise ValueError("scores and soft_labels must have matching shapes")
    if np.any(g <= 0.0) or np.any(g >= 1.0):
        raise ValueError("scores must lie strictly inside (0, 1)")
    if np.any(s < 0.0) or np.any(s > 1.0):
        raise ValueError("soft labels must lie in [0, 1]")
    return float(-np.mean(s * np.log(g) + (1.0 - s) * np.log(1.0 - g)))


def penalized_loss(model: ScoringModel, features, soft_labels, l2: float = 0.0) -> float:
    """soft_ce_loss plus (l2/2) * ||weights||^2 (biases excluded)."""
    base = soft_ce_loss(model.scores(features), np.asarray(soft_labels, float))
    if l2 == 0.0:
        return base
    return base + 0.5 * l2 * float(np.sum(_weight_mask(model) * model.params**2))


def _weight_mask(model: ScoringModel) -> np.ndarray:
    """1 for weight entries, 0 for biases, matching the flat layout."""
    d, h = model.feature_dim, model.hidden_width
    mask = np.ones_like(model.params)
    if model.arch == ARCH_LINEAR:
        mask[d] = 0.0
    else:
        mask[d * h : d * h + h] = 0.0
        mask[-1] = 0.0
    return mask


def loss_gradient(model: ScoringModel, features, soft_labels, l2: float = 0.0) -> np.ndarray:
    """Exact analytic gradient of :func:`penalized_loss` w.r.t. the params."""
    X = np.atleast_2d(np.asarray(features, dtype=np.float64))
    s = np.asarray(soft_labels, dtype=np.float64)
    if X.shape[0] == 0:
        raise ValueError("batch must be non-empty")
    if s.shape != (X.shape[0],):
        raise ValueError("soft_labels length must match batch size")
    d, h = model.feature_dim, model.hidden_width
    p = model.params
    n = X.shape[0]
    if model.arch == ARCH_LINEAR:
        g = sigmoid(X @ p[:d] + p[d])
        diff = (g - s) / n
        grad = np.empty_like(p)
        grad[:d] = X.T @ diff + l2 * p[:d]
        grad[d] = diff.sum()
        return grad
    W1 = p[: d * h].reshape(d, h)
    b1 = p[d * h : d * h + h]
    w2 = p[d * h + h : d * h + 2 * h]
    a1 = np.tanh(X @ W1 + b1)
    g = sigmoid(a1 @ w2 + p[-1])
    diff = (g - s) / n
    dz1 = (diff[:, None] * w2[None, :]) * (1.0 - a1 * a1)
    grad = np.empty_like(p)
    grad[: d * h] = (X.T @ dz1 + l2 * W1).ravel()
    grad[d * h : d * h + h] = dz1.sum(axis=0)
    grad[d * h + h : d * h + 2 * h] = a1.T @ diff + l2 * w2
    grad[-1] = diff.sum()
    return grad


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


def initial_params(arch, feature_dim, hidden_width, rng) -> np.ndarray:
    """Zeros for the linear scorer; small symmetric uniform (+-0.1) for the
    hidden-layer weights, zero biases."""
    count = param_count(arch, feature_dim, hidden_width)
    if arch == ARCH_LINEAR:
        return np.zeros(count)
    d, h = feature_dim, hidden_width
    params = np.zeros(count)
    params[: d * h] = rng.uniform(-0.1, 0.1, d * h)
    params[d * h + h : d * h + 2 * h] = rng.uniform(-0.1, 0.1, h)
    return params


class TrainingDiverged(RuntimeError):
    """Raised when a non-finite loss shows up; carries the trace so far."""

    def __init__(self, trace):
        self.trace = tuple(float(v) for v in trace)
        super().__init__(
            f"non-finite training loss after {len(self.trace)} epochs: {self.trace[-3:]}"
        )


def train(
    data: SoftDataset,
    arch: str,
    cfg: TrainConfig,
    hidden_width: int = DEFAULT_HIDDEN,
) -> ScoringModel:
    """Mini-batch gradient descent on the soft cross-entropy.

    Deterministic given the seed: one generator drives the initial
    parameters (hidden layer only) and then the per-epoch shuffles, in that
    order. Returns the final-epoch model with the per-epoch mean batch loss
    attached as ``loss_trace``.
    """
    if arch == ARCH_LINEAR:
        hidden_width = 0
    rng = np.random.default_rng(cfg.seed)
    X = np.ascontiguousarray(data.features)
    s = np.ascontiguousarray(data.soft_labels)
    n = X.shape[0]
    params = initial_params(arch, data.feature_dim, hidden_width, rng)
    order = np.empty((cfg.epochs, n), dtype=np.int64)
    for e in range(cfg.epochs):
        order[e] = rng.permutation(n)
    if arch == ARCH_LINEAR:
        trace = kernels.linear_epochs(
            params, X, s, order, cfg.batch_size, cfg.learning_rate, cfg.l2
        )
    else:
        trace = kernels.mlp_epochs(
            params, X, s, order, cfg.batch_size, cfg.learning_rate, cfg.l2,
            hidden_width,
        )
    if not np.all(np.isfinite(trace)) or not np.all(np.isfinite(params)):
        raise TrainingDiverged(trace[np.isfinite(trace).cumprod().astype(bool)])
    return ScoringModel(
        arch=arch,
        feature_dim=data.feature_dim,
        hidden_width=hidden_width,
        params=params,
        seed=cfg.seed,
        loss_trace=tuple(float(v) for v in trace),
    )


def threshold_classify(scores, t: float) -> np.ndarray:
    """Elementwise indicator score > t (strict: a score equal to t is 0)."""
    return (np.asarray(scores, dtype=np.float64) > t).astype(np.int8)


# ---------------------------------------------------------------------------
# model IO
# ---------------------------------------------------------------------------


def save_model(model: ScoringModel, path) -> None:
    record = {
        "arch": model.arch,
        "feature_dim": model.feature_dim,
        "hidden_width": model.hidden_width,
        "params": model.params.tolist(),
        "seed": model.seed,
        "loss_trace": list(model.loss_trace),
    }
    Path(path).write_text(
        json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_model(path) -> ScoringModel:
    record = json.loads(Path(path).read_text(encoding="utf-8"))
    return ScoringModel(
        arch=record["arch"],
        feature_dim=record["feature_dim"],
        hidden_width=record["hidden_width"],
        params=np.asarray(record["params"], dtype=np.float64),
        seed=record["seed"],
        loss_trace=tuple(record["loss_trace"]),
    )
