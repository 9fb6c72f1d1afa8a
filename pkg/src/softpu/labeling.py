"""Soft-label generation from operational evidence.

Two constructions are provided. The rule-ratio label compares the
verification-failure rate of a targeting rule against that of random
selection: the excess failure rate, as a fraction, lower-bounds the
probability that a rule-flagged failing user is a true positive.

The empirical-Bayes label starts from per-user check records (n days
checked, k days passed), models the per-day pass probability theta as drawn
from an unknown prior, fits that prior on a discrete grid by penalized
maximum likelihood (exponentiated-gradient descent on the probability
simplex), and assigns soft label ``1 - posterior_mean(theta)``.
"""

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels

GRID_MARGIN = 1e-4


@dataclass(frozen=True)
class RuleStats:
    """Verification-failure ratios under a targeting rule vs random checks."""

    fail_ratio_rule: float
    fail_ratio_random: float

    def __post_init__(self):
        for name in ("fail_ratio_rule", "fail_ratio_random"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


def rule_soft_label(stats: RuleStats) -> float:
    """Soft label ``1 - random_ratio / rule_ratio``, clamped to [0, 1].

    The raw expression goes negative when a rule underperforms random
    selection; clamping to 0 keeps the "ordinary unlabeled" meaning.
    """
    if stats.fail_ratio_rule == 0.0:
        raise ValueError("fail_ratio_rule is 0: failure-ratio quotient undefined")
    raw = 1.0 - stats.fail_ratio_random / stats.fail_ratio_rule
    return float(min(max(raw, 0.0), 1.0))


@dataclass(frozen=True)
class CheckRecord:
    """Per-user security-check record: n days checked, k days passed."""

    n: int
    k: int

    def __post_init__(self):
        if self.n < 0 or self.k < 0 or self.k > self.n:
            raise ValueError(f"need 0 <= k <= n, got n={self.n}, k={self.k}")


@dataclass(frozen=True)
class DiscretePrior:
    """Prior over the per-day pass probability, gridded on [0, 1].

    Weights live on the probability simplex. ``objective_trace`` is filled
    in by :func:`fit_prior` (objective value at the start plus each accepted
    iterate).
    """

    grid: np.ndarray
    weights: np.ndarray
    objective_trace: tuple[float, ...] | None = None

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=np.float64)
        weights = np.asarray(self.weights, dtype=np.float64)
        if grid.ndim != 1 or grid.shape != weights.shape or grid.size < 1:
            raise ValueError("grid and weights must be matching 1-D arrays")
        if np.any(grid < 0.0) or np.any(grid > 1.0) or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing within [0, 1]")
        if np.any(weights < 0.0):
            raise ValueError("weights must be non-negative")
        if abs(weights.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {weights.sum()!r}")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, grid_size: int, margin: float = GRID_MARGIN) -> "DiscretePrior":
        """Uniform weights on an even grid over [margin, 1 - margin].

        The margin keeps every likelihood strictly positive for records with
        0 < k < n.
        """
        if grid_size < 2:
            raise ValueError("grid_size must be at least 2")
        grid = np.linspace(margin, 1.0 - margin, grid_size)
        return cls(grid=grid, weights=np.full(grid_size, 1.0 / grid_size))

    @classmethod
    def point_mass(cls, theta: float) -> "DiscretePrior":
        return cls(grid=np.array([theta]), weights=np.array([1.0]))

    @property
    def mean(self) -> float:
        return float(np.dot(self.grid, self.weights))

    def mass_in(self, lo: float, hi: float) -> float:
        sel = (self.grid >= lo) & (self.grid <= hi)
        return float(self.weights[sel].sum())

    def to_dict(self):
        d = {"grid": self.grid.tolist(), "weights": self.weights.tolist()}
        if self.objective_trace is not None:
            d["objective_trace"] = list(self.objective_trace)
        return d

    @classmethod
    def from_dict(cls, d):
        trace = d.get("objective_trace")
        return cls(
            grid=np.asarray(d["grid"], dtype=np.float64),
            weights=np.asarray(d["weights"], dtype=np.float64),
            objective_trace=None if trace is None else tuple(trace),
        )


def posterior_pass_prob(record: CheckRecord, prior: DiscretePrior) -> float:
    """Posterior mean of the per-day pass probability given a record.

    Computed as the ratio of the (k+1, n-k) and (k, n-k) moment sums of the
    prior, i.e. the gridded version of the Beta-integral quotient.
    """
    theta = prior.grid
    base = theta**record.k * (1.0 - theta) ** (record.n - record.k) * prior.weights
    denom = base.sum()
    numer = (base * theta).sum()
    if denom <= 0.0 or not math.isfinite(denom):
        raise ValueError(
            f"prior inconsistent with record (n={record.n}, k={record.k}): "
            "posterior normalizer vanished"
        )
    return float(numer / denom)


def bayes_soft_label(record: CheckRecord, prior: DiscretePrior) -> float:
    """Soft label ``1 - posterior_pass_prob``: low pass rates mean high risk."""
    return 1.0 - posterior_pass_prob(record, prior)


# ---------------------------------------------------------------------------
# prior fitting
# ---------------------------------------------------------------------------


def _likelihood_matrix(records, grid) -> np.ndarray:
    """B[i, j] = theta_j^k_i * (1 - theta_j)^(n_i - k_i) (no binomial factor;
    it cancels in the gradient and shifts the objective by a constant)."""
    ns = np.array([r.n for r in records], dtype=np.float64)
    ks = np.array([r.k for r in records], dtype=np.float64)
    return grid[None, :] ** ks[:, None] * (1.0 - grid[None, :]) ** (ns - ks)[:, None]


def _log_binomials(records) -> np.ndarray:
    return np.array(
        [
            math.lgamma(r.n + 1) - math.lgamma(r.k + 1) - math.lgamma(r.n - r.k + 1)
            for r in records
        ]
    )


def fit_prior(
    records,
    grid_size: int = 101,
    lam: float = 1e-3,
    step_size: float = 0.5,
    max_iters: int = 500,
    tol: float = 1e-9,
) -> DiscretePrior:
    """Fit the discrete prior by penalized maximum likelihood.

    Minimizes ``-mean_i log(sum_j B_ij f_j dtheta) + lam * sum_j f_j^2 *
    dtheta`` over the simplex, starting from uniform weights, with
    multiplicative exponentiated-gradient updates (step halved whenever a
    trial update increases the objective). ``lam`` multiplies the squared
    density ``integral f^2`` in its grid-independent meaning: the weights
    represent a density ``f_j / dtheta`` on cells of width dtheta.

    Returns the prior with the lowest objective seen (the last accepted
    iterate, since accepted steps never increase the objective), carrying
    the accepted-objective trace.
    """
    records = list(records)
    if not records:
        raise ValueError("records must be non-empty")
    start = DiscretePrior.uniform(grid_size)
    dtheta = float(start.grid[1] - start.grid[0])
    B = _likelihood_matrix(records, start.grid)
    row_sums = B.sum(axis=1)
    if np.any(row_sums <= 0.0) or not np.all(np.isfinite(B)):
        bad = int(np.argmin(row_sums))
        raise ValueError(
            f"non-finite objective: record (n={records[bad].n}, k={records[bad].k}) "
            "has no likelihood support on the grid"
        )
    weights, trace = kernels.eg_minimize(
        B, start.weights.copy(), dtheta, lam, step_size, max_iters, tol
    )
    # guard against float drift from the multiplicative updates
    weights = np.maximum(weights, 0.0)
    weights = weights / weights.sum()
    return DiscretePrior(
        grid=start.grid, weights=weights, objective_trace=tuple(float(v) for v in trace)
    )


def fit_objective(records, prior: DiscretePrior, lam: float) -> float:
    """The fitted objective at an arbitrary prior (binomial factor dropped)."""
    records = list(records)
    B = _likelihood_matrix(records, prior.grid)
    dtheta = float(prior.grid[1] - prior.grid[0]) if prior.grid.size > 1 else 1.0
    den = (B @ prior.weights) * dtheta
    if np.any(den <= 0.0):
        return float("inf")
    return float(-np.mean(np.log(den)) + lam * dtheta * np.sum(prior.weights**2))


def mean_log_likelihood(records, prior: DiscretePrior) -> float:
    """Reported mean log-likelihood, including the binomial coefficients."""
    records = list(records)
    B = _likelihood_matrix(records, prior.grid)
    dtheta = float(prior.grid[1] - prior.grid[0]) if prior.grid.size > 1 else 1.0
    den = (B @ prior.weights) * dtheta
    if np.any(den <= 0.0):
        return float("-inf")
    return float(np.mean(np.log(den) + _log_binomials(records)))


# ---------------------------------------------------------------------------
# reporting and IO
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LabelSeparationReport:
    """Empirical check that soft labels separate the classes.

    ``separated`` is the core requirement (mean soft label higher among
    positives); ``all_nonzero_above_pi`` is the stronger sufficient
    condition that every nonzero soft label exceeds the class prior.
    """

    mean_soft_positive: float
    mean_soft_negative: float
    difference: float
    separated: bool
    all_nonzero_above_pi: bool
    pi: float

    def to_dict(self):
        return {
            "mean_soft_positive": self.mean_soft_positive,
            "mean_soft_negative": self.mean_soft_negative,
            "difference": self.difference,
            "separated": self.separated,
            "all_nonzero_above_pi": self.all_nonzero_above_pi,
            "pi": self.pi,
        }


def check_label_separation(soft_labels, true_labels, pi: float) -> LabelSeparationReport:
    s = np.asarray(soft_labels, dtype=np.float64)
    y = np.asarray(true_labels)
    if s.shape != y.shape:
        raise ValueError("soft_labels and true_labels must have matching shapes")
    pos = y == 1
    if not pos.any():
        raise ValueError("positive class (Y=1) is empty")
    if pos.all():
        raise ValueError("negative class (Y=0) is empty")
    mean_pos = float(s[pos].mean())
    mean_neg = float(s[~pos].mean())
    nonzero = s[s > 0.0]
    return LabelSeparationReport(
        mean_soft_positive=mean_pos,
        mean_soft_negative=mean_neg,
        difference=mean_pos - mean_neg,
        separated=mean_pos > mean_neg,
        all_nonzero_above_pi=bool(nonzero.size > 0 and np.all(nonzero > pi)),
        pi=float(pi),
    )


def records_from_csv(path) -> list[CheckRecord]:
    """Read check records from a CSV with columns user_id, n, k."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    records = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"n", "k"} <= set(reader.fieldnames):
            raise ValueError("records CSV needs columns user_id, n, k")
        for row_idx, row in enumerate(reader, start=1):
            try:
                n = int(row["n"])
                k = int(row["k"])
            except (TypeError, ValueError):
                raise ValueError(f"row {row_idx}: n and k must be integers") from None
            records.append(CheckRecord(n=n, k=k))
    if not records:
        raise ValueError("empty records file")
    return records


def prior_to_json(prior: DiscretePrior, path) -> None:
    Path(path).write_text(
        json.dumps(prior.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def prior_from_json(path) -> DiscretePrior:
    return DiscretePrior.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
