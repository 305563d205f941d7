"""Posterior computation and Bayes rules for finitely supported priors.

All posterior arithmetic stays in the log domain: the limit-of-Bayes
prior sequence below carries exponents that grow like n^k, so linear
arithmetic would overflow immediately.

The Bayes action rejects hypothesis i exactly when the posterior mass of
the i-th null section falls below b / (b + 1); at equality it accepts.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import as_float_matrix, as_float_vector, check_positive
from .gaussian import IntraclassCovariance, log_density
from .model import Variant, classify_partition, label_tuple
from .procedures import step_down_decide

# s! permutation enumeration guard for the limit-prior numerators.
MAX_LIMIT_K = 8


def _logsumexp(a: np.ndarray, axis=None):
    a = np.asarray(a, dtype=float)
    peak = np.max(a, axis=axis, keepdims=True)
    peak = np.where(np.isfinite(peak), peak, 0.0)
    out = np.log(np.sum(np.exp(a - peak), axis=axis, keepdims=True)) + peak
    return float(out.reshape(())) if axis is None else np.squeeze(out, axis=axis)


@dataclass(frozen=True)
class DiscretePrior:
    """Finitely supported prior over mean vectors, normalized on creation."""

    means: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        means = np.atleast_2d(np.array(self.means, dtype=float))
        weights = np.array(self.weights, dtype=float)
        if means.shape[0] != weights.shape[0]:
            raise ValueError("means and weights must have matching lengths")
        if means.shape[0] == 0:
            raise ValueError("prior must have at least one atom")
        if np.any(weights <= 0):
            raise ValueError("atom weights must be positive")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "weights", weights / weights.sum())

    @property
    def k(self) -> int:
        return self.means.shape[1]

    def cell_labels(self, variant: Variant = Variant.POINT_NULL) -> list[tuple[int, ...]]:
        return [label_tuple(classify_partition(m, variant)) for m in self.means]


@dataclass(frozen=True)
class PosteriorSummary:
    """Posterior cell probabilities and the per-coordinate null masses."""

    cell: dict[tuple[int, ...], float]
    component_null: np.ndarray

    def __post_init__(self):
        total = sum(self.cell.values())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"cell probabilities sum to {total}, expected 1")


def _log_atom_posteriors(prior: DiscretePrior, Z: np.ndarray,
                         cov: IntraclassCovariance) -> np.ndarray:
    """(n, m) matrix of log prior weight + log likelihood per atom."""
    logw = np.log(prior.weights)
    cols = [log_density(Z, prior.means[j], cov) + logw[j] for j in range(prior.means.shape[0])]
    return np.column_stack(cols)


def component_null_posteriors(prior: DiscretePrior, z, cov: IntraclassCovariance,
                              variant: Variant = Variant.POINT_NULL) -> np.ndarray:
    """Posterior probability that coordinate i is null, for each i.

    Accepts a single observation or an (n, k) batch; the result is a
    length-k vector or an (n, k) matrix accordingly.
    """
    Z, was_vector = as_float_matrix(z, k=cov.k, name="z")
    log_post = _log_atom_posteriors(prior, Z, cov)
    total = _logsumexp(log_post, axis=1)
    if not np.all(np.isfinite(total)):
        # unreachable for finite inputs; kept as a tripwire
        raise ArithmeticError("posterior mass vanished despite log-domain arithmetic")
    labels = np.array([classify_partition(m, variant) for m in prior.means])
    out = np.empty((Z.shape[0], cov.k))
    for i in range(cov.k):
        null_atoms = labels[:, i] == 0
        if not np.any(null_atoms):
            out[:, i] = 0.0
        else:
            out[:, i] = np.exp(_logsumexp(log_post[:, null_atoms], axis=1) - total)
    return out[0] if was_vector else out


def posterior(prior: DiscretePrior, z, cov: IntraclassCovariance,
              variant: Variant = Variant.POINT_NULL) -> PosteriorSummary:
    """Full posterior summary for a single observation."""
    zv = as_float_vector(z, k=cov.k, name="z")
    log_post = _log_atom_posteriors(prior, zv.reshape(1, -1), cov)[0]
    total = _logsumexp(log_post)
    labels = prior.cell_labels(variant)
    cell: dict[tuple[int, ...], float] = {}
    for lab in sorted(set(labels)):
        members = [j for j, l in enumerate(labels) if l == lab]
        cell[lab] = float(np.exp(_logsumexp(log_post[members]) - total))
    comp = component_null_posteriors(prior, zv, cov, variant)
    return PosteriorSummary(cell=cell, component_null=comp)


def bayes_decide(prior: DiscretePrior, z, cov: IntraclassCovariance, b: float,
                 variant: Variant = Variant.POINT_NULL) -> np.ndarray:
    """Reject coordinate i when its posterior null mass is below b/(b+1)."""
    check_positive(b, "b")
    q = component_null_posteriors(prior, z, cov, variant)
    return (q < b / (b + 1.0)).astype(int)


def single_step_bayes_prior(critical_values, b: float, alt: float = 1.0) -> DiscretePrior:
    """Product prior whose Bayes rule reproduces the single-step procedure.

    Requires the independence model (the construction solves each
    coordinate's two-point prior separately).  Per coordinate the prior
    puts mass p at 0 and 1-p at ``alt``, with p solved so the posterior
    null mass crosses b/(b+1) exactly at the coordinate's constant.
    """
    check_positive(b, "b")
    check_positive(alt, "alt")
    rho = getattr(critical_values, "rho", 0.0)
    if rho != 0.0:
        raise ValueError("the matching-prior construction requires rho = 0")
    sigma2 = getattr(critical_values, "sigma2", 1.0)
    if abs(sigma2 - 1.0) > 1e-12:
        raise ValueError("the matching-prior construction requires unit variances")
    c = np.asarray(getattr(critical_values, "values", critical_values), dtype=float)
    k = c.size
    if k > 16:
        raise ValueError("product prior enumeration is guarded at k <= 16")
    # log odds of the null atom: p/(1-p) = b * exp(alt*C_i - alt^2/2)
    log_odds = math.log(b) + alt * c - 0.5 * alt * alt
    p = 1.0 / (1.0 + np.exp(-log_odds))
    means = []
    weights = []
    for bits in itertools.product((0, 1), repeat=k):
        mu = alt * np.asarray(bits, dtype=float)
        w = np.prod(np.where(np.asarray(bits) == 0, p, 1.0 - p))
        means.append(mu)
        weights.append(w)
    return DiscretePrior(np.asarray(means), np.asarray(weights))


def _check_limit_inputs(z, critical_values, n: int) -> tuple[np.ndarray, np.ndarray, int]:
    c = np.asarray(getattr(critical_values, "values", critical_values), dtype=float)
    k = c.size
    if k > MAX_LIMIT_K:
        raise ValueError(f"limit-prior numerators are guarded at k <= {MAX_LIMIT_K}")
    if np.any(np.diff(c) <= 0):
        raise ValueError("limit-prior construction needs strictly increasing constants")
    if int(n) != n or n < 2:
        raise ValueError(f"sequence index n must be an integer >= 2, got {n}")
    zv = as_float_vector(z, k=k, name="z")
    return zv, c, int(n)


def step_down_posterior_log_numerators(z, critical_values, n: int) -> dict[tuple[int, ...], float]:
    """Log posterior-cell numerators of the geometric-ladder prior sequence.

    For a cell label with s active coordinates the numerator averages,
    over all s! assignments of the active coordinates to the scales
    n^k > n^(k-1) > ... , the exponentials of
    sum_i (z_assigned(i) - C_{k+1-i}) n^(k+1-i).  The all-null cell has
    numerator 1.  As n grows the dominating cell is the step-down
    rejection set, which is what makes the induced Bayes actions converge
    to the step-down decision.
    """
    zv, c, n = _check_limit_inputs(z, critical_values, n)
    k = c.size
    scales = np.array([float(n) ** (k - i) for i in range(k)])  # n^k, ..., n^1
    consts = c[::-1]  # C_k, ..., C_1
    out: dict[tuple[int, ...], float] = {}
    for bits in itertools.product((0, 1), repeat=k):
        active = [i for i, bit in enumerate(bits) if bit == 1]
        s = len(active)
        if s == 0:
            out[bits] = 0.0
            continue
        exponents = [
            float(np.dot(zv[list(perm)] - consts[:s], scales[:s]))
            for perm in itertools.permutations(active)
        ]
        out[bits] = float(_logsumexp(np.asarray(exponents)) - math.log(math.factorial(s)))
    return out


def step_down_prior_log_atoms(critical_values, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Materialized atoms of the limit prior sequence, for display or checks.

    Returns mean vectors and unnormalized log weights.  The atom for a
    cell with s active coordinates places the scales n^k .. n^(k+1-s) on
    those coordinates in every order, with log weight
    |mu|^2/2 - sum_i C_{k+1-i} n^(k+1-i) - log(s!).
    """
    k = np.asarray(getattr(critical_values, "values", critical_values), dtype=float).size
    zero = np.zeros(k)
    _, c, n = _check_limit_inputs(zero, critical_values, n)
    scales = np.array([float(n) ** (k - i) for i in range(k)])
    consts = c[::-1]
    means = [zero]
    logw = [0.0]
    for bits in itertools.product((0, 1), repeat=k):
        active = [i for i, bit in enumerate(bits) if bit == 1]
        s = len(active)
        if s == 0:
            continue
        base = -float(np.dot(consts[:s], scales[:s])) - math.log(math.factorial(s))
        for perm in itertools.permutations(active):
            mu = np.zeros(k)
            mu[list(perm)] = scales[:s]
            means.append(mu)
            logw.append(base + 0.5 * float(mu @ mu))
    return np.asarray(means), np.asarray(logw)


@dataclass
class LimitTraceRow:
    n: int
    top_cell: tuple[int, ...]
    top_posterior: float
    action: tuple[int, ...]


@dataclass
class LimitReport:
    """Trace of the induced Bayes actions along the sequence index schedule."""

    rows: list[LimitTraceRow] = field(default_factory=list)
    step_down_action: tuple[int, ...] | None = None
    stabilized_at: int | None = None
    conclusive: bool = False
    boundary: bool = False
    action: tuple[int, ...] | None = None
    matches_step_down: bool | None = None

    def to_table(self) -> str:
        lines = ["n,top_posterior,action,matches_step_down"]
        for row in self.rows:
            bits = "".join(str(b) for b in row.action)
            match = ("" if self.step_down_action is None
                     else str(row.action == self.step_down_action).lower())
            lines.append(f"{row.n},{format(row.top_posterior, '.17g')},{bits},{match}")
        return "\n".join(lines) + "\n"


def bayes_limit_action(z, critical_values, b: float = 1.0,
                       n_schedule=range(2, 17), stable_run: int = 3,
                       boundary_tol: float = 1e-12) -> tuple[np.ndarray | None, LimitReport]:
    """Follow the Bayes actions of the limit prior sequence along a schedule.

    The action is declared stable when the final ``stable_run`` entries of
    the schedule agree and nothing changed after them; early runs of equal
    actions can be transients (the 1/s! weight on a cell is only overcome
    once the slowest margin exponent exceeds log s!), so they never count.
    The report records whether the stabilized action equals the step-down
    decision.  Observations whose sorted coordinates sit exactly on the
    matched constants (within ``boundary_tol``) are flagged inconclusive,
    as are schedules whose tail never settles; neither raises.
    """
    check_positive(b, "b")
    schedule = list(n_schedule)
    if not schedule:
        raise ValueError("n_schedule must be nonempty")
    zv, c, _ = _check_limit_inputs(z, critical_values, min(schedule))
    k = c.size
    report = LimitReport()
    ordered = np.sort(zv)[::-1]
    if np.any(np.abs(ordered - c[::-1]) <= boundary_tol):
        report.boundary = True
    threshold = math.log(b / (b + 1.0))
    actions: list[tuple[int, ...]] = []
    for n in schedule:
        nums = step_down_posterior_log_numerators(zv, critical_values, n)
        labels = list(nums.keys())
        logvals = np.asarray([nums[lab] for lab in labels])
        total = _logsumexp(logvals)
        action = []
        for i in range(k):
            members = [j for j, lab in enumerate(labels) if lab[i] == 0]
            log_qi = _logsumexp(logvals[members]) - total
            action.append(1 if log_qi < threshold else 0)
        action_t = tuple(action)
        top = int(np.argmax(logvals))
        report.rows.append(LimitTraceRow(
            n=n,
            top_cell=labels[top],
            top_posterior=float(np.exp(logvals[top] - total)),
            action=action_t,
        ))
        actions.append(action_t)
    report.step_down_action = tuple(int(a) for a in step_down_decide(zv, critical_values))
    tail = 1
    while tail < len(actions) and actions[-tail - 1] == actions[-1]:
        tail += 1
    if tail >= stable_run:
        report.stabilized_at = report.rows[len(actions) - tail].n
        report.action = actions[-1]
    report.conclusive = report.stabilized_at is not None and not report.boundary
    if report.conclusive:
        report.matches_step_down = report.action == report.step_down_action
        return np.asarray(report.action, dtype=int), report
    return None, report
