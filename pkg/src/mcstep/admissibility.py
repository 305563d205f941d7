"""Numerical admissibility certificates for the decision procedures.

Two checkable surrogates are implemented, never a proof:

* section monotonicity in natural coordinates y = precision @ z: a
  component test whose rejection indicator is nondecreasing in y_i on
  every section (the other coordinates held fixed) is admissible for the
  per-component vector risk.  Scans search for 1 -> 0 transitions; an
  explicit two-point construction exhibits such a transition for the
  stepwise procedures whenever the common correlation is negative.

* a local risk-derivative criterion at the origin: among rules whose full
  table of origin risks matches, the single-step rule minimizes the
  derivative of a particular nonnegatively weighted risk combination, and
  the pointwise minimizer of the derivative's integrand over all 2^k
  actions is the single-step action itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import as_float_matrix, as_float_vector, check_positive
from .defaults import DEFAULT_MC_REPS, DEFAULT_SEED
from .gaussian import IntraclassCovariance, sample_mvn
from .model import enumerate_actions, label_tuple
from .procedures import step_down_decide, step_up_decide
from .risk import RiskEstimate


def to_natural(z, cov: IntraclassCovariance) -> np.ndarray:
    """Natural (precision-transformed) coordinates y = precision @ z."""
    Z, was_vector = as_float_matrix(z, k=cov.k, name="z")
    Y = Z @ cov.precision()
    return Y[0] if was_vector else Y


def from_natural(y, cov: IntraclassCovariance) -> np.ndarray:
    """Inverse of ``to_natural``: z = covariance @ y."""
    Y, was_vector = as_float_matrix(y, k=cov.k, name="y")
    Z = Y @ cov.matrix()
    return Z[0] if was_vector else Z


def single_step_section_rejects(y, critical_values, rho: float) -> bool:
    """Section form of the single-step test for the first coordinate.

    With unit variances, z_1 = y_1 + rho * sum(y_2..y_k), so the test
    rejects exactly when that linear form exceeds the common constant,
    which is visibly nondecreasing in y_1.
    """
    c = np.asarray(getattr(critical_values, "values", critical_values), dtype=float)
    yv = as_float_vector(y, k=c.size, name="y")
    return bool(yv[0] + rho * yv[1:].sum() > c[0])


def stepdown_section_threshold(z_rest, critical_values) -> float:
    """The staircase threshold for the first coordinate under step-down.

    With the other coordinates fixed at ``z_rest``, step-down rejects the
    first hypothesis exactly when z_1 exceeds C_{k-m}, where m counts how
    many of the sorted remaining coordinates clear their constants in
    sequence (the largest against C_k, the next against C_{k-1}, and so
    on, stopping at the first failure).  The threshold is nonincreasing
    in every coordinate of ``z_rest``.
    """
    c = np.asarray(getattr(critical_values, "values", critical_values), dtype=float)
    k = c.size
    rest = as_float_vector(z_rest, k=k - 1, name="z_rest")
    ordered = np.sort(rest)[::-1]
    m = 0
    for i, value in enumerate(ordered):
        if value > c[k - 1 - i]:
            m += 1
        else:
            break
    return float(c[k - 1 - m])


@dataclass(frozen=True)
class SectionViolation:
    """A rejection lost while the swept natural coordinate increased."""

    component: int
    section: tuple[float, ...]
    y_before: float
    y_after: float


def _comparison_margin(Z: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Distance of each row from the nearest sorted-comparison boundary."""
    ordered = np.sort(Z, axis=1)
    return np.abs(ordered - c).min(axis=1)


def section_monotonicity_scan(decide, critical_values, cov: IntraclassCovariance,
                              component: int = 0, n_sections: int = 100,
                              y_range: tuple[float, float] = (-5.0, 5.0),
                              step: float = 0.05, seed: int = DEFAULT_SEED,
                              sections: np.ndarray | None = None,
                              tie_tol: float = 1e-9) -> list[SectionViolation]:
    """Sweep y_component over a grid on random sections, recording each
    1 -> 0 transition of the component's rejection bit.

    Transitions whose endpoints sit within ``tie_tol`` of a comparison
    boundary are not counted; they reflect the measure-zero tie handling
    rather than a genuine monotonicity failure.
    """
    c = np.asarray(getattr(critical_values, "values", critical_values), dtype=float)
    if step <= 0:
        raise ValueError("grid step must be positive")
    k = cov.k
    if not 0 <= component < k:
        raise ValueError(f"component must be in [0, {k}), got {component}")
    if sections is None:
        rng = np.random.default_rng(seed)
        sections = rng.uniform(y_range[0], y_range[1], size=(n_sections, k - 1))
    else:
        sections = np.atleast_2d(np.asarray(sections, dtype=float))
        if sections.shape[1] != k - 1:
            raise ValueError(f"sections must have {k - 1} columns")
    sweep = np.arange(y_range[0], y_range[1] + step / 2, step)
    others = [i for i in range(k) if i != component]
    violations: list[SectionViolation] = []
    for sec in sections:
        Y = np.empty((sweep.size, k))
        Y[:, component] = sweep
        Y[:, others] = sec
        Z = from_natural(Y, cov)
        bits = np.asarray(decide(Z))[:, component]
        margins = _comparison_margin(Z, c)
        drops = np.nonzero((bits[:-1] == 1) & (bits[1:] == 0))[0]
        for t in drops:
            if margins[t] <= tie_tol or margins[t + 1] <= tie_tol:
                continue
            violations.append(SectionViolation(
                component=component,
                section=tuple(float(v) for v in sec),
                y_before=float(sweep[t]),
                y_after=float(sweep[t + 1]),
            ))
    return violations


@dataclass(frozen=True)
class CounterexampleReport:
    """Two observations on one natural-coordinate section that witness a
    monotonicity failure of step-down for the first coordinate."""

    z_star: np.ndarray
    z_star_star: np.ndarray
    y_star: np.ndarray
    y_star_star: np.ndarray
    epsilon: float
    first_cov_column: np.ndarray
    accepts_at_star: bool
    rejects_at_star_star: bool
    y_difference: np.ndarray

    @property
    def verified(self) -> bool:
        expected = np.zeros_like(self.y_difference)
        expected[0] = self.epsilon
        return (self.accepts_at_star and self.rejects_at_star_star
                and bool(np.allclose(self.y_difference, expected, atol=1e-10)))


def counterexample_negative_rho(cov: IntraclassCovariance, critical_values,
                                epsilon: float) -> CounterexampleReport:
    """Explicit two-point monotonicity violation for step-down at rho < 0.

    The first point sits on the acceptance boundary, with the first
    coordinate midway between the top two constants and every other
    coordinate at the top constant; the second subtracts epsilon times
    the first covariance column, which lowers only the first natural
    coordinate yet turns the acceptance into a full rejection.
    """
    check_positive(epsilon, "epsilon")
    if cov.rho >= 0:
        raise ValueError("the construction requires rho < 0")
    if abs(cov.sigma2 - 1.0) > 1e-12:
        raise ValueError("the construction assumes unit variances")
    c = np.asarray(getattr(critical_values, "values", critical_values), dtype=float)
    k = cov.k
    if k < 2:
        raise ValueError("the construction needs k >= 2")
    mid = 0.5 * (c[-2] + c[-1])
    if not mid - epsilon > c[-2]:
        raise ValueError(
            "epsilon too large: the shifted first coordinate "
            f"{mid - epsilon} does not stay above the next constant {c[-2]}"
        )
    z_star = np.full(k, c[-1])
    z_star[0] = mid
    r = cov.matrix()[:, 0]
    z_star_star = z_star - epsilon * r
    a_star = step_down_decide(z_star, critical_values)
    a_star_star = step_down_decide(z_star_star, critical_values)
    y_star = to_natural(z_star, cov)
    y_star_star = to_natural(z_star_star, cov)
    return CounterexampleReport(
        z_star=z_star,
        z_star_star=z_star_star,
        y_star=y_star,
        y_star_star=y_star_star,
        epsilon=float(epsilon),
        first_cov_column=r,
        accepts_at_star=bool(a_star[0] == 0),
        rejects_at_star_star=bool(a_star_star[0] == 1),
        y_difference=y_star - y_star_star,
    )


def step_up_violation_scan(cov: IntraclassCovariance, critical_values,
                           epsilon: float) -> list[SectionViolation]:
    """Locate a step-up monotonicity violation by a local section scan.

    The scan is seeded at the analogous boundary point for step-up: first
    coordinate midway between the top two constants, the rest just below
    the smallest constant.  Moving down the section by epsilon times the
    first covariance column pushes the minimum coordinate above the
    smallest constant and flips the acceptance into a full rejection, so
    a fine sweep of the first natural coordinate must cross a 1 -> 0
    transition.
    """
    check_positive(epsilon, "epsilon")
    if cov.rho >= 0:
        raise ValueError("the scan construction requires rho < 0")
    if abs(cov.sigma2 - 1.0) > 1e-12:
        raise ValueError("the scan construction assumes unit variances")
    c = np.asarray(getattr(critical_values, "values", critical_values), dtype=float)
    k = cov.k
    if k < 2:
        raise ValueError("the scan needs k >= 2")
    # 0.43 keeps the induced decision boundary strictly between grid points
    # of the epsilon/20 sweep, so the tie filter cannot swallow the flip.
    eta = 0.43 * epsilon * abs(cov.rho)
    anchor = np.full(k, c[0] - eta)
    anchor[0] = 0.5 * (c[-2] + c[-1])
    if not anchor[0] - epsilon > c[0] + eta:
        raise ValueError(
            "epsilon too large: the swept first coordinate "
            f"{anchor[0] - epsilon} would cross below the smallest constant region"
        )
    y_anchor = to_natural(anchor, cov)
    section = np.delete(y_anchor, 0).reshape(1, -1)
    lo = y_anchor[0] - 2.0 * epsilon
    hi = y_anchor[0] + epsilon
    return section_monotonicity_scan(
        lambda Z: step_up_decide(Z, critical_values),
        critical_values, cov, component=0,
        y_range=(float(lo), float(hi)), step=epsilon / 20.0,
        sections=section,
    )


def ones_weight_factor(b: float, rho: float) -> float:
    """The all-alternatives weight factor (1 + b rho) / (b (1 - rho)).

    Positive exactly when 1 + b rho > 0, which is the condition under
    which the local-derivative certificate applies.
    """
    check_positive(b, "b")
    if rho >= 1.0:
        raise ValueError("rho = 1 makes the weight factor singular")
    return (1.0 + b * rho) / (b * (1.0 - rho))


@dataclass(frozen=True)
class LocalWeightScheme:
    """Nonzero label weights of the local-derivative risk combination.

    Only the all-null label, the k single-alternative labels, and the
    all-alternatives label carry weight; the last is scaled by
    ``ones_factor``.  ``evaluate`` returns the weights at displacement
    ``delta`` along each label direction.
    """

    k: int
    b: float
    rho: float
    critical_values: tuple[float, ...]
    ones_factor: float

    def support(self) -> list[tuple[np.ndarray, float]]:
        """(label, weight-at-zero) pairs for the nonzero labels, excluding
        the all-null label whose term never varies with the displacement.

        For k = 1 the single-alternative label and the all-alternatives
        label coincide; the all-alternatives weight wins.
        """
        if self.k == 1:
            return [(np.ones(1, dtype=int), self.ones_factor)]
        out = [(unit_label(self.k, i), 1.0) for i in range(self.k)]
        out.append((np.ones(self.k, dtype=int), self.ones_factor))
        return out

    def evaluate(self, delta: float, cov: IntraclassCovariance) -> dict[tuple[int, ...], float]:
        c = np.asarray(self.critical_values, dtype=float)
        precision = cov.precision()
        weights = {label_tuple(np.zeros(self.k, dtype=int)): 1.0}
        for v, scale in self.support():
            rate = float(c @ precision @ v)
            weights[label_tuple(v)] = scale * math.exp(-rate * delta)
        return weights


def unit_label(k: int, i: int) -> np.ndarray:
    out = np.zeros(k, dtype=int)
    out[i] = 1
    return out


def local_weight_scheme(critical_values, cov: IntraclassCovariance, b: float) -> LocalWeightScheme:
    c = np.asarray(getattr(critical_values, "values", critical_values), dtype=float)
    if c.size != cov.k:
        raise ValueError("critical values do not match the covariance dimension")
    return LocalWeightScheme(
        k=cov.k, b=float(b), rho=cov.rho,
        critical_values=tuple(float(x) for x in c),
        ones_factor=ones_weight_factor(b, cov.rho),
    )


def _derivative_values(tests, scheme: LocalWeightScheme, cov: IntraclassCovariance,
                       Z: np.ndarray) -> np.ndarray:
    """Per-draw values of the analytic derivative integrand at the origin."""
    c = np.asarray(scheme.critical_values)
    precision = cov.precision()
    psi = np.asarray(tests(Z), dtype=float)
    zc = Z - c
    total = np.zeros(Z.shape[0])
    psi_sum = psi.sum(axis=1)
    for v, scale in scheme.support():
        rate = zc @ (precision @ v)
        bracket = psi_sum + scheme.b * v.sum() - (1.0 + scheme.b) * (psi @ v)
        total += scale * rate * bracket
    return total


def _weighted_sum_values(tests, scheme: LocalWeightScheme, cov: IntraclassCovariance,
                         noise: np.ndarray, delta: float) -> np.ndarray:
    """Per-draw values of the weighted risk combination at displacement delta.

    The same centered noise is reused for every label (common random
    numbers); the label's mean displacement is added before deciding.
    """
    b = scheme.b
    psi0 = np.asarray(tests(noise), dtype=float)
    total = psi0.sum(axis=1)  # all-null label, weight 1, loss psi'1
    weights = scheme.evaluate(delta, cov)
    for v, _ in scheme.support():
        lam = weights[label_tuple(v)]
        shifted = noise + delta * v
        psi = np.asarray(tests(shifted), dtype=float)
        loss_vals = psi @ (1.0 - v) + b * ((1.0 - psi) @ v)
        total = total + lam * loss_vals
    return total


def local_derivative_at_zero(tests, cov: IntraclassCovariance, b: float,
                             critical_values, mc_reps: int = DEFAULT_MC_REPS,
                             seed: int = DEFAULT_SEED, fd_step: float = 1e-3
                             ) -> tuple[RiskEstimate, RiskEstimate]:
    """Analytic and finite-difference estimates of the origin derivative of
    the weighted risk combination.

    The analytic side averages the derivative integrand under the null
    density; the finite-difference side takes a central difference of the
    weighted sum with common random numbers across the two displacements.
    Requires 1 + b * rho != 0.
    """
    if abs(1.0 + b * cov.rho) < 1e-12:
        raise ValueError("1 + b*rho = 0 makes the weight scheme degenerate")
    scheme = local_weight_scheme(critical_values, cov, b)
    origin = np.zeros(cov.k)

    Z = sample_mvn(cov, origin, mc_reps, seed)
    analytic_vals = _derivative_values(tests, scheme, cov, Z)
    analytic = RiskEstimate(float(analytic_vals.mean()),
                            float(analytic_vals.std(ddof=1)) / math.sqrt(mc_reps),
                            mc_reps, seed)

    fd_seed = seed + 1_000_003
    noise = sample_mvn(cov, origin, mc_reps, fd_seed)
    plus = _weighted_sum_values(tests, scheme, cov, noise, +fd_step)
    minus = _weighted_sum_values(tests, scheme, cov, noise, -fd_step)
    per_draw = (plus - minus) / (2.0 * fd_step)
    finite_diff = RiskEstimate(float(per_draw.mean()),
                               float(per_draw.std(ddof=1)) / math.sqrt(mc_reps),
                               mc_reps, fd_seed)
    return analytic, finite_diff


def integrand_argmin(z, critical_values, cov: IntraclassCovariance, b: float) -> np.ndarray:
    """Minimize the derivative integrand over all 2^k actions by enumeration.

    With the scheme's all-alternatives factor the data-dependent part of
    the integrand collapses to -(1+b) * a'(z - C) plus terms free of the
    action, so the minimizer is the single-step action except on the
    measure-zero set where some coordinate equals its constant.
    """
    scheme = local_weight_scheme(critical_values, cov, b)
    c = np.asarray(scheme.critical_values)
    Z, was_vector = as_float_matrix(z, k=cov.k, name="z")
    precision = cov.precision()
    actions = enumerate_actions(cov.k).astype(float)
    zc = Z - c
    values = np.zeros((Z.shape[0], actions.shape[0]))
    for v, scale in scheme.support():
        rate = zc @ (precision @ v)  # (n,)
        bracket = actions.sum(axis=1) + b * v.sum() - (1.0 + b) * (actions @ v)  # (2^k,)
        values += scale * rate[:, None] * bracket[None, :]
    best = np.argmin(values, axis=1)
    out = enumerate_actions(cov.k)[best]
    return out[0] if was_vector else out
