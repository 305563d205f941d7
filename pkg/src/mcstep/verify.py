"""Named verification suites behind the ``verify`` command.

Each suite runs a list of checks and returns a report whose text
rendering is deterministic for fixed inputs: no timestamps, fixed check
order, and shortest-round-trip float formatting.  The suites double as
the engine for the acceptance tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .admissibility import (
    counterexample_negative_rho,
    integrand_argmin,
    local_derivative_at_zero,
    section_monotonicity_scan,
    step_up_violation_scan,
)
from .bayes import bayes_decide, bayes_limit_action, single_step_bayes_prior
from .critical_values import solve_constants
from .defaults import DEFAULT_MC_REPS, DEFAULT_SEED
from .gaussian import IntraclassCovariance, sample_mvn
from .model import DecisionRuleMass, ProblemSpec, enumerate_actions
from .procedures import DECIDE_BY_NAME, single_step_decide
from .risk import (
    aggregate_origin_risk,
    mass_rule_tests,
    origin_risk_table,
    risk_scalar,
    rule_mass_risk,
)

STEPWISE_PROCEDURES = ("single-step", "step-down", "step-up")


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    measured: str
    tolerance: str

    def line(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return f"check={self.name} measured={self.measured} tolerance={self.tolerance} status={status}"


@dataclass
class SuiteResult:
    suite: str
    params: dict
    checks: list[CheckResult] = field(default_factory=list)
    info: list[tuple[str, str]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, passed: bool, measured, tolerance) -> None:
        self.checks.append(CheckResult(name, bool(passed), _fmt(measured), str(tolerance)))

    def note(self, name: str, value) -> None:
        self.info.append((name, _fmt(value)))

    def to_report_text(self) -> str:
        lines = [f"suite={self.suite}"]
        for key in sorted(self.params):
            lines.append(f"param.{key}={_fmt(self.params[key])}")
        lines.extend(f"info.{name}={value}" for name, value in self.info)
        lines.extend(check.line() for check in self.checks)
        lines.append(f"result={'pass' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    if isinstance(x, (list, tuple)):
        return "(" + ",".join(_fmt(v) for v in x) + ")"
    return str(x)


def _solved(procedure: str, spec: ProblemSpec, mc_reps: int, seed: int):
    return solve_constants(procedure, spec, mc_reps=mc_reps, seed=seed)


def _decider(procedure: str, constants):
    fn = DECIDE_BY_NAME[procedure]
    return lambda Z: fn(Z, constants)


# ----------------------------------------------------------------------
# origin-risk identity suites


def run_a1(k: int = 3, b: float = 1.0, rho: float = 0.3, alpha: float = 0.05,
           mc_reps: int = 200_000, seed: int = DEFAULT_SEED, **_) -> SuiteResult:
    """Origin-risk table identities from one shared draw set.

    For every procedure the all-null origin risk equals the mean total
    rejection count, the all-alternatives origin risk equals b times the
    mean total acceptance count, and the b-weighted sum of the two is
    exactly k*b.
    """
    result = SuiteResult("a1", dict(k=k, b=b, rho=rho, alpha=alpha,
                                    mc_reps=mc_reps, seed=seed))
    spec = ProblemSpec(k=k, rho=rho, b=b, alpha=alpha)
    tol = 1e-10
    for proc in STEPWISE_PROCEDURES:
        constants = _solved(proc, spec, mc_reps, seed)
        table = origin_risk_table(_decider(proc, constants), spec,
                                  mc_reps=mc_reps, seed=seed)
        total_tests = float(table.mean_tests.sum())
        r_null = table[np.zeros(k, dtype=int)].mean
        r_ones = table[np.ones(k, dtype=int)].mean
        result.add(f"{proc}.null_risk_is_mean_rejections",
                   abs(r_null - total_tests) <= tol, r_null - total_tests, tol)
        result.add(f"{proc}.ones_risk_is_b_mean_acceptances",
                   abs(r_ones - b * (k - total_tests)) <= tol,
                   r_ones - b * (k - total_tests), tol)
        weighted = b * r_null + r_ones
        result.add(f"{proc}.weighted_origin_sum_is_kb",
                   abs(weighted - k * b) <= tol, weighted - k * b, tol)
    return result


def run_aggregate(ks=(2, 3, 4, 5), b: float = 1.0, rho: float = 0.3,
                  alpha: float = 0.05, mc_reps: int = 200_000,
                  seed: int = DEFAULT_SEED, k: int | None = None, **_) -> SuiteResult:
    """Shared-draw equality of label-class origin-risk sums with their
    closed form, for every class size 1 <= r <= k-1."""
    if k is not None:
        ks = (k,)
    result = SuiteResult("aggregate", dict(ks=tuple(ks), b=b, rho=rho, alpha=alpha,
                                           mc_reps=mc_reps, seed=seed))
    for kk in ks:
        spec = ProblemSpec(k=kk, rho=rho, b=b, alpha=alpha)
        tol = 1e-9
        for proc in STEPWISE_PROCEDURES:
            constants = _solved(proc, spec, mc_reps, seed)
            table = origin_risk_table(_decider(proc, constants), spec,
                                      mc_reps=mc_reps, seed=seed)
            for r in range(1, kk):
                lhs, rhs = aggregate_origin_risk(table, r)
                result.add(f"k{kk}.{proc}.r{r}", abs(lhs - rhs) <= tol, lhs - rhs, tol)
    return result


def run_delta_psi(ks=(2, 3), n_rules: int = 50, mc_reps: int = 100_000,
                  seed: int = DEFAULT_SEED, k: int | None = None, **_) -> SuiteResult:
    """Randomized-rule risk equals the risk of its induced tests on shared
    draws, for random constant rules."""
    if k is not None:
        ks = (k,)
    result = SuiteResult("delta-psi", dict(ks=tuple(ks), n_rules=n_rules,
                                           mc_reps=mc_reps, seed=seed))
    rng = np.random.default_rng(seed)
    for kk in ks:
        spec = ProblemSpec(k=kk, rho=0.2, b=1.0)
        cov = IntraclassCovariance.from_spec(spec)
        mu = np.abs(rng.normal(size=kk))
        draws = sample_mvn(cov, mu, mc_reps, seed + kk)
        worst = 0.0
        actions = enumerate_actions(kk)
        for _ in range(n_rules):
            raw = rng.dirichlet(np.ones(actions.shape[0]))
            delta = DecisionRuleMass({tuple(a): float(w) for a, w in zip(actions, raw)})
            lhs = rule_mass_risk(delta, mu, spec, draws=draws).mean
            rhs = risk_scalar(mass_rule_tests(delta), mu, spec, draws=draws).mean
            worst = max(worst, abs(lhs - rhs))
        result.add(f"k{kk}.max_abs_difference", worst <= 1e-12, worst, 1e-12)
    return result


# ----------------------------------------------------------------------
# error-rate suite


def run_fwe(ks=(2, 3, 5), rhos=(0.0, 0.5), alpha: float = 0.05,
            mc_reps: int = DEFAULT_MC_REPS, solver_reps: int = 4_000_000,
            seed: int = DEFAULT_SEED, k: int | None = None,
            rho: float | None = None, **_) -> SuiteResult:
    """Independent Monte Carlo certification that the solved constants put
    the probability of any false rejection at alpha under the global null,
    for both the single-step and step-down procedures."""
    if k is not None:
        ks = (k,)
    if rho is not None:
        rhos = (rho,)
    result = SuiteResult("fwe", dict(ks=tuple(ks), rhos=tuple(rhos), alpha=alpha,
                                     mc_reps=mc_reps, solver_reps=solver_reps, seed=seed))
    for kk in ks:
        for rr in rhos:
            spec = ProblemSpec(k=kk, rho=rr, alpha=alpha)
            cov = IntraclassCovariance.from_spec(spec)
            # the verification stream must be independent of the solver stream
            draws = sample_mvn(cov, np.zeros(kk), mc_reps, seed + 104729)
            for proc in ("single-step", "step-down"):
                constants = _solved(proc, spec, solver_reps, seed)
                any_rejection = DECIDE_BY_NAME[proc](draws, constants).max(axis=1)
                p_hat = float(any_rejection.mean())
                se = math.sqrt(max(p_hat * (1.0 - p_hat), 1e-12) / mc_reps)
                err = abs(p_hat - alpha)
                result.add(f"k{kk}.rho{rr}.{proc}", err <= 3.0 * se, p_hat, f"{alpha}+-{3*se:.3e}")
    return result


# ----------------------------------------------------------------------
# Bayes suites


def run_proper_bayes(bs=(1.0, 2.0), alpha: float = 0.05, grid_points: int = 101,
                     grid_range=(-4.0, 6.0), seed: int = DEFAULT_SEED,
                     b: float | None = None, **_) -> SuiteResult:
    """The product prior's Bayes rule equals the single-step rule at every
    point of a two-dimensional grid, for the independence model."""
    if b is not None:
        bs = (b,)
    result = SuiteResult("proper-bayes", dict(bs=tuple(bs), alpha=alpha,
                                              grid_points=grid_points,
                                              grid_range=tuple(grid_range), seed=seed))
    spec = ProblemSpec(k=2, rho=0.0, alpha=alpha)
    cov = IntraclassCovariance.from_spec(spec)
    constants = solve_constants("single-step", spec)
    axis = np.linspace(grid_range[0], grid_range[1], grid_points)
    g1, g2 = np.meshgrid(axis, axis, indexing="ij")
    Z = np.column_stack([g1.ravel(), g2.ravel()])
    reference = single_step_decide(Z, constants)
    for bb in bs:
        prior = single_step_bayes_prior(constants, bb)
        actions = bayes_decide(prior, Z, cov, bb)
        mismatches = int(np.count_nonzero(np.any(actions != reference, axis=1)))
        result.add(f"b{bb}.grid_mismatches", mismatches == 0, mismatches, 0)
    return result


def run_bayes_limit(n_z: int = 200, k: int = 3, alpha: float = 0.05,
                    margin: float = 0.1, b: float = 1.0, seed: int = DEFAULT_SEED,
                    n_schedule=tuple(range(2, 17)), **_) -> SuiteResult:
    """Along the prior sequence schedule, the induced Bayes actions
    stabilize and reproduce step-down for every sampled observation whose
    sorted comparisons clear the constants by at least ``margin``; exact
    boundary observations are reported inconclusive, never mismatched."""
    result = SuiteResult("bayes-limit", dict(n_z=n_z, k=k, alpha=alpha, margin=margin,
                                             b=b, seed=seed,
                                             n_schedule=tuple(n_schedule)))
    spec = ProblemSpec(k=k, rho=0.0, alpha=alpha)
    constants = solve_constants("step-down", spec)
    c_desc = np.asarray(constants.values)[::-1]
    rng = np.random.default_rng(seed)
    accepted = 0
    stabilized = 0
    matched = 0
    while accepted < n_z:
        center = rng.uniform(-1.0, 4.0, size=k)
        z = rng.normal(loc=center, scale=1.0)
        ordered = np.sort(z)[::-1]
        if np.min(np.abs(ordered - c_desc)) <= margin:
            continue
        accepted += 1
        action, report = bayes_limit_action(z, constants, b=b, n_schedule=n_schedule)
        if report.conclusive:
            stabilized += 1
            if report.matches_step_down:
                matched += 1
    result.add("stabilized", stabilized == n_z, stabilized, n_z)
    result.add("matches_step_down", matched == n_z, matched, n_z)
    boundary_z = np.concatenate([[c_desc[0]], np.sort(rng.uniform(-1, 1, size=k - 1))[::-1] - 2.0])
    _, boundary_report = bayes_limit_action(boundary_z, constants, b=b, n_schedule=n_schedule)
    result.add("boundary_flagged_inconclusive",
               boundary_report.boundary and not boundary_report.conclusive
               and boundary_report.matches_step_down is None,
               boundary_report.boundary, True)
    return result


# ----------------------------------------------------------------------
# admissibility suites


def run_local_derivative(k: int = 3, rho: float = 0.3, b: float = 1.0,
                         alpha: float = 0.05, argmin_samples: int = 10_000,
                         mc_reps: int = DEFAULT_MC_REPS, seed: int = DEFAULT_SEED,
                         **_) -> SuiteResult:
    """Pointwise integrand minimization recovers the single-step action,
    and the analytic origin derivative agrees with its finite-difference
    counterpart for all three procedures."""
    result = SuiteResult("local-derivative", dict(k=k, rho=rho, b=b, alpha=alpha,
                                                  argmin_samples=argmin_samples,
                                                  mc_reps=mc_reps, seed=seed))
    spec = ProblemSpec(k=k, rho=rho, b=b, alpha=alpha)
    cov = IntraclassCovariance.from_spec(spec)
    single = solve_constants("single-step", spec)
    Z = sample_mvn(cov, np.zeros(k), argmin_samples, seed + 13)
    clear = np.all(np.abs(Z - np.asarray(single.values)) >= 1e-12, axis=1)
    argmins = integrand_argmin(Z[clear], single, cov, b)
    reference = single_step_decide(Z[clear], single)
    mismatches = int(np.count_nonzero(np.any(argmins != reference, axis=1)))
    result.add("argmin_matches_single_step", mismatches == 0, mismatches, 0)
    for proc in STEPWISE_PROCEDURES:
        constants = _solved(proc, spec, mc_reps, seed)
        analytic, fd = local_derivative_at_zero(
            _decider(proc, constants), cov, b, single,
            mc_reps=mc_reps, seed=seed)
        gap = abs(analytic.mean - fd.mean)
        limit = max(3.0 * math.hypot(analytic.std_error, fd.std_error),
                    1e-3 * abs(analytic.mean))
        result.add(f"{proc}.analytic_vs_finite_difference", gap <= limit,
                   gap, limit)
    return result


def run_monotonicity(procedure: str = "single-step", rhos=(0.0,), k: int = 3,
                     alpha: float = 0.05, n_sections: int = 100,
                     mc_reps: int = DEFAULT_MC_REPS, seed: int = DEFAULT_SEED,
                     rho: float | None = None, **_) -> SuiteResult:
    """Zero section-monotonicity violations across every component for the
    named procedure at each correlation."""
    if rho is not None:
        rhos = (rho,)
    result = SuiteResult("monotonicity", dict(procedure=procedure, rhos=tuple(rhos),
                                              k=k, alpha=alpha, n_sections=n_sections,
                                              mc_reps=mc_reps, seed=seed))
    result.note("grid", "y in [-5,5] step 0.05")
    for rr in rhos:
        spec = ProblemSpec(k=k, rho=rr, alpha=alpha)
        cov = IntraclassCovariance.from_spec(spec)
        constants = _solved(procedure, spec, mc_reps, seed)
        result.note(f"rho{rr}.constants", tuple(constants.values))
        total = 0
        for component in range(k):
            found = section_monotonicity_scan(
                _decider(procedure, constants), constants, cov,
                component=component, n_sections=n_sections, seed=seed + component)
            total += len(found)
        result.add(f"rho{rr}.violations", total == 0, total, 0)
    return result


def run_counterexample(ks=(2, 3), rhos=(-0.05, -0.2, -0.4), alpha: float = 0.05,
                       epsilon: float = 0.05, mc_reps: int = DEFAULT_MC_REPS,
                       seed: int = DEFAULT_SEED, k: int | None = None,
                       rho: float | None = None, **_) -> SuiteResult:
    """The negative-correlation two-point construction witnesses a
    step-down violation with an exactly axis-aligned natural-coordinate
    difference, and a seeded scan finds a step-up violation."""
    if k is not None:
        ks = (k,)
    if rho is not None:
        rhos = (rho,)
    result = SuiteResult("counterexample", dict(ks=tuple(ks), rhos=tuple(rhos),
                                                alpha=alpha, epsilon=epsilon,
                                                mc_reps=mc_reps, seed=seed))
    for kk in ks:
        for rr in rhos:
            spec = ProblemSpec(k=kk, rho=rr, alpha=alpha)
            cov = IntraclassCovariance.from_spec(spec)
            down = _solved("step-down", spec, mc_reps, seed)
            report = counterexample_negative_rho(cov, down, epsilon)
            expected = np.zeros(kk)
            expected[0] = epsilon
            y_err = float(np.max(np.abs(report.y_difference - expected)))
            prefix = f"k{kk}.rho{rr}"
            result.note(f"{prefix}.z_star", tuple(report.z_star))
            result.note(f"{prefix}.z_star_star", tuple(report.z_star_star))
            result.note(f"{prefix}.y_difference", tuple(report.y_difference))
            result.add(f"{prefix}.step_down_construction",
                       report.verified, f"accept={report.accepts_at_star},"
                       f"reject={report.rejects_at_star_star},y_err={y_err:.3e}",
                       "accept and reject and y_err<=1e-10")
            up = _solved("step-up", spec, mc_reps, seed)
            found = step_up_violation_scan(cov, up, epsilon)
            result.add(f"{prefix}.step_up_scan", len(found) >= 1, len(found), ">=1")
    return result


SUITES = {
    "a1": run_a1,
    "aggregate": run_aggregate,
    "fwe": run_fwe,
    "local-derivative": run_local_derivative,
    "bayes-limit": run_bayes_limit,
    "proper-bayes": run_proper_bayes,
    "monotonicity": run_monotonicity,
    "counterexample": run_counterexample,
    "delta-psi": run_delta_psi,
}


def run_suite(name: str, **params) -> SuiteResult:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    clean = {key: value for key, value in params.items() if value is not None}
    return SUITES[name](**clean)
