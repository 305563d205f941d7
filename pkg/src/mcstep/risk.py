"""Monte Carlo risk calculus for additive one-sided testing losses.

The scalar risk of a rule at mean mu is E[psi'(1 - v) + b (1 - psi)' v]
where v labels the cell of mu and psi collects the per-coordinate
rejection indicators (or probabilities).  At the origin every cell label
is a legitimate continuation, so a rule has a full table of origin risks
R_v indexed by all 2^k labels; those estimates are affine in the mean
rejection vector, and computing them from one shared draw set makes the
algebraic identities between them hold exactly rather than only within
Monte Carlo error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import as_float_vector
from .defaults import DEFAULT_MC_REPS, DEFAULT_SEED
from .gaussian import IntraclassCovariance, sample_mvn
from .model import (
    DecisionRuleMass,
    ProblemSpec,
    classify_partition,
    enumerate_actions,
    label_tuple,
    labels_with_ones,
)


@dataclass(frozen=True)
class RiskEstimate:
    mean: float
    std_error: float
    n_reps: int
    seed: int | None

    def interval(self, width: float = 3.0) -> tuple[float, float]:
        return (self.mean - width * self.std_error, self.mean + width * self.std_error)


def _draws_for(spec: ProblemSpec, mu: np.ndarray, mc_reps: int, seed: int,
               draws: np.ndarray | None) -> tuple[np.ndarray, int, int | None]:
    if draws is not None:
        if draws.ndim != 2 or draws.shape[1] != spec.k:
            raise ValueError("supplied draws must be an (n, k) matrix")
        return draws, draws.shape[0], None
    cov = IntraclassCovariance.from_spec(spec)
    return sample_mvn(cov, mu, mc_reps, seed), mc_reps, seed


def _tests_matrix(tests, Z: np.ndarray, k: int) -> np.ndarray:
    psi = np.asarray(tests(Z), dtype=float)
    if psi.shape != Z.shape:
        raise ValueError(f"rule returned shape {psi.shape}, expected {Z.shape}")
    if psi.min() < -1e-12 or psi.max() > 1.0 + 1e-12:
        raise ValueError("test values must lie in [0, 1]")
    return psi


def _estimate(values: np.ndarray, seed: int | None) -> RiskEstimate:
    n = values.shape[0]
    sd = float(values.std(ddof=1)) if n > 1 else 0.0
    return RiskEstimate(float(values.mean()), sd / math.sqrt(n), n, seed)


def risk_scalar(tests, mu, spec: ProblemSpec, mc_reps: int = DEFAULT_MC_REPS,
                seed: int = DEFAULT_SEED, draws: np.ndarray | None = None) -> RiskEstimate:
    """Estimate the scalar risk of a rule at mean ``mu``.

    ``tests`` maps an (n, k) draw matrix to per-coordinate rejection
    values in [0, 1].  ``draws`` overrides the sampling step so identity
    checks can share one draw set across several estimates.
    """
    mu = as_float_vector(mu, k=spec.k, name="mu")
    v = classify_partition(mu, spec.variant)
    Z, n, used_seed = _draws_for(spec, mu, mc_reps, seed, draws)
    psi = _tests_matrix(tests, Z, spec.k)
    values = psi @ (1.0 - v) + spec.b * ((1.0 - psi) @ v)
    return _estimate(values, used_seed)


def risk_vector(tests, mu, spec: ProblemSpec, mc_reps: int = DEFAULT_MC_REPS,
                seed: int = DEFAULT_SEED, draws: np.ndarray | None = None) -> list[RiskEstimate]:
    """Per-coordinate risks from one draw set; they sum to the scalar risk."""
    mu = as_float_vector(mu, k=spec.k, name="mu")
    v = classify_partition(mu, spec.variant)
    Z, n, used_seed = _draws_for(spec, mu, mc_reps, seed, draws)
    psi = _tests_matrix(tests, Z, spec.k)
    out = []
    for i in range(spec.k):
        comp = psi[:, i] if v[i] == 0 else spec.b * (1.0 - psi[:, i])
        out.append(_estimate(comp, used_seed))
    return out


@dataclass(frozen=True)
class OriginRiskTable:
    """Origin risks R_v for every label v, all from one shared draw set.

    ``mean_tests`` is the vector of mean rejection values at the origin;
    every entry of ``estimates`` is an exact affine function of it.
    """

    estimates: dict[tuple[int, ...], RiskEstimate]
    mean_tests: np.ndarray
    b: float
    k: int
    n_reps: int
    seed: int | None

    def __getitem__(self, v) -> RiskEstimate:
        return self.estimates[label_tuple(v)]


def origin_risk_table(tests, spec: ProblemSpec, mc_reps: int = DEFAULT_MC_REPS,
                      seed: int = DEFAULT_SEED, draws: np.ndarray | None = None) -> OriginRiskTable:
    """Estimate R_v at the origin for all 2^k labels from one draw set."""
    origin = np.zeros(spec.k)
    Z, n, used_seed = _draws_for(spec, origin, mc_reps, seed, draws)
    psi = _tests_matrix(tests, Z, spec.k)
    mean_tests = psi.mean(axis=0)
    cov = np.cov(psi.T, ddof=1).reshape(spec.k, spec.k) if n > 1 else np.zeros((spec.k, spec.k))
    estimates: dict[tuple[int, ...], RiskEstimate] = {}
    for v in enumerate_actions(spec.k):
        w = (1.0 - v) - spec.b * v
        mean = float(w @ mean_tests + spec.b * v.sum())
        var = float(w @ cov @ w)
        estimates[label_tuple(v)] = RiskEstimate(mean, math.sqrt(max(var, 0.0) / n), n, used_seed)
    return OriginRiskTable(estimates, mean_tests, spec.b, spec.k, n, used_seed)


def aggregate_origin_risk(table: OriginRiskTable, r: int) -> tuple[float, float]:
    """Sum of origin risks over labels with exactly r ones, and its closed form.

    The closed form is
    ``b k C(k-1, r-1) + [C(k-1, r) - b C(k-1, k-r)] * sum(mean_tests)``;
    both sides are computed from the same shared-draw table, so they agree
    up to floating-point rounding for every rule.
    """
    k, b = table.k, table.b
    if not 1 <= r <= k - 1:
        raise ValueError(f"r must satisfy 1 <= r <= k-1 = {k - 1}, got {r}")
    lhs = float(sum(table[v].mean for v in labels_with_ones(k, r)))
    total_tests = float(table.mean_tests.sum())
    rhs = b * k * math.comb(k - 1, r - 1) + (
        math.comb(k - 1, r) - b * math.comb(k - 1, k - r)
    ) * total_tests
    return lhs, rhs


def rule_mass_risk(rule, mu, spec: ProblemSpec, mc_reps: int = DEFAULT_MC_REPS,
                   seed: int = DEFAULT_SEED, draws: np.ndarray | None = None) -> RiskEstimate:
    """Risk of a randomized rule given as action probabilities.

    ``rule`` is either a constant ``DecisionRuleMass`` or a callable
    mapping an (n, k) draw matrix to an (n, 2^k) matrix of action
    probabilities in the ``enumerate_actions`` row order.  The estimate
    equals ``risk_scalar`` of the induced tests exactly when evaluated on
    the same draws.
    """
    mu = as_float_vector(mu, k=spec.k, name="mu")
    v = classify_partition(mu, spec.variant)
    Z, n, used_seed = _draws_for(spec, mu, mc_reps, seed, draws)
    actions = enumerate_actions(spec.k)
    losses = actions @ (1.0 - v) + spec.b * ((1.0 - actions) @ v)
    if isinstance(rule, DecisionRuleMass):
        if rule.k != spec.k:
            raise ValueError("mass function dimension does not match the problem")
        probs = np.broadcast_to(rule.probabilities(), (n, actions.shape[0]))
    else:
        probs = np.asarray(rule(Z), dtype=float)
        if probs.shape != (n, actions.shape[0]):
            raise ValueError(
                f"rule returned shape {probs.shape}, expected {(n, actions.shape[0])}"
            )
        row_sums = probs.sum(axis=1)
        if np.any(np.abs(row_sums - 1.0) > 1e-9) or probs.min() < -1e-12:
            raise ValueError("rule rows must be probability vectors")
    values = probs @ losses
    return _estimate(values, used_seed)


def mass_rule_tests(rule) -> "callable":
    """Induced test functions of a randomized rule, as a rule callable."""

    def tests(Z: np.ndarray) -> np.ndarray:
        actions = enumerate_actions(
            rule.k if isinstance(rule, DecisionRuleMass) else Z.shape[1]
        ).astype(float)
        if isinstance(rule, DecisionRuleMass):
            probs = np.broadcast_to(rule.probabilities(), (Z.shape[0], actions.shape[0]))
        else:
            probs = np.asarray(rule(Z), dtype=float)
        return probs @ actions

    return tests
