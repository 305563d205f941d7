"""The three decision maps from observations to accept/reject actions.

Each map takes a single length-k observation or an (n, k) batch and
returns 0/1 actions of the same shape.  Boundary values are resolved by
each procedure's "otherwise" branch: a statistic exactly equal to its
constant is accepted by all three procedures.  Ties between observation
coordinates are broken by ascending original index (stable sorts), which
matters only on a measure-zero set but keeps the maps deterministic.

Estimator wrappers at the bottom expose the same maps through the
fit/predict convention: ``fit`` solves the critical constants for the
configured model and ``predict`` applies the decision map row-wise.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import as_float_matrix
from .critical_values import (
    CriticalValues,
    per_comparison_values,
    single_step_fwe_constant,
    step_down_constants,
    step_up_constants,
)
from .defaults import DEFAULT_MC_REPS, DEFAULT_SEED
from .model import ProblemSpec, Variant


def _constants_array(critical_values) -> np.ndarray:
    values = getattr(critical_values, "values", critical_values)
    c = np.asarray(values, dtype=float)
    if c.ndim != 1 or c.size < 1:
        raise ValueError("critical values must form a one-dimensional sequence")
    return c


def single_step_decide(z, critical_values) -> np.ndarray:
    """Reject hypothesis i exactly when z_i exceeds its constant."""
    c = _constants_array(critical_values)
    Z, was_vector = as_float_matrix(z, k=c.size, name="z")
    actions = (Z > c).astype(int)
    return actions[0] if was_vector else actions


def step_down_decide(z, critical_values) -> np.ndarray:
    """Walk from the largest statistic down, rejecting while it clears C_j.

    The largest statistic is compared with C_k, the next with C_{k-1},
    and so on; the first comparison that fails accepts every remaining
    hypothesis.
    """
    c = _constants_array(critical_values)
    Z, was_vector = as_float_matrix(z, k=c.size, name="z")
    order = np.argsort(-Z, axis=1, kind="stable")
    ordered = np.take_along_axis(Z, order, axis=1)
    rejected = np.logical_and.accumulate(ordered > c[::-1], axis=1)
    actions = np.zeros_like(Z, dtype=int)
    np.put_along_axis(actions, order, rejected.astype(int), axis=1)
    return actions[0] if was_vector else actions


def step_up_decide(z, critical_values) -> np.ndarray:
    """Walk from the smallest statistic up, accepting while it stays at or
    below C_j; the first exceedance rejects that and every larger one."""
    c = _constants_array(critical_values)
    Z, was_vector = as_float_matrix(z, k=c.size, name="z")
    order = np.argsort(Z, axis=1, kind="stable")
    ordered = np.take_along_axis(Z, order, axis=1)
    accepted = np.logical_and.accumulate(ordered <= c, axis=1)
    actions = np.zeros_like(Z, dtype=int)
    np.put_along_axis(actions, order, (~accepted).astype(int), axis=1)
    return actions[0] if was_vector else actions


def accept_everything(z) -> np.ndarray:
    """Reference rule that never rejects."""
    Z = np.asarray(z, dtype=float)
    return np.zeros_like(Z, dtype=int)


def reject_everything(z) -> np.ndarray:
    """Reference rule that always rejects."""
    Z = np.asarray(z, dtype=float)
    return np.ones_like(Z, dtype=int)


DECIDE_BY_NAME = {
    "single-step": single_step_decide,
    "per-comparison": single_step_decide,
    "step-down": step_down_decide,
    "step-up": step_up_decide,
}


class _CalibratedProcedure(BaseEstimator):
    """Shared fit/predict plumbing for the calibrated procedures."""

    def __init__(self, k=None, alpha=0.05, rho=0.0, sigma2=1.0,
                 variant="point", mc_reps=DEFAULT_MC_REPS, seed=DEFAULT_SEED,
                 critical_values=None):
        self.k = k
        self.alpha = alpha
        self.rho = rho
        self.sigma2 = sigma2
        self.variant = variant
        self.mc_reps = mc_reps
        self.seed = seed
        self.critical_values = critical_values

    def _solve(self, spec: ProblemSpec) -> CriticalValues:
        raise NotImplementedError

    def _decide(self, Z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _resolve_k(self, X) -> int:
        if self.k is not None:
            return int(self.k)
        if self.critical_values is not None:
            return self.critical_values.k
        if X is not None:
            X2, _ = as_float_matrix(X, k=np.asarray(X).shape[-1], name="X")
            return X2.shape[1]
        raise ValueError("k is unspecified; pass k=, critical_values=, or fit with data")

    def fit(self, X=None, y=None):
        """Resolve the problem dimension and solve the critical constants.

        ``X`` is only consulted for its column count when ``k`` was not
        given; no parameter of the constants depends on observed data.
        """
        k = self._resolve_k(X)
        spec = ProblemSpec(k=k, sigma2=self.sigma2, rho=self.rho,
                           alpha=self.alpha, variant=Variant(self.variant))
        if self.critical_values is not None:
            if self.critical_values.k != k:
                raise ValueError("supplied critical values do not match k")
            self.critical_values_ = self.critical_values
        else:
            self.critical_values_ = self._solve(spec)
        self.k_ = k
        self.spec_ = spec
        return self

    def predict(self, X) -> np.ndarray:
        """Apply the decision map row-wise; 1 rejects, 0 accepts."""
        if not hasattr(self, "critical_values_"):
            raise RuntimeError("this procedure has not been fitted yet")
        Z, was_vector = as_float_matrix(X, k=self.k_, name="X")
        actions = self._decide(Z)
        return actions[0] if was_vector else actions


class SingleStepProcedure(_CalibratedProcedure):
    """Compare every coordinate with one fixed constant.

    ``mode="fwe"`` calibrates the common constant so the probability of
    any false rejection under the global null is alpha; ``mode="per-
    comparison"`` uses the uncorrected marginal constant instead.
    """

    def __init__(self, k=None, alpha=0.05, rho=0.0, sigma2=1.0,
                 variant="point", mc_reps=DEFAULT_MC_REPS, seed=DEFAULT_SEED,
                 critical_values=None, mode="fwe"):
        super().__init__(k=k, alpha=alpha, rho=rho, sigma2=sigma2,
                         variant=variant, mc_reps=mc_reps, seed=seed,
                         critical_values=critical_values)
        self.mode = mode

    def _solve(self, spec):
        if self.mode == "fwe":
            return single_step_fwe_constant(spec, mc_reps=self.mc_reps, seed=self.seed)
        if self.mode == "per-comparison":
            return per_comparison_values(spec)
        raise ValueError(f"unknown mode {self.mode!r}")

    def _decide(self, Z):
        return single_step_decide(Z, self.critical_values_)


class StepDownProcedure(_CalibratedProcedure):
    """Stepwise procedure working from the largest statistic downward."""

    def _solve(self, spec):
        return step_down_constants(spec, mc_reps=self.mc_reps, seed=self.seed)

    def _decide(self, Z):
        return step_down_decide(Z, self.critical_values_)


class StepUpProcedure(_CalibratedProcedure):
    """Stepwise procedure working from the smallest statistic upward."""

    def _solve(self, spec):
        return step_up_constants(spec, mc_reps=self.mc_reps, seed=self.seed)

    def _decide(self, Z):
        return step_up_decide(Z, self.critical_values_)
