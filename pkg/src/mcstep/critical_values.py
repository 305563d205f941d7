"""Calibrated critical constants for the three procedures.

The step-down constant C_j is the (1 - alpha) quantile of the maximum of
j exchangeable coordinates; the single-step familywise constant is the
j = k case, stored k times.  Step-up constants are solved sequentially:
given C_1 .. C_{j-1}, the j-th constant makes the joint event that all j
order statistics of a j-dimensional exchangeable vector sit below their
constants carry probability exactly 1 - alpha.

All Monte Carlo solving uses one shared draw set per call (common random
numbers), so the estimated cdf seen by the bisection is monotone in the
candidate constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .defaults import DEFAULT_MC_REPS, DEFAULT_SEED
from .gaussian import IntraclassCovariance, sample_mvn, std_normal_quantile
from .model import ProblemSpec

BISECTION_TOL = 1e-4


class Provenance(str, Enum):
    PER_COMPARISON = "per-comparison"
    SINGLE_STEP_FWE = "single-step"
    STEP_DOWN = "step-down"
    STEP_UP = "step-up"


class SolverError(RuntimeError):
    """The Monte Carlo root solve could not bracket or order its target."""


@dataclass(frozen=True)
class CriticalValues:
    """A solved constant sequence together with how it was produced.

    Stepwise provenances require a strictly increasing sequence; the
    single-step and per-comparison records store one common constant in
    every slot.
    """

    values: tuple[float, ...]
    provenance: Provenance
    k: int
    alpha: float
    rho: float
    sigma2: float = 1.0
    mc_reps: int | None = None
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(c) for c in self.values))
        object.__setattr__(self, "provenance", Provenance(self.provenance))
        if len(self.values) != self.k:
            raise ValueError(f"expected {self.k} values, got {len(self.values)}")
        vals = self.values
        if self.provenance in (Provenance.STEP_DOWN, Provenance.STEP_UP):
            if any(vals[j] >= vals[j + 1] for j in range(self.k - 1)):
                raise SolverError(
                    f"{self.provenance.value} constants must be strictly increasing, got {vals}"
                )
        else:
            if any(c != vals[0] for c in vals):
                raise ValueError(
                    f"{self.provenance.value} constants must all be equal, got {vals}"
                )

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def to_record_text(self) -> str:
        lines = [
            "format=mcstep-critical-values-v1",
            f"provenance={self.provenance.value}",
            f"k={self.k}",
            f"alpha={format(self.alpha, '.17g')}",
            f"rho={format(self.rho, '.17g')}",
            f"sigma2={format(self.sigma2, '.17g')}",
            f"mc_reps={'' if self.mc_reps is None else self.mc_reps}",
            f"seed={'' if self.seed is None else self.seed}",
            "values=" + ",".join(format(c, ".17g") for c in self.values),
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_record_text(cls, text: str) -> "CriticalValues":
        fields: dict[str, str] = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"malformed record line {lineno}: {line!r}")
            key, _, value = line.partition("=")
            fields[key.strip()] = value.strip()
        if fields.get("format") != "mcstep-critical-values-v1":
            raise ValueError("not a recognized critical-values record")
        try:
            return cls(
                values=tuple(float(x) for x in fields["values"].split(",")),
                provenance=Provenance(fields["provenance"]),
                k=int(fields["k"]),
                alpha=float(fields["alpha"]),
                rho=float(fields["rho"]),
                sigma2=float(fields.get("sigma2", "1")),
                mc_reps=int(fields["mc_reps"]) if fields.get("mc_reps") else None,
                seed=int(fields["seed"]) if fields.get("seed") else None,
            )
        except KeyError as exc:
            raise ValueError(f"record is missing field {exc}") from exc

    def save(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(self.to_record_text())

    @classmethod
    def load(cls, path) -> "CriticalValues":
        with open(path, "r", encoding="ascii") as fh:
            return cls.from_record_text(fh.read())


def per_comparison_constant(alpha: float) -> float:
    """The uncorrected marginal constant, the (1 - alpha) normal quantile."""
    return std_normal_quantile(1.0 - alpha)


def per_comparison_values(spec: ProblemSpec) -> CriticalValues:
    c = math.sqrt(spec.sigma2) * per_comparison_constant(spec.alpha)
    return CriticalValues(
        values=(c,) * spec.k,
        provenance=Provenance.PER_COMPARISON,
        k=spec.k,
        alpha=spec.alpha,
        rho=spec.rho,
        sigma2=spec.sigma2,
    )


def _bisect_count(sorted_vals: np.ndarray, n_total: int, need: int,
                  lo: float, hi: float, tol: float = BISECTION_TOL) -> float:
    """Smallest c (within tol) with #{vals <= c} >= need, vals pre-sorted."""
    if sorted_vals.size < need:
        raise SolverError(
            f"target count {need} exceeds the {sorted_vals.size} samples satisfying "
            "the conditioning event; the root is not bracketed"
        )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if np.searchsorted(sorted_vals, mid, side="right") < need:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _null_draws(spec: ProblemSpec, mc_reps: int, seed: int) -> np.ndarray:
    cov = IntraclassCovariance(k=spec.k, sigma2=spec.sigma2, rho=spec.rho)
    return sample_mvn(cov, np.zeros(spec.k), mc_reps, seed)


def _resolve_method(spec: ProblemSpec, method: str) -> str:
    if method not in ("auto", "mc", "closed-form"):
        raise ValueError(f"unknown method {method!r}")
    # k = 1 involves only the marginal, so the closed form holds at any rho
    closed_available = spec.rho == 0.0 or spec.k == 1
    if method == "closed-form" and not closed_available:
        raise ValueError("closed forms are only available at rho = 0 (or k = 1)")
    if method == "auto":
        return "closed-form" if closed_available else "mc"
    return method


def step_down_constants(spec: ProblemSpec, mc_reps: int = DEFAULT_MC_REPS,
                        seed: int = DEFAULT_SEED, method: str = "auto") -> CriticalValues:
    """Constants with P{max of j exchangeable nulls <= C_j} = 1 - alpha.

    At rho = 0 the closed form C_j = sigma * quantile((1-alpha)^(1/j)) is
    used unless the Monte Carlo path is forced with ``method="mc"``.
    """
    method = _resolve_method(spec, method)
    sigma = math.sqrt(spec.sigma2)
    if method == "closed-form":
        # independent coordinates: the max of j nulls has cdf Phi^j
        vals = tuple(
            sigma * std_normal_quantile((1.0 - spec.alpha) ** (1.0 / j))
            for j in range(1, spec.k + 1)
        )
        return CriticalValues(vals, Provenance.STEP_DOWN, spec.k, spec.alpha,
                              spec.rho, spec.sigma2)
    draws = _null_draws(spec, mc_reps, seed)
    need = int(math.ceil((1.0 - spec.alpha) * mc_reps))
    values = []
    for j in range(1, spec.k + 1):
        maxima = np.sort(draws[:, :j].max(axis=1))
        c = _bisect_count(maxima, mc_reps, need, maxima[0] - 1.0, maxima[-1] + 1.0)
        values.append(c)
    return CriticalValues(tuple(values), Provenance.STEP_DOWN, spec.k, spec.alpha,
                          spec.rho, spec.sigma2, mc_reps=mc_reps, seed=seed)


def single_step_fwe_constant(spec: ProblemSpec, mc_reps: int = DEFAULT_MC_REPS,
                             seed: int = DEFAULT_SEED, method: str = "auto") -> CriticalValues:
    """One common constant with P{max of k nulls <= C} = 1 - alpha."""
    down = step_down_constants(spec, mc_reps=mc_reps, seed=seed, method=method)
    c = down.values[-1]
    return CriticalValues((c,) * spec.k, Provenance.SINGLE_STEP_FWE, spec.k,
                          spec.alpha, spec.rho, spec.sigma2,
                          mc_reps=down.mc_reps, seed=down.seed)


def step_up_constants(spec: ProblemSpec, mc_reps: int = DEFAULT_MC_REPS,
                      seed: int = DEFAULT_SEED, method: str = "auto") -> CriticalValues:
    """Sequentially solved step-up constants.

    At stage j the order statistics are those of the first j coordinates
    of the shared exchangeable draw set; earlier constants condition the
    event, and C_j is bisected so the joint probability is 1 - alpha.
    A produced sequence that is not strictly increasing raises rather
    than being silently repaired.
    """
    if method not in ("auto", "mc", "closed-form"):
        raise ValueError(f"unknown method {method!r}")
    sigma = math.sqrt(spec.sigma2)
    if spec.k == 1 and method != "mc":
        c = sigma * std_normal_quantile(1.0 - spec.alpha)
        return CriticalValues((c,), Provenance.STEP_UP, 1, spec.alpha,
                              spec.rho, spec.sigma2)
    if method == "closed-form":
        raise ValueError("step-up constants have no closed form for k >= 2")
    draws = _null_draws(spec, mc_reps, seed)
    need = int(math.ceil((1.0 - spec.alpha) * mc_reps))
    values: list[float] = []
    for j in range(1, spec.k + 1):
        ordered = np.sort(draws[:, :j], axis=1)
        if j == 1:
            eligible = ordered[:, 0]
        else:
            prefix_ok = np.all(ordered[:, : j - 1] <= np.asarray(values), axis=1)
            eligible = ordered[prefix_ok, j - 1]
        eligible = np.sort(eligible)
        lo = min(eligible[0], values[-1] if values else eligible[0]) - 1.0
        c = _bisect_count(eligible, mc_reps, need, lo, eligible[-1] + 1.0)
        if values and c <= values[-1]:
            raise SolverError(
                f"step-up solve produced a non-increasing sequence at stage {j}: "
                f"{values + [c]}"
            )
        values.append(c)
    return CriticalValues(tuple(values), Provenance.STEP_UP, spec.k, spec.alpha,
                          spec.rho, spec.sigma2, mc_reps=mc_reps, seed=seed)


def solve_constants(procedure: str, spec: ProblemSpec, mc_reps: int = DEFAULT_MC_REPS,
                    seed: int = DEFAULT_SEED, method: str = "auto") -> CriticalValues:
    """Solve constants for a procedure named by its provenance string."""
    prov = Provenance(procedure)
    if prov is Provenance.PER_COMPARISON:
        return per_comparison_values(spec)
    if prov is Provenance.SINGLE_STEP_FWE:
        return single_step_fwe_constant(spec, mc_reps=mc_reps, seed=seed, method=method)
    if prov is Provenance.STEP_DOWN:
        return step_down_constants(spec, mc_reps=mc_reps, seed=seed, method=method)
    return step_up_constants(spec, mc_reps=mc_reps, seed=seed, method=method)
