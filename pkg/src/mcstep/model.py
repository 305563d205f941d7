"""Finite-action vocabulary for simultaneous one-sided testing.

With k endpoints there are 2^k possible actions: a 0/1 vector ``a`` whose
i-th bit rejects hypothesis i.  The same 0/1 vectors double as labels for
the cells of the parameter space (``v_i = 1`` means coordinate i is in the
alternative), so actions and labels share a representation but are kept
apart by naming (``a`` versus ``v``) throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._validation import as_bit_vector, as_float_vector, check_positive, check_probability

# Full enumeration of the action set is used by brute-force oracles only;
# 2^k rows beyond this are never needed and would only invite blowups.
MAX_ENUMERATION_K = 20


class Variant(str, Enum):
    """Null-hypothesis convention for each coordinate."""

    POINT_NULL = "point"  # H_i: mu_i = 0 against mu_i > 0, parameter space mu >= 0
    COMPOSITE_NULL = "composite"  # H_i: mu_i <= 0 against mu_i > 0, all of R^k


@dataclass(frozen=True)
class ProblemSpec:
    """Configuration of a k-endpoint one-sided testing problem.

    Parameters
    ----------
    k : number of endpoints.
    sigma2 : common variance of the observation coordinates.
    rho : common correlation; must satisfy -1/(k-1) < rho < 1 for k >= 2.
    b : loss charged for accepting a false hypothesis (a false rejection
        always costs 1).
    alpha : target level for error-rate calibrated constants.
    variant : null-hypothesis convention, point or composite.
    """

    k: int
    sigma2: float = 1.0
    rho: float = 0.0
    b: float = 1.0
    alpha: float = 0.05
    variant: Variant = Variant.POINT_NULL

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k}")
        object.__setattr__(self, "k", int(self.k))
        check_positive(self.sigma2, "sigma2")
        check_positive(self.b, "b")
        check_probability(self.alpha, "alpha")
        if self.k >= 2:
            lo = -1.0 / (self.k - 1)
            if not lo < self.rho < 1.0:
                raise ValueError(
                    f"rho must lie in ({lo}, 1) for k={self.k}, got {self.rho}"
                )
        object.__setattr__(self, "variant", Variant(self.variant))


def loss(a, v, b: float) -> float:
    """Additive loss of taking action ``a`` when the true cell label is ``v``.

    Each false rejection costs 1, each false acceptance costs ``b``, and a
    correct call costs nothing.
    """
    a = as_bit_vector(a, name="a")
    v = as_bit_vector(v, k=a.shape[0], name="v")
    check_positive(b, "b")
    false_rejections = int(np.sum(a * (1 - v)))
    false_acceptances = int(np.sum((1 - a) * v))
    return false_rejections + b * false_acceptances


def classify_partition(mu, variant: Variant = Variant.POINT_NULL) -> np.ndarray:
    """Label the cell containing the mean vector: v_i = 1 iff mu_i > 0.

    Under the point-null convention a negative coordinate is outside the
    parameter space and raises.
    """
    mu = as_float_vector(mu, name="mu")
    variant = Variant(variant)
    if variant is Variant.POINT_NULL and np.any(mu < 0):
        raise ValueError("point-null model requires mu_i >= 0 for all i")
    return (mu > 0).astype(int)


def enumerate_actions(k: int) -> np.ndarray:
    """All 2^k action vectors as a (2^k, k) 0/1 matrix.

    Row order is binary counting with bit i of the row index giving a_i,
    so row 0 accepts everything and the last row rejects everything.
    """
    if int(k) != k or k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    if k > MAX_ENUMERATION_K:
        raise ValueError(
            f"enumeration of 2^{k} actions exceeds the k <= {MAX_ENUMERATION_K} guard"
        )
    idx = np.arange(2**k)
    return ((idx[:, None] >> np.arange(k)[None, :]) & 1).astype(int)


def labels_with_ones(k: int, r: int) -> np.ndarray:
    """All 0/1 labels of length k with exactly r ones."""
    labels = enumerate_actions(k)
    return labels[labels.sum(axis=1) == r]


def label_tuple(v) -> tuple[int, ...]:
    """Canonical hashable form of an action/label vector."""
    return tuple(int(x) for x in np.asarray(v).ravel())


@dataclass(frozen=True)
class DecisionRuleMass:
    """A probability mass function over the 2^k actions.

    ``mass`` maps action tuples to weights; weights must be nonnegative
    and sum to one.  Actions not listed carry zero mass.
    """

    mass: dict[tuple[int, ...], float]

    def __post_init__(self):
        if not self.mass:
            raise ValueError("mass function must have at least one atom")
        # private copy so later mutation of the caller's dict cannot leak in
        object.__setattr__(
            self, "mass",
            {tuple(int(x) for x in a): float(w) for a, w in self.mass.items()})
        lengths = {len(a) for a in self.mass}
        if len(lengths) != 1:
            raise ValueError("all actions in a mass function must share one length")
        for a, w in self.mass.items():
            as_bit_vector(a, name="action")
            if w < 0:
                raise ValueError(f"negative weight {w} on action {a}")
        total = float(sum(self.mass.values()))
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {total}")

    @property
    def k(self) -> int:
        return len(next(iter(self.mass)))

    def probabilities(self) -> np.ndarray:
        """Weights aligned with the ``enumerate_actions`` row order."""
        actions = enumerate_actions(self.k)
        out = np.zeros(actions.shape[0])
        powers = 1 << np.arange(self.k)
        for a, w in self.mass.items():
            out[int(np.dot(a, powers))] += w
        return out


def induced_tests(delta: DecisionRuleMass) -> np.ndarray:
    """Marginal rejection probabilities psi_i = sum_a a_i * delta(a)."""
    psi = np.zeros(delta.k)
    for a, w in delta.mass.items():
        psi += w * np.asarray(a, dtype=float)
    return psi


def point_mass(a) -> DecisionRuleMass:
    """The nonrandomized rule that always takes action ``a``."""
    return DecisionRuleMass({label_tuple(as_bit_vector(a, name="a")): 1.0})
