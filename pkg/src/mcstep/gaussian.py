"""Exchangeable (intraclass) multivariate normal model.

Covariance structure sigma2 * ((1 - rho) I + rho 11'), whose inverse has
the closed form (sigma2 (1 - rho))^-1 (I - g 11') with
g = rho / (1 + (k - 1) rho).  The scalar normal cdf and quantile are
implemented here to an explicit 1e-12 contract so that every calibrated
constant in the package is platform-stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import as_float_matrix, as_float_vector, check_probability
from .defaults import CHUNK_ROWS

_SQRT2 = math.sqrt(2.0)
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class IntraclassCovariance:
    """Equal-variance, equal-correlation covariance of dimension k."""

    k: int
    sigma2: float = 1.0
    rho: float = 0.0

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k}")
        object.__setattr__(self, "k", int(self.k))
        if self.sigma2 <= 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        if self.k >= 2:
            lo = -1.0 / (self.k - 1)
            if not lo < self.rho < 1.0:
                raise ValueError(
                    f"rho must lie in ({lo}, 1) for k={self.k}, got {self.rho}"
                )

    @classmethod
    def from_spec(cls, spec) -> "IntraclassCovariance":
        return cls(k=spec.k, sigma2=spec.sigma2, rho=spec.rho)

    @property
    def shrink(self) -> float:
        """The off-diagonal factor g = rho / (1 + (k - 1) rho) of the inverse."""
        return self.rho / (1.0 + (self.k - 1) * self.rho)

    def matrix(self) -> np.ndarray:
        k, s2, r = self.k, self.sigma2, self.rho
        return s2 * ((1.0 - r) * np.eye(k) + r * np.ones((k, k)))

    def precision(self) -> np.ndarray:
        """Closed-form inverse (sigma2 (1-rho))^-1 (I - g 11')."""
        k, s2, r = self.k, self.sigma2, self.rho
        if k >= 2 and (r >= 1.0 or r <= -1.0 / (k - 1)):
            raise ValueError("covariance is singular at this rho")
        scale = 1.0 / (s2 * (1.0 - r)) if k >= 2 else 1.0 / s2
        if k == 1:
            return np.array([[scale]])
        return scale * (np.eye(k) - self.shrink * np.ones((k, k)))

    def log_det(self) -> float:
        k, s2, r = self.k, self.sigma2, self.rho
        if k == 1:
            return math.log(s2)
        return (k - 1) * math.log(s2 * (1.0 - r)) + math.log(s2 * (1.0 + (k - 1) * r))


def std_normal_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def std_normal_cdf(x: float) -> float:
    """Standard normal cdf, absolute error below 1e-12 everywhere."""
    if not math.isfinite(x):
        raise ValueError(f"x must be finite, got {x}")
    return 0.5 * math.erfc(-x / _SQRT2)


# Rational approximation coefficients for the initial quantile guess
# (Acklam's minimax fit, relative error ~1.15e-9), polished below by
# Newton steps against the high-accuracy cdf.
_QA = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
       1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_QB = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
       6.680131188771972e01, -1.328068155288572e01)
_QC = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
       -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_QD = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
       3.754408661907416e00)
_Q_TAIL = 0.02425


def std_normal_quantile(p: float) -> float:
    """Inverse of ``std_normal_cdf``; |cdf(result) - p| <= 1e-12."""
    p = check_probability(p, "p")
    if p > 0.5:
        return -std_normal_quantile(1.0 - p)
    if p < _Q_TAIL:
        q = math.sqrt(-2.0 * math.log(p))
        x = ((((((_QC[0] * q + _QC[1]) * q + _QC[2]) * q + _QC[3]) * q + _QC[4]) * q + _QC[5])
             / ((((_QD[0] * q + _QD[1]) * q + _QD[2]) * q + _QD[3]) * q + 1.0))
    else:
        q = p - 0.5
        r = q * q
        x = (((((_QA[0] * r + _QA[1]) * r + _QA[2]) * r + _QA[3]) * r + _QA[4]) * r + _QA[5]) * q \
            / (((((_QB[0] * r + _QB[1]) * r + _QB[2]) * r + _QB[3]) * r + _QB[4]) * r + 1.0)
    for _ in range(2):
        density = std_normal_pdf(x)
        if density <= 0.0:
            break  # beyond double precision tails; the guess is already exact in cdf terms
        x -= (std_normal_cdf(x) - p) / density
    return x


def log_density(z, mu, cov: IntraclassCovariance):
    """Log density of the model at observation(s) ``z`` with mean ``mu``.

    ``z`` may be a single length-k vector or an (n, k) matrix; the result
    is correspondingly a float or a length-n array.
    """
    mu = as_float_vector(mu, k=cov.k, name="mu")
    Z, was_vector = as_float_matrix(z, k=cov.k, name="z")
    d = Z - mu
    if cov.k == 1:
        quad = (d[:, 0] ** 2) / cov.sigma2
    else:
        scale = 1.0 / (cov.sigma2 * (1.0 - cov.rho))
        row_sums = d.sum(axis=1)
        quad = scale * ((d * d).sum(axis=1) - cov.shrink * row_sums**2)
    out = -0.5 * (cov.k * _LOG_2PI + cov.log_det() + quad)
    return float(out[0]) if was_vector else out


def _chunked_standard_normals(seed: int, n: int, cols: int) -> np.ndarray:
    """Standard normals in fixed-size chunks with per-chunk substreams.

    The stream is a function of (seed, n, cols) only, so identical seeds
    reproduce identical draws no matter how the work is scheduled.
    """
    out = np.empty((n, cols))
    for chunk, start in enumerate(range(0, n, CHUNK_ROWS)):
        stop = min(start + CHUNK_ROWS, n)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk,)))
        out[start:stop] = rng.standard_normal((stop - start, cols))
    return out


def sample_mvn(cov: IntraclassCovariance, mu, n: int, seed: int,
               method: str = "auto") -> np.ndarray:
    """Draw n i.i.d. observations from the exchangeable normal model.

    For rho >= 0 the one-factor representation
    ``z_i = mu_i + sigma (sqrt(rho) w + sqrt(1-rho) e_i)`` is used; for
    rho < 0 the draws go through a Cholesky factor.  ``method`` can force
    either path ("one-factor" / "cholesky") for cross-validation.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    mu = as_float_vector(mu, k=cov.k, name="mu")
    if method == "auto":
        method = "one-factor" if cov.rho >= 0 else "cholesky"
    sigma = math.sqrt(cov.sigma2)
    if method == "one-factor":
        if cov.rho < 0:
            raise ValueError("one-factor representation requires rho >= 0")
        raw = _chunked_standard_normals(seed, n, cov.k + 1)
        w = raw[:, :1]
        eps = raw[:, 1:]
        z = sigma * (math.sqrt(cov.rho) * w + math.sqrt(1.0 - cov.rho) * eps)
    elif method == "cholesky":
        raw = _chunked_standard_normals(seed, n, cov.k)
        lower = np.linalg.cholesky(cov.matrix())
        z = raw @ lower.T
    else:
        raise ValueError(f"unknown sampling method {method!r}")
    return z + mu
