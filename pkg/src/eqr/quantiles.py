"""Quantile levels, the tilted loss, and the closed-form densities built on it.

The scalar functions here are the reference surface the rest of the package
is checked against; they accept floats or numpy arrays and broadcast like
numpy ufuncs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .special import digamma, gammaln


@dataclass(frozen=True)
class QuantileLevel:
    """A quantile q in (0, 1) with its derived mixture constants.

    tau  = (1 - 2q) / (q (1 - q))   location offset of the Gaussian mixture
    omega = 2 / (q (1 - q))          variance multiplier of the mixture

    Both are recomputed from q at construction; tau is exactly 0 at the
    median and omega is always positive.
    """

    q: float
    tau: float = field(init=False)
    omega: float = field(init=False)

    def __post_init__(self):
        q = float(self.q)
        if not math.isfinite(q) or not 0.0 < q < 1.0:
            raise DomainError(f"quantile level must lie in (0, 1), got {self.q!r}")
        object.__setattr__(self, "q", q)
        pq = q * (1.0 - q)
        object.__setattr__(self, "tau", (1.0 - 2.0 * q) / pq)
        object.__setattr__(self, "omega", 2.0 / pq)


def as_quantile(q) -> QuantileLevel:
    """Coerce a float or QuantileLevel into a QuantileLevel."""
    if isinstance(q, QuantileLevel):
        return q
    return QuantileLevel(float(q))


def _check_finite(name, value):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite, got {value!r}")
    return arr


def tilted_loss(q, residual):
    """Pinball loss rho_q(eps) = max(q * eps, (q - 1) * eps); zero iff eps = 0."""
    level = as_quantile(q)
    eps = _check_finite("residual", residual)
    out = np.maximum(level.q * eps, (level.q - 1.0) * eps)
    if np.ndim(residual) == 0:
        return float(out)
    return out


def al_nll(y, mu, sigma, q):
    """Negative log-likelihood of the asymmetric Laplace with asymmetry q.

    -log( q(1-q)/sigma * exp(-rho_q((y - mu)/sigma)) )
      = log sigma - log(q(1-q)) + rho_q((y - mu)/sigma)
    """
    level = as_quantile(q)
    y = _check_finite("y", y)
    mu = _check_finite("mu", mu)
    sigma_arr = _check_finite("sigma", sigma)
    if np.any(sigma_arr <= 0.0):
        raise DomainError(f"al_nll requires sigma > 0, got {sigma!r}")
    out = (
        np.log(sigma_arr)
        - math.log(level.q * (1.0 - level.q))
        + tilted_loss(level, (y - mu) / sigma_arr)
    )
    if np.ndim(y) == 0 and np.ndim(mu) == 0 and np.ndim(sigma) == 0:
        return float(out)
    return out


def al_entropy(sigma, q):
    """Differential entropy of the asymmetric Laplace: log(sigma * e / (q(1-q)))."""
    level = as_quantile(q)
    sigma_arr = _check_finite("sigma", sigma)
    if np.any(sigma_arr <= 0.0):
        raise DomainError(f"al_entropy requires sigma > 0, got {sigma!r}")
    out = 1.0 + np.log(sigma_arr) - math.log(level.q * (1.0 - level.q))
    if np.ndim(sigma) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class StudentTParams:
    """Location-scale Student-t: loc, squared scale, degrees of freedom."""

    loc: float
    scale_sq: float
    dof: float

    def __post_init__(self):
        for name in ("loc", "scale_sq", "dof"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise DomainError(f"StudentTParams.{name} must be finite, got {v!r}")
            object.__setattr__(self, name, v)
        if self.scale_sq <= 0.0:
            raise DomainError(f"StudentTParams.scale_sq must be > 0, got {self.scale_sq}")
        if self.dof <= 0.0:
            raise DomainError(f"StudentTParams.dof must be > 0, got {self.dof}")


def student_t_logpdf(y, p: StudentTParams):
    """Log density of the location-scale Student-t.

    log f = lgamma((v+1)/2) - lgamma(v/2) - 0.5 log(pi v s^2)
            - (v+1)/2 * log1p((y - loc)^2 / (v s^2))
    """
    y_arr = _check_finite("y", y)
    half = 0.5 * (p.dof + 1.0)
    norm = (
        gammaln(half)
        - gammaln(0.5 * p.dof)
        - 0.5 * math.log(math.pi * p.dof * p.scale_sq)
    )
    out = norm - half * np.log1p((y_arr - p.loc) ** 2 / (p.dof * p.scale_sq))
    if np.ndim(y) == 0:
        return float(out)
    return out


def student_t_entropy(p: StudentTParams) -> float:
    """Differential entropy of the location-scale Student-t in closed form."""
    v = p.dof
    half = 0.5 * (v + 1.0)
    log_beta = gammaln(0.5 * v) + gammaln(0.5) - gammaln(half)
    return float(
        half * (digamma(half) - digamma(0.5 * v))
        + 0.5 * math.log(v)
        + log_beta
        + 0.5 * math.log(p.scale_sq)
    )
