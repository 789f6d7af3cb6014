"""Heteroscedastic noise families with analytic quantiles and seeded sampling.

A NoiseSpec names one of four families (gaussian, exponential, gamma,
laplace) whose scale-like parameter follows a parametric law in |x| so that
specs serialize to plain config records instead of callables. Two law shapes
cover every experiment:

    affine:          v(x) = slope * |x| + intercept
    inverse_affine:  v(x) = 1 / (slope * |x| + intercept)

`floor` clamps the evaluated scale from below (0 disables the clamp). The
gamma family additionally carries an affine shape law. Choosing the
inverse_affine form for gamma reads the printed second parameter as a scale;
flipping to affine reads it as a rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .quantiles import QuantileLevel, as_quantile
from .special import bisect, lower_incomplete_gamma_regularized, normal_cdf

FAMILIES = ("gaussian", "exponential", "gamma", "laplace")
SCALE_FORMS = ("affine", "inverse_affine")


@dataclass(frozen=True)
class NoiseSpec:
    family: str
    scale_coeffs: tuple[float, float]
    shape_coeffs: tuple[float, float] = (0.0, 0.0)
    floor: float = 0.0
    scale_form: str = "affine"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown noise family {self.family!r}")
        if self.scale_form not in SCALE_FORMS:
            raise DomainError(f"unknown scale form {self.scale_form!r}")
        object.__setattr__(self, "scale_coeffs", _coeff_pair(self.scale_coeffs, "scale_coeffs"))
        object.__setattr__(self, "shape_coeffs", _coeff_pair(self.shape_coeffs, "shape_coeffs"))
        floor = float(self.floor)
        if not math.isfinite(floor) or floor < 0.0:
            raise DomainError(f"floor must be finite and >= 0, got {self.floor!r}")
        object.__setattr__(self, "floor", floor)

    def scale_at(self, x):
        """Scale parameter at covariate x; DomainError if degenerate."""
        base = self.scale_coeffs[0] * np.abs(x) + self.scale_coeffs[1]
        if self.scale_form == "inverse_affine":
            with np.errstate(divide="ignore"):
                base = np.where(base > 0.0, 1.0 / np.where(base > 0.0, base, 1.0), np.inf)
        value = np.maximum(base, self.floor)
        if not np.all(np.isfinite(value)) or np.any(value <= 0.0):
            raise DomainError(f"degenerate scale for {self.family} noise at x={x!r}")
        if np.ndim(x) == 0:
            return float(value)
        return value

    def shape_at(self, x):
        """Gamma shape parameter at covariate x."""
        if self.family != "gamma":
            raise DomainError(f"shape_at is defined for gamma noise only, not {self.family}")
        value = self.shape_coeffs[0] * np.abs(x) + self.shape_coeffs[1]
        if not np.all(np.isfinite(value)) or np.any(value <= 0.0):
            raise DomainError(f"degenerate gamma shape at x={x!r}")
        if np.ndim(x) == 0:
            return float(value)
        return value

    def to_config(self) -> dict:
        return {
            "family": self.family,
            "shape_coeffs": list(self.shape_coeffs),
            "scale_coeffs": list(self.scale_coeffs),
            "floor": self.floor,
            "scale_form": self.scale_form,
        }

    @classmethod
    def from_config(cls, record: dict) -> "NoiseSpec":
        return cls(
            family=record["family"],
            scale_coeffs=tuple(record["scale_coeffs"]),
            shape_coeffs=tuple(record.get("shape_coeffs", (0.0, 0.0))),
            floor=record.get("floor", 0.0),
            scale_form=record.get("scale_form", "affine"),
        )


def _coeff_pair(value, name):
    coeffs = tuple(float(v) for v in value)
    if len(coeffs) != 2 or not all(math.isfinite(v) for v in coeffs):
        raise DomainError(f"{name} must be a finite (slope, intercept) pair, got {value!r}")
    return coeffs


def gaussian_noise(slope=3.0, intercept=0.2) -> NoiseSpec:
    """N(0, sd) with sd = slope |x| + intercept."""
    return NoiseSpec("gaussian", (slope, intercept))


def exponential_noise(slope=4.0, intercept=0.2) -> NoiseSpec:
    """Exponential with mean slope |x| + intercept."""
    return NoiseSpec("exponential", (slope, intercept))


def gamma_noise(shape_slope=3.0, rate_slope=2.0, rate_intercept=0.2, second_is_rate=False) -> NoiseSpec:
    """Gamma with shape shape_slope |x|; second parameter 1/(rate_slope |x| + rate_intercept).

    By default that second parameter is read as the scale (variance grows
    with |x|); second_is_rate flips the reading so the same printed value is
    treated as the rate instead.
    """
    form = "affine" if second_is_rate else "inverse_affine"
    return NoiseSpec("gamma", (rate_slope, rate_intercept), (shape_slope, 0.0), scale_form=form)


def laplace_noise(slope=5.0, intercept=0.2) -> NoiseSpec:
    """Laplace(0, b) with b = slope |x| + intercept."""
    return NoiseSpec("laplace", (slope, intercept))


def center_heavy_exponential(rate_slope=0.25) -> NoiseSpec:
    """Exponential with rate rate_slope |x|: noise scale explodes toward x = 0."""
    return NoiseSpec("exponential", (rate_slope, 0.0), scale_form="inverse_affine")


def theoretical_quantile(spec: NoiseSpec, x, q) -> float:
    """Exact q-quantile of the noise law at covariate x.

    Exponential and Laplace are closed form; Gaussian and Gamma invert their
    CDFs by bisection to 1e-10 absolute.
    """
    level = as_quantile(q)
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"covariate must be finite, got {x!r}")
    scale = spec.scale_at(x)
    if spec.family == "exponential":
        return -scale * math.log1p(-level.q)
    if spec.family == "laplace":
        if level.q < 0.5:
            return scale * math.log(2.0 * level.q)
        return -scale * math.log(2.0 * (1.0 - level.q))
    if spec.family == "gaussian":
        z = bisect(lambda t: normal_cdf(t) - level.q, -40.0, 40.0, xtol=1e-13)
        return scale * z
    # gamma: bisection on the regularized lower incomplete gamma
    shape = spec.shape_at(x)
    hi = shape * scale + 1.0
    while lower_incomplete_gamma_regularized(shape, hi / scale) < level.q:
        hi *= 2.0
        if hi > 1e300:
            raise DomainError("gamma quantile bracket overflow")
    return bisect(
        lambda t: lower_incomplete_gamma_regularized(shape, t / scale) - level.q,
        0.0,
        hi,
        xtol=1e-10,
    )


def sample_noise(spec: NoiseSpec, x, rng: np.random.Generator) -> float:
    """One draw from the noise law at x; deterministic given rng state."""
    return float(sample_noise_batch(spec, np.asarray([float(x)]), rng)[0])


def sample_noise_batch(spec: NoiseSpec, xs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Vectorised draws, one per covariate in xs."""
    xs = np.asarray(xs, dtype=float)
    if not np.all(np.isfinite(xs)):
        raise DomainError("covariates must be finite")
    scale = np.asarray(spec.scale_at(xs), dtype=float)
    if spec.family == "gaussian":
        return rng.normal(0.0, scale)
    if spec.family == "exponential":
        return rng.exponential(scale)
    if spec.family == "laplace":
        return rng.laplace(0.0, scale)
    shape = np.asarray(spec.shape_at(xs), dtype=float)
    return rng.gamma(shape, scale)
