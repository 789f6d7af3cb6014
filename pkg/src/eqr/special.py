"""Scalar special functions underpinning every density in the package.

Everything here is self-contained: log-gamma uses the Lanczos approximation,
digamma a recurrence plus Bernoulli asymptotic series, and the regularized
incomplete gamma the classic series / continued-fraction split. Target
accuracy is 1e-12 relative or better over the positive real line, which is
verified against independent references in the test suite.

All functions accept floats or numpy arrays and return the matching kind,
except where noted. Non-finite or out-of-domain inputs raise DomainError.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError

# Lanczos coefficients, g = 7, n = 9 (Godfrey's tabulation). Gives ~15
# significant digits for Gamma on the positive axis.
_LANCZOS_G = 7.0
_LANCZOS_COEFFS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)

_LN_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _as_float_array(x, name):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite, got {x!r}")
    return arr


def _match_input(value, template):
    if np.ndim(template) == 0:
        return float(value)
    return value


def gammaln(x):
    """log Gamma(x) for x > 0 via the Lanczos approximation."""
    arr = _as_float_array(x, "x")
    if np.any(arr <= 0.0):
        raise DomainError(f"gammaln requires x > 0, got {x!r}")
    small = arr < 0.5
    # Reflection for (0, 0.5): log Gamma(x) = log(pi / sin(pi x)) - log Gamma(1 - x)
    z = np.where(small, 1.0 - arr, arr) - 1.0
    acc = np.full_like(z, _LANCZOS_COEFFS[0])
    for i, c in enumerate(_LANCZOS_COEFFS[1:], start=1):
        acc = acc + c / (z + i)
    t = z + _LANCZOS_G + 0.5
    core = _LN_SQRT_2PI + (z + 0.5) * np.log(t) - t + np.log(acc)
    with np.errstate(invalid="ignore", divide="ignore"):
        reflected = np.log(np.pi / np.sin(np.pi * np.where(small, arr, 0.25))) - core
    out = np.where(small, reflected, core)
    return _match_input(out, x)


def digamma(x):
    """psi(x) for x > 0: recurrence up to x >= 10, then the asymptotic series."""
    arr = _as_float_array(x, "x")
    if np.any(arr <= 0.0):
        raise DomainError(f"digamma requires x > 0, got {x!r}")
    z = np.array(arr, dtype=float, copy=True).reshape(-1)
    acc = np.zeros_like(z)
    while True:
        mask = z < 10.0
        if not mask.any():
            break
        acc[mask] -= 1.0 / z[mask]  # psi(z) = psi(z + 1) - 1/z
        z[mask] += 1.0
    inv = 1.0 / z
    inv2 = inv * inv
    # Bernoulli series through z^-12; error < 3e-14 absolute at z = 10.
    series = (
        np.log(z)
        - 0.5 * inv
        - inv2
        * (
            1.0 / 12.0
            - inv2
            * (
                1.0 / 120.0
                - inv2
                * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0))))
            )
        )
    )
    out = (acc + series).reshape(np.shape(arr))
    return _match_input(out, x)


def lower_incomplete_gamma_regularized(a, x):
    """P(a, x) = gamma(a, x) / Gamma(a) for a > 0, x >= 0 (scalar).

    Power series for x < a + 1, continued fraction for the complement
    otherwise (Numerical Recipes 6.2).
    """
    a = float(a)
    x = float(x)
    if not (math.isfinite(a) and math.isfinite(x)):
        raise DomainError("incomplete gamma arguments must be finite")
    if a <= 0.0:
        raise DomainError(f"incomplete gamma requires a > 0, got a={a}")
    if x < 0.0:
        raise DomainError(f"incomplete gamma requires x >= 0, got x={x}")
    if x == 0.0:
        return 0.0
    if x < a + 1.0:
        return _gamma_p_series(a, x)
    return 1.0 - _gamma_q_contfrac(a, x)


def _gamma_p_series(a, x, itmax=500, eps=1e-16):
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(itmax):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * eps:
            break
    return total * math.exp(-x + a * math.log(x) - float(gammaln(a)))


def _gamma_q_contfrac(a, x, itmax=500, eps=1e-16):
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, itmax + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            break
    return h * math.exp(-x + a * math.log(x) - float(gammaln(a)))


def erf(x):
    """Error function via the regularized incomplete gamma (scalar)."""
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"erf requires finite input, got {x!r}")
    if x == 0.0:
        return 0.0
    return math.copysign(lower_incomplete_gamma_regularized(0.5, x * x), x)


def normal_cdf(x, loc=0.0, scale=1.0):
    """Standardised Gaussian CDF (scalar)."""
    scale = float(scale)
    if scale <= 0.0:
        raise DomainError(f"normal_cdf requires scale > 0, got {scale}")
    z = (float(x) - float(loc)) / scale
    return 0.5 * (1.0 + erf(z / math.sqrt(2.0)))


def softplus(x):
    """log(1 + e^x), numerically stable for both tails.

    A 1e-300 positivity guard keeps the result strictly positive where the
    float64 evaluation would underflow to exactly zero (x below about -745);
    the guard is invisible everywhere the gradient is representable.
    """
    arr = _as_float_array(x, "x")
    out = np.maximum(np.logaddexp(arr, 0.0), 1e-300)
    return _match_input(out, x)


def sigmoid(x):
    arr = _as_float_array(x, "x")
    e = np.exp(-np.abs(arr))
    out = np.where(arr >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))
    return _match_input(out, x)


def bisect(fn, lo, hi, *, xtol=1e-12, max_iter=200):
    """Root of a monotone function by bisection; fn(lo) and fn(hi) must bracket."""
    flo = fn(lo)
    fhi = fn(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0.0) == (fhi > 0.0):
        raise DomainError(f"bisect bracket [{lo}, {hi}] does not straddle a root")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fmid = fn(mid)
        if fmid == 0.0 or (hi - lo) < xtol:
            return mid
        if (fmid > 0.0) == (fhi > 0.0):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
