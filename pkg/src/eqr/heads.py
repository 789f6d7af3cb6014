"""Output heads: loss graphs and batch predictors for each model family.

Column layout of the network output, for quantile index j:

    evidential head (4 per quantile): 4j + (gamma, nu_raw, alpha_raw, beta_raw)
    mu/sigma head   (2 per quantile): 2j + (mu, sigma_raw)

Raw nu/alpha/beta pass through softplus (alpha shifted by one) exactly as in
`evidential.raw_to_evidential`; sigma_raw becomes softplus(sigma_raw) + 1e-6.
Batch losses average over samples and sum over the quantile set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad
from .errors import DomainError
from .network import Mlp
from .quantiles import QuantileLevel, StudentTParams, as_quantile, student_t_entropy
from .special import softplus as np_softplus

SIGMA_FLOOR = 1e-6


def evidential_output_dim(n_quantiles: int) -> int:
    return 4 * n_quantiles


def baseline_output_dim(n_quantiles: int) -> int:
    return 2 * n_quantiles


def _levels(quantiles):
    return [as_quantile(q) for q in quantiles]


def evidential_loss(quantiles, lam):
    """Loss graph: Student-t marginal NLL plus lam times the evidence penalty."""
    levels = _levels(quantiles)
    lam = float(lam)
    if not (math.isfinite(lam) and lam >= 0.0):
        raise DomainError(f"lam must be finite and >= 0, got {lam!r}")

    def loss_fn(out: ad.Tensor, y: np.ndarray) -> ad.Tensor:
        _check_width(out, 4 * len(levels))
        y_t = ad.Tensor(np.asarray(y, dtype=float).reshape(-1, 1))
        total = None
        for j, level in enumerate(levels):
            gamma = out[:, 4 * j : 4 * j + 1]
            nu = ad.softplus(out[:, 4 * j + 1 : 4 * j + 2])
            alpha = ad.softplus(out[:, 4 * j + 2 : 4 * j + 3]) + 1.0
            beta = ad.softplus(out[:, 4 * j + 3 : 4 * j + 4])
            z = beta / (alpha - 1.0)
            loc = gamma + level.tau * z
            scale_sq = beta * (1.0 + (level.omega * nu) * z) / (nu * alpha)
            dof = 2.0 * alpha
            half = alpha + 0.5
            log_norm = (
                ad.gammaln(half)
                - ad.gammaln(alpha)
                - 0.5 * (math.log(math.pi) + ad.log(dof * scale_sq))
            )
            resid = y_t - loc
            nll = -(log_norm - half * ad.log1p(resid * resid / (dof * scale_sq)))
            err = y_t - gamma
            rho = ad.maximum(level.q * err, (level.q - 1.0) * err)
            phi = 2.0 * nu + alpha + 1.0 / beta
            per_sample = nll + lam * (rho * phi)
            term = per_sample.mean()
            total = term if total is None else total + term
        return total

    return loss_fn


def asymmetric_laplace_loss(quantiles):
    """Loss graph: asymmetric-Laplace NLL through mu/sigma heads."""
    levels = _levels(quantiles)

    def loss_fn(out: ad.Tensor, y: np.ndarray) -> ad.Tensor:
        _check_width(out, 2 * len(levels))
        y_t = ad.Tensor(np.asarray(y, dtype=float).reshape(-1, 1))
        total = None
        for j, level in enumerate(levels):
            mu = out[:, 2 * j : 2 * j + 1]
            sigma = ad.softplus(out[:, 2 * j + 1 : 2 * j + 2]) + SIGMA_FLOOR
            eps = (y_t - mu) / sigma
            rho = ad.maximum(level.q * eps, (level.q - 1.0) * eps)
            nll = ad.log(sigma) - math.log(level.q * (1.0 - level.q)) + rho
            term = nll.mean()
            total = term if total is None else total + term
        return total

    return loss_fn


def squared_error_loss():
    """Plain mean squared error; used for convex sanity checks."""

    def loss_fn(out: ad.Tensor, y: np.ndarray) -> ad.Tensor:
        y_t = ad.Tensor(np.asarray(y, dtype=float).reshape(-1, 1))
        diff = out - y_t
        return (diff * diff).mean()

    return loss_fn


def _check_width(out, expected):
    if out.data.ndim != 2 or out.data.shape[1] != expected:
        raise DomainError(f"expected output width {expected}, got shape {out.data.shape}")


@dataclass
class EvidentialPrediction:
    """Per-point NIG parameters and derived uncertainty, shape (n, n_quantiles)."""

    quantiles: tuple[float, ...]
    gamma: np.ndarray
    nu: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    @property
    def aleatoric(self) -> np.ndarray:
        return self.beta / (self.alpha - 1.0)

    @property
    def epistemic(self) -> np.ndarray:
        return self.aleatoric / self.nu

    @property
    def confidence(self) -> np.ndarray:
        return 2.0 * self.nu + self.alpha + 1.0 / self.beta

    def marginal(self, j: int):
        """Student-t marginal arrays (loc, scale_sq, dof) for quantile index j."""
        level = as_quantile(self.quantiles[j])
        z = self.beta[:, j] / (self.alpha[:, j] - 1.0)
        loc = self.gamma[:, j] + level.tau * z
        scale_sq = self.beta[:, j] * (1.0 + level.omega * self.nu[:, j] * z) / (self.nu[:, j] * self.alpha[:, j])
        dof = 2.0 * self.alpha[:, j]
        return loc, scale_sq, dof

    def marginal_entropy(self) -> np.ndarray:
        out = np.empty_like(self.gamma)
        for j in range(len(self.quantiles)):
            loc, scale_sq, dof = self.marginal(j)
            out[:, j] = [
                student_t_entropy(StudentTParams(loc=l, scale_sq=s, dof=d))
                for l, s, d in zip(loc, scale_sq, dof)
            ]
        return out


def evidential_predict(model: Mlp, x, quantiles) -> EvidentialPrediction:
    """Single deterministic forward pass decoded into NIG parameters."""
    quantiles = tuple(float(q) for q in quantiles)
    out = model.forward(np.asarray(x, dtype=float), mode="eval").data
    if out.shape[1] != 4 * len(quantiles):
        raise DomainError(
            f"model output width {out.shape[1]} does not match {len(quantiles)} evidential quantiles"
        )
    cols = out.reshape(out.shape[0], len(quantiles), 4)
    return EvidentialPrediction(
        quantiles=quantiles,
        gamma=cols[:, :, 0].copy(),
        nu=np_softplus(cols[:, :, 1]),
        alpha=1.0 + np_softplus(cols[:, :, 2]),
        beta=np_softplus(cols[:, :, 3]),
    )


def mu_sigma_decode(out: np.ndarray, n_quantiles: int):
    """Split a mu/sigma head output into (mu, sigma) arrays of shape (n, n_q)."""
    if out.shape[1] != 2 * n_quantiles:
        raise DomainError(f"output width {out.shape[1]} does not match {n_quantiles} mu/sigma quantiles")
    cols = out.reshape(out.shape[0], n_quantiles, 2)
    return cols[:, :, 0].copy(), np_softplus(cols[:, :, 1]) + SIGMA_FLOOR
