"""Sampling baselines: MC-dropout and deep ensembles on the AL likelihood."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .heads import asymmetric_laplace_loss, mu_sigma_decode
from .network import Mlp, MlpConfig, TrainConfig, load_checkpoint, save_checkpoint, train_model

ENSEMBLE_MANIFEST_VERSION = 1


@dataclass
class SampledPrediction:
    """Aggregate of stochastic forward passes, arrays of shape (n, n_quantiles).

    mean_mu is the prediction, epistemic_var the unbiased (n-1) sample
    variance of the mu heads across passes, mean_sigma the averaged aleatoric
    scale.
    """

    quantiles: tuple[float, ...]
    mean_mu: np.ndarray
    epistemic_var: np.ndarray
    mean_sigma: np.ndarray
    n_samples: int


@dataclass
class EnsembleModel:
    members: list
    quantiles: tuple[float, ...]

    @property
    def size(self) -> int:
        return len(self.members)

    def __post_init__(self):
        if not self.members:
            raise DomainError("ensemble must have at least one member")
        widths = {m.config.output_dim for m in self.members}
        if len(widths) != 1:
            raise DomainError("ensemble members must share an architecture")


def _aggregate(mus, sigmas, quantiles, n_samples) -> SampledPrediction:
    mus = np.stack(mus)  # (samples, n, n_q)
    sigmas = np.stack(sigmas)
    if n_samples >= 2:
        epistemic = mus.var(axis=0, ddof=1)
    else:
        epistemic = np.zeros_like(mus[0])
    return SampledPrediction(
        quantiles=quantiles,
        mean_mu=mus.mean(axis=0),
        epistemic_var=epistemic,
        mean_sigma=sigmas.mean(axis=0),
        n_samples=n_samples,
    )


def mc_dropout_predict(model: Mlp, x, quantiles, n_samples, rng) -> SampledPrediction:
    """n_samples train-mode passes with dropout live; statistics across passes."""
    if n_samples < 2:
        raise DomainError("mc_dropout_predict needs n_samples >= 2")
    quantiles = tuple(float(q) for q in quantiles)
    x = np.asarray(x, dtype=float)
    mus, sigmas = [], []
    for _ in range(n_samples):
        out = model.forward(x, mode="train", rng=rng).data
        mu, sigma = mu_sigma_decode(out, len(quantiles))
        mus.append(mu)
        sigmas.append(sigma)
    return _aggregate(mus, sigmas, quantiles, n_samples)


def ensemble_predict(ensemble: EnsembleModel, x, single_member=False) -> SampledPrediction:
    """Deterministic eval pass per member; statistics across members.

    A single-member ensemble has no defined variance: that is an error
    unless single_member is set, in which case epistemic_var is zero.
    """
    if ensemble.size < 2 and not single_member:
        raise DomainError("ensemble variance needs size >= 2 (pass single_member=True for the mean only)")
    x = np.asarray(x, dtype=float)
    mus, sigmas = [], []
    for member in ensemble.members:
        out = member.forward(x, mode="eval").data
        mu, sigma = mu_sigma_decode(out, len(ensemble.quantiles))
        mus.append(mu)
        sigmas.append(sigma)
    return _aggregate(mus, sigmas, ensemble.quantiles, ensemble.size)


def train_baseline(kind, x_train, y_train, x_val, y_val, mlp_config: MlpConfig, train_config: TrainConfig, n_members=5):
    """Train a dropout model or a deep ensemble on the AL likelihood.

    Ensemble member i trains with seed train_config.seed + i; an ensemble of
    size one is just a single baseline model wrapped in EnsembleModel.
    """
    loss_fn = asymmetric_laplace_loss(train_config.quantiles)
    if kind == "dropout":
        model = Mlp(mlp_config, seed=train_config.seed)
        train_model(model, x_train, y_train, x_val, y_val, train_config, loss_fn)
        return model
    if kind == "ensemble":
        if n_members < 1:
            raise DomainError("ensemble kind requires n_members >= 1")
        members = []
        for i in range(n_members):
            member_config = TrainConfig(
                learning_rate=train_config.learning_rate,
                batch_size=train_config.batch_size,
                max_epochs=train_config.max_epochs,
                early_stop_patience=train_config.early_stop_patience,
                lam=train_config.lam,
                seed=train_config.seed + i,
                quantiles=train_config.quantiles,
            )
            member = Mlp(mlp_config, seed=member_config.seed)
            train_model(member, x_train, y_train, x_val, y_val, member_config, loss_fn)
            members.append(member)
        return EnsembleModel(members=members, quantiles=train_config.quantiles)
    raise DomainError(f"unknown baseline kind {kind!r}")


def save_ensemble(directory, ensemble: EnsembleModel):
    """Persist as a directory of member checkpoints plus a manifest."""
    os.makedirs(directory, exist_ok=True)
    names = []
    for i, member in enumerate(ensemble.members):
        name = f"member_{i:03d}.json"
        save_checkpoint(os.path.join(directory, name), member)
        names.append(name)
    manifest = {
        "format_version": ENSEMBLE_MANIFEST_VERSION,
        "size": ensemble.size,
        "quantiles": list(ensemble.quantiles),
        "members": names,
    }
    with open(os.path.join(directory, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def load_ensemble(directory) -> EnsembleModel:
    with open(os.path.join(directory, "manifest.json")) as fh:
        manifest = json.load(fh)
    if manifest.get("format_version") != ENSEMBLE_MANIFEST_VERSION:
        raise DomainError(f"unsupported ensemble manifest version {manifest.get('format_version')!r}")
    members = [load_checkpoint(os.path.join(directory, name))[0] for name in manifest["members"]]
    return EnsembleModel(members=members, quantiles=tuple(manifest["quantiles"]))
