"""Reference densities, the surprise function and reparameterizations."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit, log_expit, logit

from .errors import InapplicableMapError, ValidationError
from .models import FAMILIES, ParameterSpace, PosteriorModel, log_jeffreys_density

REFERENCE_KINDS = ("uniform", "jeffreys", "custom")


@dataclass(frozen=True)
class ReferenceDensity:
    """Unnormalized (possibly improper) log reference density r(theta)."""

    kind: str
    log_density: Callable[[np.ndarray], np.ndarray]

    def __call__(self, theta):
        return self.log_density(np.asarray(theta, dtype=float))


def uniform_reference() -> ReferenceDensity:
    return ReferenceDensity("uniform", lambda theta: np.zeros(np.shape(theta)[:-1]))


def jeffreys_reference(model: PosteriorModel) -> ReferenceDensity:
    """Jeffreys density sqrt(det G) of a built-in family.

    Custom models are refused: their information metric is unknown, and an
    improper reference paired with a possibly improper posterior would leave
    the evidence undefined.
    """
    if model.family not in FAMILIES:
        raise ValidationError("Jeffreys reference is only available for built-in families")
    family = model.family
    params = {"sigma": model.hyper["sigma"]} if family == "normal" else {}
    return ReferenceDensity("jeffreys", lambda theta: log_jeffreys_density(family, theta, **params))


def custom_reference(log_density: Callable) -> ReferenceDensity:
    return ReferenceDensity("custom", log_density)


def make_reference(kind: str, model: PosteriorModel) -> ReferenceDensity:
    if kind == "uniform":
        return uniform_reference()
    if kind == "jeffreys":
        return jeffreys_reference(model)
    raise ValidationError(f"unknown reference kind {kind!r}")


@dataclass(frozen=True)
class SurpriseFunction:
    """s(theta) = p_n(theta) / r(theta), handled as log s."""

    posterior: PosteriorModel
    reference: ReferenceDensity

    @property
    def space(self) -> ParameterSpace:
        return self.posterior.space

    def __call__(self, theta):
        return log_surprise(self, theta)


def log_surprise(sf: SurpriseFunction, theta):
    theta = sf.space.check_point(theta)
    lp = np.asarray(sf.posterior.log_potential(theta), dtype=float)
    with np.errstate(invalid="ignore"):
        out = lp - np.asarray(sf.reference(theta), dtype=float)
    out = np.where(np.isneginf(lp) | np.isnan(out), -np.inf, out)
    return out if out.ndim else float(out)


# --------------------------------------------------------------------------
# Reparameterizations
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Reparameterization:
    """omega = forward(theta), with inverse and log |det J| of the inverse.

    ``log_abs_det_jac_inv(omega)`` is log |d theta / d omega| over the
    effective coordinates of both spaces.
    """

    name: str
    forward: Callable[[np.ndarray], np.ndarray]
    inverse: Callable[[np.ndarray], np.ndarray]
    log_abs_det_jac_inv: Callable[[np.ndarray], np.ndarray]
    domain: ParameterSpace
    image: ParameterSpace

    def round_trip_error(self, theta) -> float:
        theta = np.asarray(theta, dtype=float)
        return float(np.max(np.abs(self.inverse(self.forward(theta)) - theta)))


def identity_map(space: ParameterSpace) -> Reparameterization:
    return Reparameterization(
        "identity",
        lambda t: np.asarray(t, dtype=float),
        lambda w: np.asarray(w, dtype=float),
        lambda w: np.zeros(np.shape(w)[:-1]),
        space,
        space,
    )


def affine_map(space: ParameterSpace, scale=2.0, shift=-1.0) -> Reparameterization:
    """omega_i = scale_i * theta_i + shift_i on a box space."""
    if space.simplex:
        raise InapplicableMapError("affine map does not preserve the simplex")
    k = space.ambient_dim
    a = np.broadcast_to(np.asarray(scale, dtype=float), (k,)).copy()
    b = np.broadcast_to(np.asarray(shift, dtype=float), (k,)).copy()
    if np.any(a == 0) or not np.all(np.isfinite(a)):
        raise InapplicableMapError("affine scale must be finite and nonzero")
    ends = np.stack([a * np.asarray(space.lower) + b, a * np.asarray(space.upper) + b])
    with np.errstate(invalid="ignore"):
        lower = np.nanmin(ends, axis=0)
        upper = np.nanmax(ends, axis=0)
    image = ParameterSpace(tuple(f"omega_{l}" for l in space.labels), tuple(lower), tuple(upper))
    logdet = -float(np.log(np.abs(a)).sum())
    return Reparameterization(
        "affine",
        lambda t: a * np.asarray(t, dtype=float) + b,
        lambda w: (np.asarray(w, dtype=float) - b) / a,
        lambda w: np.full(np.shape(w)[:-1], logdet),
        space,
        image,
    )


def log_map(space: ParameterSpace) -> Reparameterization:
    """omega = log(theta) coordinatewise, for coordinates bounded below by 0."""
    if space.simplex or any(lo != 0.0 for lo in space.lower):
        raise InapplicableMapError("log map needs every coordinate bounded below by 0")
    upper = tuple(math.log(u) if math.isfinite(u) else math.inf for u in space.upper)
    image = ParameterSpace(
        tuple(f"log_{l}" for l in space.labels), (-math.inf,) * space.ambient_dim, upper
    )
    return Reparameterization(
        "log",
        lambda t: np.log(np.asarray(t, dtype=float)),
        lambda w: np.exp(np.asarray(w, dtype=float)),
        lambda w: np.asarray(w, dtype=float).sum(axis=-1),
        space,
        image,
    )


def logodds_map(space: ParameterSpace) -> Reparameterization:
    """omega = log(theta / (1 - theta)) coordinatewise on (0, 1) coordinates."""
    if space.simplex or any(lo != 0.0 or hi != 1.0 for lo, hi in zip(space.lower, space.upper)):
        raise InapplicableMapError("log-odds map needs every coordinate in [0, 1] (not a simplex)")
    k = space.ambient_dim
    image = ParameterSpace(
        tuple(f"logit_{l}" for l in space.labels), (-math.inf,) * k, (math.inf,) * k
    )
    return Reparameterization(
        "logodds",
        lambda t: logit(np.asarray(t, dtype=float)),
        lambda w: expit(np.asarray(w, dtype=float)),
        lambda w: (log_expit(np.asarray(w, dtype=float)) + log_expit(-np.asarray(w, dtype=float))).sum(
            axis=-1
        ),
        space,
        image,
    )


def stick_breaking_map(space: ParameterSpace) -> Reparameterization:
    """Simplex (K coords) to stick fractions in (0, 1)^(K-1).

    omega_k = theta_k / (1 - theta_1 - ... - theta_{k-1}).
    """
    if not space.simplex:
        raise InapplicableMapError("stick-breaking map needs a simplex space")
    k = space.ambient_dim
    image = ParameterSpace.box([f"stick{i + 1}" for i in range(k - 1)], [0.0] * (k - 1), [1.0] * (k - 1))
    powers = np.arange(k - 2, -1, -1, dtype=float)

    def forward(t):
        t = np.asarray(t, dtype=float)
        remaining = 1.0 - np.concatenate([np.zeros(t.shape[:-1] + (1,)), np.cumsum(t[..., :-2], axis=-1)], axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = t[..., :-1] / remaining
        return np.clip(np.nan_to_num(w, nan=0.0), 0.0, 1.0)

    def inverse(w):
        w = np.asarray(w, dtype=float)
        rest = np.cumprod(1.0 - w, axis=-1)
        before = np.concatenate([np.ones(w.shape[:-1] + (1,)), rest[..., :-1]], axis=-1)
        return np.concatenate([w * before, rest[..., -1:]], axis=-1)

    def logdet(w):
        w = np.asarray(w, dtype=float)
        with np.errstate(divide="ignore"):
            return (powers * np.log1p(-w)).sum(axis=-1)

    return Reparameterization("stick_breaking", forward, inverse, logdet, space, image)


MAPS = {
    "identity": identity_map,
    "affine": affine_map,
    "log": log_map,
    "logodds": logodds_map,
    "stick_breaking": stick_breaking_map,
}


def named_map(name: str, space: ParameterSpace) -> Reparameterization:
    try:
        factory = MAPS[name]
    except KeyError:
        raise InapplicableMapError(f"unknown reparameterization {name!r}; expected one of {sorted(MAPS)}") from None
    return factory(space)


def pushforward_model(model: PosteriorModel, rep: Reparameterization) -> PosteriorModel:
    """Posterior of omega = phi(theta): p(phi^-1(omega)) |J(omega)|.

    A direct sampler, when present, is carried over by mapping draws.
    """
    base_sampler = model.sampler
    sampler = None
    if base_sampler is not None:
        sampler = lambda n, rng: rep.forward(base_sampler(n, rng))

    def log_potential(w):
        with np.errstate(invalid="ignore"):
            return np.asarray(model.log_potential(rep.inverse(w)), dtype=float) + rep.log_abs_det_jac_inv(w)

    return PosteriorModel(
        space=rep.image,
        log_potential_fn=log_potential,
        family="custom",
        sampler=sampler,
        initial=tuple(float(v) for v in rep.forward(model.initial_point())),
    )


def pushforward(sf: SurpriseFunction, rep: Reparameterization) -> SurpriseFunction:
    """Surprise in the new coordinates; the Jacobian cancels so s~(phi(theta)) = s(theta)."""
    probe = sf.posterior.initial_point()
    if rep.round_trip_error(probe) > 1e-8:
        raise InapplicableMapError(f"map {rep.name!r} is not invertible at {probe.tolist()}")
    reference = sf.reference

    def log_ref(w):
        with np.errstate(invalid="ignore"):
            return np.asarray(reference(rep.inverse(w)), dtype=float) + rep.log_abs_det_jac_inv(w)

    return SurpriseFunction(pushforward_model(sf.posterior, rep), ReferenceDensity(reference.kind, log_ref))
