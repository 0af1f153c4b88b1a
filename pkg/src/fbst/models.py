"""Parameter spaces, built-in conjugate families and posterior potentials.

All densities live in log space.  Built-in families return normalized log
densities (the normalizer is cheap and makes values comparable with
closed-form oracles); custom models may return any unnormalized potential.

Points are float arrays whose last axis is the *ambient* coordinate axis.
Simplex parameters keep all K coordinates; their effective dimension is K-1
and integration densities are taken with respect to Lebesgue measure on the
first K-1 coordinates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from scipy.special import betaln, gammaln, log_expit, xlog1py, xlogy, expit, logit

from .errors import DimensionError, ValidationError

FAMILIES = ("bernoulli", "multinomial", "poisson", "normal", "normal_mv")

SIMPLEX_TOL = 1e-10


@dataclass(frozen=True)
class ParameterSpace:
    """Coordinate labels, per-coordinate bounds and an optional simplex flag.

    Bounds are closed for evaluation purposes: a point on a boundary is inside
    the support and its density follows the closed-form expression (which may
    be zero).  Infinite bounds use ``math.inf``.
    """

    labels: tuple[str, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    simplex: bool = False

    def __post_init__(self):
        k = len(self.labels)
        if k < 1:
            raise ValidationError("parameter space needs at least one coordinate")
        if len(self.lower) != k or len(self.upper) != k:
            raise ValidationError("bounds must match the number of labels")
        for lo, hi in zip(self.lower, self.upper):
            if not lo < hi:
                raise ValidationError(f"empty coordinate range [{lo}, {hi}]")
        if self.simplex:
            if k < 2:
                raise ValidationError("a simplex needs at least two categories")
            if any(lo != 0.0 or hi != 1.0 for lo, hi in zip(self.lower, self.upper)):
                raise ValidationError("simplex coordinates must have bounds [0, 1]")

    @classmethod
    def box(cls, labels: Sequence[str], lower: Sequence[float], upper: Sequence[float]):
        return cls(tuple(labels), tuple(float(v) for v in lower), tuple(float(v) for v in upper))

    @classmethod
    def simplex_of(cls, labels: Sequence[str]):
        k = len(labels)
        return cls(tuple(labels), (0.0,) * k, (1.0,) * k, simplex=True)

    @property
    def ambient_dim(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        """Effective dimension t."""
        return self.ambient_dim - 1 if self.simplex else self.ambient_dim

    def check_point(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.ndim == 0 or theta.shape[-1] != self.ambient_dim:
            raise DimensionError(
                f"expected points with {self.ambient_dim} coordinates, got shape {theta.shape}"
            )
        return theta

    def contains(self, theta, tol: float = 1e-12) -> np.ndarray:
        theta = self.check_point(theta)
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        inside = np.all((theta >= lo - tol) & (theta <= hi + tol), axis=-1)
        if self.simplex:
            inside &= np.abs(theta.sum(axis=-1) - 1.0) <= max(tol, SIMPLEX_TOL)
        return inside

    # Unconstrained coordinates: logit for finite intervals, log for half
    # lines, identity for the real line, additive log-ratio for the simplex.

    def to_unconstrained(self, theta) -> np.ndarray:
        theta = self.check_point(theta)
        if self.simplex:
            with np.errstate(divide="ignore"):
                logs = np.log(theta)
            return logs[..., :-1] - logs[..., -1:]
        u = np.empty_like(theta)
        with np.errstate(divide="ignore", invalid="ignore"):
            for i, (lo, hi) in enumerate(zip(self.lower, self.upper)):
                x = theta[..., i]
                if math.isfinite(lo) and math.isfinite(hi):
                    u[..., i] = logit((x - lo) / (hi - lo))
                elif math.isfinite(lo):
                    u[..., i] = np.log(x - lo)
                elif math.isfinite(hi):
                    u[..., i] = np.log(hi - x)
                else:
                    u[..., i] = x
        return u

    def from_unconstrained(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.simplex:
            full = np.concatenate([u, np.zeros(u.shape[:-1] + (1,))], axis=-1)
            full = full - full.max(axis=-1, keepdims=True)
            e = np.exp(full)
            return e / e.sum(axis=-1, keepdims=True)
        theta = np.empty_like(u)
        for i, (lo, hi) in enumerate(zip(self.lower, self.upper)):
            x = u[..., i]
            if math.isfinite(lo) and math.isfinite(hi):
                theta[..., i] = lo + (hi - lo) * expit(x)
            elif math.isfinite(lo):
                theta[..., i] = lo + np.exp(x)
            elif math.isfinite(hi):
                theta[..., i] = hi - np.exp(x)
            else:
                theta[..., i] = x
        return theta

    def log_jacobian(self, u) -> np.ndarray:
        """log |det d(theta_1..theta_t)/du| of :meth:`from_unconstrained`."""
        u = np.asarray(u, dtype=float)
        if self.simplex:
            theta = self.from_unconstrained(u)
            with np.errstate(divide="ignore"):
                return np.log(theta).sum(axis=-1)
        out = np.zeros(u.shape[:-1])
        for i, (lo, hi) in enumerate(zip(self.lower, self.upper)):
            x = u[..., i]
            if math.isfinite(lo) and math.isfinite(hi):
                out = out + math.log(hi - lo) + log_expit(x) + log_expit(-x)
            elif math.isfinite(lo) or math.isfinite(hi):
                out = out + x
        return out

    def embed(self, q) -> np.ndarray:
        """Map the t free coordinates to an ambient point (fills the last simplex coordinate)."""
        q = np.asarray(q, dtype=float)
        if self.simplex:
            return np.concatenate([q, 1.0 - q.sum(axis=-1, keepdims=True)], axis=-1)
        return q


@dataclass(frozen=True)
class DataSet:
    """Sufficient statistics for one family; raw observations are reduced on ingestion."""

    family: str
    stats: Mapping[str, Any]

    def __post_init__(self):
        _family(self.family).validate_data(self.stats)

    @classmethod
    def from_observations(cls, family: str, observations, **kwargs) -> "DataSet":
        return cls(family, _family(family).reduce(observations, **kwargs))

    @property
    def n(self) -> int:
        return _family(self.family).sample_size(self.stats)

    def __add__(self, other: "DataSet") -> "DataSet":
        if other.family != self.family:
            raise ValidationError(f"cannot pool {self.family} with {other.family} data")
        return DataSet(self.family, _family(self.family).pool(self.stats, other.stats))


@dataclass(frozen=True)
class Prior:
    family: str
    params: Mapping[str, Any]

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown family {self.family!r}")
        object.__setattr__(self, "params", _family(self.family).validate_prior(self.params))


@dataclass(frozen=True)
class PosteriorModel:
    """Log-potential over a parameter space, with an optional direct sampler.

    ``family`` is ``"custom"`` for user models; built-ins carry their
    conjugate hyperparameters in ``hyper``.
    """

    space: ParameterSpace
    log_potential_fn: Callable[[np.ndarray], np.ndarray]
    family: str = "custom"
    hyper: Mapping[str, Any] | None = None
    sampler: Callable[[int, np.random.Generator], np.ndarray] | None = None
    initial: tuple[float, ...] | None = None
    vectorized: bool = True
    extra: Mapping[str, Any] = field(default_factory=dict)

    def log_potential(self, theta):
        theta = self.space.check_point(theta)
        if self.vectorized:
            out = np.asarray(self.log_potential_fn(theta), dtype=float)
        else:
            flat = theta.reshape(-1, self.space.ambient_dim)
            out = np.array([float(self.log_potential_fn(p)) for p in flat]).reshape(theta.shape[:-1])
        out = np.where(self.space.contains(theta), out, -np.inf)
        out = np.where(np.isnan(out), -np.inf, out)
        return out if out.ndim else float(out)

    @property
    def has_direct_sampler(self) -> bool:
        return self.sampler is not None

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.sampler is None:
            from .errors import SamplerError

            raise SamplerError(f"model {self.family!r} has no direct sampler")
        return np.asarray(self.sampler(n, rng), dtype=float).reshape(n, self.space.ambient_dim)

    def initial_point(self) -> np.ndarray:
        if self.initial is not None:
            return np.asarray(self.initial, dtype=float)
        if self.family in FAMILIES:
            return _family(self.family).mean(self.hyper)
        lo = np.asarray(self.space.lower)
        hi = np.asarray(self.space.upper)
        if self.space.simplex:
            return np.full(self.space.ambient_dim, 1.0 / self.space.ambient_dim)
        mid = np.where(np.isfinite(lo) & np.isfinite(hi), 0.5 * (lo + hi), 0.0)
        mid = np.where(np.isfinite(lo) & ~np.isfinite(hi), lo + 1.0, mid)
        mid = np.where(~np.isfinite(lo) & np.isfinite(hi), hi - 1.0, mid)
        return mid

    def as_prior(self) -> Prior:
        if self.family not in FAMILIES:
            raise ValidationError("only built-in posteriors can serve as priors")
        return Prior(self.family, self.hyper)

    def mode(self) -> np.ndarray:
        """Closed-form posterior mode of a built-in family."""
        if self.family not in FAMILIES:
            raise ValidationError("closed-form mode is only available for built-in families")
        return _family(self.family).mode(self.hyper)


# --------------------------------------------------------------------------
# Families
# --------------------------------------------------------------------------


def _positive(name, value):
    value = float(value)
    if not (value > 0 and math.isfinite(value)):
        raise ValidationError(f"{name} must be positive and finite, got {value}")
    return value


def _count(name, value):
    if isinstance(value, bool) or int(value) != value or value < 0:
        raise ValidationError(f"{name} must be a nonnegative integer, got {value}")
    return int(value)


class _Family:
    name: str

    def validate_prior(self, params): ...
    def validate_data(self, stats): ...
    def reduce(self, observations, **kwargs): ...
    def pool(self, a, b): ...
    def sample_size(self, stats): ...
    def update(self, params, stats): ...
    def space(self, params) -> ParameterSpace: ...
    def log_density(self, params, theta): ...
    def draw(self, params, n, rng): ...
    def mean(self, params): ...
    def mode(self, params): ...
    def fisher(self, theta, params): ...
    def log_jeffreys(self, theta, params): ...
    def simulate(self, theta0, n, rng, params): ...


class _BetaBernoulli(_Family):
    name = "bernoulli"

    def validate_prior(self, params):
        return {"a": _positive("a", params["a"]), "b": _positive("b", params["b"])}

    def validate_data(self, stats):
        s = _count("successes", stats["successes"])
        n = _count("trials", stats["trials"])
        if s > n:
            raise ValidationError("successes cannot exceed trials")
        if n < 1:
            raise ValidationError("trials must be at least 1")

    def reduce(self, observations):
        obs = [_count("observation", x) for x in observations]
        if any(x > 1 for x in obs):
            raise ValidationError("Bernoulli observations must be 0 or 1")
        return {"successes": sum(obs), "trials": len(obs)}

    def pool(self, a, b):
        return {"successes": a["successes"] + b["successes"], "trials": a["trials"] + b["trials"]}

    def sample_size(self, stats):
        return int(stats["trials"])

    def update(self, params, stats):
        s, n = int(stats["successes"]), int(stats["trials"])
        return {"a": params["a"] + s, "b": params["b"] + n - s}

    def space(self, params):
        return ParameterSpace.box(["theta"], [0.0], [1.0])

    def log_density(self, params, theta):
        a, b = params["a"], params["b"]
        x = theta[..., 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            return xlogy(a - 1.0, x) + xlog1py(b - 1.0, -x) - betaln(a, b)

    def draw(self, params, n, rng):
        return rng.beta(params["a"], params["b"], size=n)[:, None]

    def mean(self, params):
        return np.array([params["a"] / (params["a"] + params["b"])])

    def mode(self, params):
        a, b = params["a"], params["b"]
        if a > 1 and b > 1:
            return np.array([(a - 1.0) / (a + b - 2.0)])
        return np.array([0.0 if a <= b else 1.0])

    def fisher(self, theta, params):
        x = float(theta[0])
        return np.array([[1.0 / (x * (1.0 - x))]])

    def log_jeffreys(self, theta, params):
        x = theta[..., 0]
        with np.errstate(divide="ignore"):
            return -0.5 * (np.log(x) + np.log1p(-x))

    def simulate(self, theta0, n, rng, params):
        return {"successes": int(rng.binomial(n, float(theta0[0]))), "trials": int(n)}


class _DirichletMultinomial(_Family):
    name = "multinomial"

    def validate_prior(self, params):
        alpha = tuple(_positive("alpha", a) for a in params["alpha"])
        if len(alpha) < 2:
            raise ValidationError("Dirichlet prior needs at least two categories")
        return {"alpha": alpha}

    def validate_data(self, stats):
        counts = [_count("count", c) for c in stats["counts"]]
        if len(counts) < 2:
            raise ValidationError("multinomial data needs at least two categories")
        if sum(counts) < 1:
            raise ValidationError("multinomial data needs at least one observation")

    def reduce(self, observations, categories: int | None = None):
        obs = [_count("category", x) for x in observations]
        k = categories if categories is not None else max(obs) + 1
        counts = [0] * k
        for x in obs:
            if x >= k:
                raise ValidationError(f"category {x} out of range for {k} categories")
            counts[x] += 1
        return {"counts": tuple(counts)}

    def pool(self, a, b):
        if len(a["counts"]) != len(b["counts"]):
            raise ValidationError("category counts differ in length")
        return {"counts": tuple(x + y for x, y in zip(a["counts"], b["counts"]))}

    def sample_size(self, stats):
        return int(sum(stats["counts"]))

    def update(self, params, stats):
        if len(params["alpha"]) != len(stats["counts"]):
            raise ValidationError("prior and data disagree on the number of categories")
        return {"alpha": tuple(a + c for a, c in zip(params["alpha"], stats["counts"]))}

    def space(self, params):
        k = len(params["alpha"])
        return ParameterSpace.simplex_of([f"theta{i + 1}" for i in range(k)])

    def log_density(self, params, theta):
        alpha = np.asarray(params["alpha"])
        norm = gammaln(alpha).sum() - gammaln(alpha.sum())
        with np.errstate(divide="ignore", invalid="ignore"):
            return xlogy(alpha - 1.0, theta).sum(axis=-1) - norm

    def draw(self, params, n, rng):
        return rng.dirichlet(params["alpha"], size=n)

    def mean(self, params):
        alpha = np.asarray(params["alpha"])
        return alpha / alpha.sum()

    def mode(self, params):
        alpha = np.asarray(params["alpha"])
        if np.all(alpha > 1):
            return (alpha - 1.0) / (alpha.sum() - alpha.size)
        raise ValidationError("Dirichlet mode is on the boundary; no interior closed form")

    def fisher(self, theta, params):
        theta = np.asarray(theta, dtype=float)
        free = theta[:-1]
        return np.diag(1.0 / free) + 1.0 / theta[-1]

    def log_jeffreys(self, theta, params):
        with np.errstate(divide="ignore"):
            return -0.5 * np.log(theta).sum(axis=-1)

    def simulate(self, theta0, n, rng, params):
        return {"counts": tuple(int(c) for c in rng.multinomial(n, np.asarray(theta0, dtype=float)))}


class _GammaPoisson(_Family):
    name = "poisson"

    def validate_prior(self, params):
        return {"a": _positive("a", params["a"]), "b": _positive("b", params["b"])}

    def validate_data(self, stats):
        _count("total", stats["total"])
        if not float(stats["exposure"]) >= 1:
            raise ValidationError("exposure must be at least 1")

    def reduce(self, observations):
        obs = [_count("observation", x) for x in observations]
        return {"total": sum(obs), "exposure": len(obs)}

    def pool(self, a, b):
        return {"total": a["total"] + b["total"], "exposure": a["exposure"] + b["exposure"]}

    def sample_size(self, stats):
        return int(stats["exposure"])

    def update(self, params, stats):
        return {"a": params["a"] + stats["total"], "b": params["b"] + stats["exposure"]}

    def space(self, params):
        return ParameterSpace.box(["lambda"], [0.0], [math.inf])

    def log_density(self, params, theta):
        a, b = params["a"], params["b"]
        x = theta[..., 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            return xlogy(a - 1.0, x) - b * x + a * math.log(b) - gammaln(a)

    def draw(self, params, n, rng):
        return rng.gamma(params["a"], 1.0 / params["b"], size=n)[:, None]

    def mean(self, params):
        return np.array([params["a"] / params["b"]])

    def mode(self, params):
        return np.array([max(params["a"] - 1.0, 0.0) / params["b"]])

    def fisher(self, theta, params):
        return np.array([[1.0 / float(theta[0])]])

    def log_jeffreys(self, theta, params):
        with np.errstate(divide="ignore"):
            return -0.5 * np.log(theta[..., 0])

    def simulate(self, theta0, n, rng, params):
        return {"total": int(rng.poisson(n * float(theta0[0]))), "exposure": int(n)}


class _NormalKnownVariance(_Family):
    """K independent group means, common known sampling sd ``sigma``."""

    name = "normal"

    def validate_prior(self, params):
        mean = tuple(float(m) for m in np.atleast_1d(params["mean"]))
        sd = tuple(_positive("sd", s) for s in np.atleast_1d(params["sd"]))
        if len(sd) == 1 and len(mean) > 1:
            sd = sd * len(mean)
        if len(mean) != len(sd):
            raise ValidationError("prior mean and sd lengths differ")
        return {"mean": mean, "sd": sd, "sigma": _positive("sigma", params["sigma"])}

    def validate_data(self, stats):
        ns = [_count("n", v) for v in stats["n"]]
        if len(ns) != len(stats["sum"]) or any(v < 1 for v in ns):
            raise ValidationError("every group needs n >= 1 and a matching sum")

    def reduce(self, observations):
        groups = observations
        if len(groups) and not isinstance(groups[0], (list, tuple, np.ndarray)):
            groups = [groups]
        return {
            "n": tuple(len(g) for g in groups),
            "sum": tuple(math.fsum(float(x) for x in g) for g in groups),
        }

    def pool(self, a, b):
        return {
            "n": tuple(x + y for x, y in zip(a["n"], b["n"])),
            "sum": tuple(x + y for x, y in zip(a["sum"], b["sum"])),
        }

    def sample_size(self, stats):
        return int(sum(stats["n"]))

    def update(self, params, stats):
        if len(stats["n"]) != len(params["mean"]):
            raise ValidationError("prior and data disagree on the number of groups")
        s2 = params["sigma"] ** 2
        mean, sd = [], []
        for m, s, n, tot in zip(params["mean"], params["sd"], stats["n"], stats["sum"]):
            prec = 1.0 / s**2 + n / s2
            mean.append((m / s**2 + tot / s2) / prec)
            sd.append(math.sqrt(1.0 / prec))
        return {"mean": tuple(mean), "sd": tuple(sd), "sigma": params["sigma"]}

    def space(self, params):
        k = len(params["mean"])
        labels = ["mu"] if k == 1 else [f"mu{i + 1}" for i in range(k)]
        return ParameterSpace.box(labels, [-math.inf] * k, [math.inf] * k)

    def log_density(self, params, theta):
        m = np.asarray(params["mean"])
        s = np.asarray(params["sd"])
        z = (theta - m) / s
        return (-0.5 * z**2 - np.log(s) - 0.5 * math.log(2 * math.pi)).sum(axis=-1)

    def draw(self, params, n, rng):
        return rng.normal(params["mean"], params["sd"], size=(n, len(params["mean"])))

    def mean(self, params):
        return np.asarray(params["mean"], dtype=float)

    mode = mean

    def fisher(self, theta, params):
        k = np.asarray(theta).shape[-1]
        return np.eye(k) / params["sigma"] ** 2

    def log_jeffreys(self, theta, params):
        return np.zeros(np.shape(theta)[:-1])

    def simulate(self, theta0, n, rng, params):
        sigma = params["sigma"]
        mu = np.asarray(theta0, dtype=float)
        sums = rng.normal(n * mu, sigma * math.sqrt(n))
        return {"n": tuple([int(n)] * mu.size), "sum": tuple(float(x) for x in sums)}


class _NormalMeanVariance(_Family):
    """Single normal sample, unknown (mu, sigma^2), Normal-Inverse-Gamma prior."""

    name = "normal_mv"

    def validate_prior(self, params):
        return {
            "mu0": float(params["mu0"]),
            "kappa0": _positive("kappa0", params["kappa0"]),
            "alpha0": _positive("alpha0", params["alpha0"]),
            "beta0": _positive("beta0", params["beta0"]),
        }

    def validate_data(self, stats):
        if _count("n", stats["n"]) < 1:
            raise ValidationError("n must be at least 1")
        float(stats["sum"])
        if float(stats["sumsq"]) < 0:
            raise ValidationError("sumsq must be nonnegative")

    def reduce(self, observations):
        xs = [float(x) for x in observations]
        return {"n": len(xs), "sum": math.fsum(xs), "sumsq": math.fsum(x * x for x in xs)}

    def pool(self, a, b):
        return {k: a[k] + b[k] for k in ("n", "sum", "sumsq")}

    def sample_size(self, stats):
        return int(stats["n"])

    def update(self, params, stats):
        n, tot, sq = int(stats["n"]), float(stats["sum"]), float(stats["sumsq"])
        mu0, k0, a0, b0 = params["mu0"], params["kappa0"], params["alpha0"], params["beta0"]
        xbar = tot / n
        ss = max(sq - n * xbar * xbar, 0.0)
        kn = k0 + n
        return {
            "mu0": (k0 * mu0 + tot) / kn,
            "kappa0": kn,
            "alpha0": a0 + 0.5 * n,
            "beta0": b0 + 0.5 * ss + 0.5 * k0 * n * (xbar - mu0) ** 2 / kn,
        }

    def space(self, params):
        return ParameterSpace.box(["mu", "sigma2"], [-math.inf, 0.0], [math.inf, math.inf])

    def log_density(self, params, theta):
        mu0, k, a, b = params["mu0"], params["kappa0"], params["alpha0"], params["beta0"]
        m = theta[..., 0]
        v = theta[..., 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (
                0.5 * math.log(k / (2 * math.pi))
                - 0.5 * np.log(v)
                - 0.5 * k * (m - mu0) ** 2 / v
                + a * math.log(b)
                - gammaln(a)
                - (a + 1.0) * np.log(v)
                - b / v
            )
        return np.where(v > 0, out, -np.inf)

    def draw(self, params, n, rng):
        v = params["beta0"] / rng.gamma(params["alpha0"], 1.0, size=n)
        m = rng.normal(params["mu0"], np.sqrt(v / params["kappa0"]))
        return np.column_stack([m, v])

    def mean(self, params):
        a, b = params["alpha0"], params["beta0"]
        v = b / (a - 1.0) if a > 1 else b / (a + 1.0)
        return np.array([params["mu0"], v])

    def mode(self, params):
        return np.array([params["mu0"], params["beta0"] / (params["alpha0"] + 1.5)])

    def fisher(self, theta, params):
        v = float(theta[1])
        return np.diag([1.0 / v, 0.5 / v**2])

    def log_jeffreys(self, theta, params):
        with np.errstate(divide="ignore"):
            return -1.5 * np.log(theta[..., 1]) - 0.5 * math.log(2.0)

    def simulate(self, theta0, n, rng, params):
        mu, v = float(theta0[0]), float(theta0[1])
        xbar = rng.normal(mu, math.sqrt(v / n))
        ss = v * rng.chisquare(n - 1) if n > 1 else 0.0
        return {"n": int(n), "sum": n * xbar, "sumsq": ss + n * xbar * xbar}


_REGISTRY: dict[str, _Family] = {
    f.name: f
    for f in (
        _BetaBernoulli(),
        _DirichletMultinomial(),
        _GammaPoisson(),
        _NormalKnownVariance(),
        _NormalMeanVariance(),
    )
}


def _family(name: str) -> _Family:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise ValidationError(f"unknown family {name!r}; expected one of {FAMILIES}") from None


# --------------------------------------------------------------------------
# Operations
# --------------------------------------------------------------------------


def conjugate_posterior_update(prior: Prior, data: DataSet) -> PosteriorModel:
    """Closed-form posterior for a built-in family.

    >>> post = conjugate_posterior_update(Prior("bernoulli", {"a": 1, "b": 1}),
    ...                                   DataSet("bernoulli", {"successes": 3, "trials": 4}))
    >>> post.hyper["a"], post.hyper["b"]
    (4.0, 2.0)
    """
    if prior.family != data.family:
        raise ValidationError(f"prior family {prior.family!r} does not match data family {data.family!r}")
    fam = _family(prior.family)
    hyper = fam.validate_prior(fam.update(prior.params, data.stats))
    return model_from_hyper(prior.family, hyper)


def model_from_hyper(family: str, hyper: Mapping[str, Any]) -> PosteriorModel:
    """Build a posterior model directly from (posterior) hyperparameters."""
    fam = _family(family)
    hyper = fam.validate_prior(hyper)
    return PosteriorModel(
        space=fam.space(hyper),
        log_potential_fn=lambda theta: fam.log_density(hyper, theta),
        family=family,
        hyper=hyper,
        sampler=lambda n, rng: fam.draw(hyper, n, rng),
    )


def custom_model(
    log_potential: Callable,
    space: ParameterSpace,
    *,
    initial: Sequence[float] | None = None,
    sampler: Callable[[int, np.random.Generator], np.ndarray] | None = None,
    vectorized: bool = False,
) -> PosteriorModel:
    """Wrap a user log-potential callback.

    The callback receives ambient points and returns unnormalized log density.
    With ``vectorized=False`` it is called once per point.  Regularity
    conditions needed by the asymptotic results are the caller's
    responsibility and are not checked.
    """
    init = None if initial is None else tuple(float(v) for v in initial)
    return PosteriorModel(
        space=space,
        log_potential_fn=log_potential,
        sampler=sampler,
        initial=init,
        vectorized=vectorized,
    )


def log_posterior_potential(model: PosteriorModel, theta):
    return model.log_potential(theta)


def fisher_information(family: str, theta, **params) -> np.ndarray:
    """Per-observation Fisher information in the effective coordinates.

    For the multinomial the matrix is (K-1) x (K-1) over the first K-1
    coordinates; ``normal`` needs the known sampling sd as ``sigma``.
    """
    fam = _family(family)
    theta = np.asarray(theta, dtype=float)
    if family == "normal":
        params.setdefault("sigma", 1.0)
        return fam.fisher(theta, params)
    space = fam.space({"alpha": (1.0,) * theta.size} if family == "multinomial" else {})
    space.check_point(theta)
    lo = np.asarray(space.lower)
    hi = np.asarray(space.upper)
    interior = np.all((theta > lo) & (theta < hi))
    if family == "multinomial":
        interior = interior and abs(theta.sum() - 1.0) <= SIMPLEX_TOL
    if not interior:
        raise ValidationError(f"Fisher information requires an interior point, got {theta}")
    return fam.fisher(theta, params)


def simulate_data(family: str, theta0, n: int, seed, **params) -> DataSet:
    """Draw a data set of size ``n`` at the true parameter ``theta0``.

    ``seed`` may be an int, a sequence of ints, or a numpy Generator; the same
    seed always yields the same statistics.
    """
    fam = _family(family)
    theta0 = np.asarray(theta0, dtype=float)
    if int(n) != n or n < 1:
        raise ValidationError("sample size must be a positive integer")
    if family == "normal":
        params = {"sigma": float(params.get("sigma", 1.0))}
        ok = np.all(np.isfinite(theta0))
    elif family == "multinomial":
        ok = np.all(theta0 >= 0) and abs(theta0.sum() - 1.0) <= SIMPLEX_TOL and theta0.size >= 2
    else:
        space = fam.space(params)
        ok = theta0.shape == (space.ambient_dim,) and bool(space.contains(theta0))
        if family == "normal_mv":
            ok = ok and theta0[1] > 0
    if not ok:
        raise ValidationError(f"theta0={theta0.tolist()} is outside the {family} support")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return DataSet(family, fam.simulate(theta0, int(n), rng, params))


def log_jeffreys_density(family: str, theta, **params) -> np.ndarray:
    """Vectorized 0.5 * log det G(theta), up to an additive constant."""
    return _family(family).log_jeffreys(np.asarray(theta, dtype=float), params)
