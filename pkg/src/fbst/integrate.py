"""Posterior sampling, the cumulative surprise distribution and e-values."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
from scipy.integrate import quad, quad_vec
from scipy.optimize import brentq, minimize, minimize_scalar

from .errors import SamplerError, ValidationError
from .models import ParameterSpace, PosteriorModel
from .surprise import SurpriseFunction, log_surprise

DEFAULT_N = 100_000
CURVE_KNOTS = 512


@dataclass(frozen=True)
class PosteriorSample:
    draws: np.ndarray
    method: str
    seed: Any
    diagnostics: Mapping[str, Any] = field(default_factory=dict)
    ess: float = math.nan

    @property
    def n(self) -> int:
        return self.draws.shape[0]


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def sample_posterior_direct(model: PosteriorModel, n: int, seed) -> PosteriorSample:
    if not model.has_direct_sampler:
        raise SamplerError("model has no direct sampler; use MCMC")
    if n < 1:
        raise ValidationError("sample size must be positive")
    draws = model.sample(int(n), _rng(seed))
    return PosteriorSample(draws, "direct", seed, {}, float(n))


# --------------------------------------------------------------------------
# Effective sample size
# --------------------------------------------------------------------------


def autocorrelation(x) -> np.ndarray:
    """Normalized autocorrelation of a 1-D series via FFT."""
    x = np.asarray(x, dtype=float)
    n = x.size
    x = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, size)
    acf = np.fft.irfft(f * np.conjugate(f), size)[:n]
    if acf[0] <= 0:
        return np.zeros(n)
    return acf / acf[0]


def effective_sample_size(x) -> float:
    """ESS of a scalar chain; autocorrelation sum truncated at the first negative pair.

    Consecutive lags are summed in pairs (rho_{2k} + rho_{2k+1}); summation
    stops at the first pair whose sum is negative.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 4 or np.all(x == x[0]):
        return float(n)
    rho = autocorrelation(x)
    total = 0.0
    for k in range(0, n - 1, 2):
        pair = rho[k] + rho[k + 1]
        if pair < 0:
            break
        total += pair
    tau = max(2.0 * total - 1.0, 1.0 / n)
    return float(min(n, n / tau))


# --------------------------------------------------------------------------
# Adaptive random-walk Metropolis
# --------------------------------------------------------------------------


def _find_start(model: PosteriorModel, rng: np.random.Generator, space: ParameterSpace):
    def target(u):
        with np.errstate(all="ignore"):
            val = model.log_potential(space.from_unconstrained(u)) + space.log_jacobian(u)
        return float(val)

    with np.errstate(all="ignore"):
        u = space.to_unconstrained(model.initial_point())
    if np.all(np.isfinite(u)):
        val = target(u)
        if np.isfinite(val):
            return u, val
    for _ in range(1000):
        u = rng.normal(0.0, 3.0, size=space.dim)
        val = target(u)
        if np.isfinite(val):
            return u, val
    raise SamplerError("no point with finite log-potential found; cannot start the chain")


def sample_posterior_mcmc(model: PosteriorModel, n: int, seed, tuning: Mapping[str, Any] | None = None) -> PosteriorSample:
    """Adaptive random-walk Metropolis in unconstrained coordinates.

    The proposal covariance adapts during burn-in (empirical covariance plus
    Robbins-Monro scale tuning towards the target acceptance) and is frozen
    afterwards, so the kept chain is a plain Metropolis chain.

    tuning keys: ``step_scale`` (initial proposal sd, > 0), ``burn_in``
    (fraction of n, default 0.1), ``thin`` (default 1), ``target_accept``.
    """
    tuning = dict(tuning or {})
    step = float(tuning.get("step_scale", 0.5))
    if not step > 0:
        raise ValidationError("step_scale must be positive")
    burn_frac = float(tuning.get("burn_in", 0.1))
    thin = int(tuning.get("thin", 1))
    if n < 1 or thin < 1 or burn_frac < 0:
        raise ValidationError("need n >= 1, thin >= 1 and burn_in >= 0")
    space = model.space
    d = space.dim
    target_accept = float(tuning.get("target_accept", 0.44 if d == 1 else 0.234))
    rng = _rng(seed)
    u, lp = _find_start(model, rng, space)

    burn = int(math.ceil(burn_frac * n * thin))
    total = burn + n * thin
    z = rng.standard_normal((total, d))
    log_uniform = np.log(rng.random(total))

    chol = np.eye(d) * step
    log_scale = 0.0
    mean = u.copy()
    cov = np.eye(d) * step**2
    base = 2.38**2 / d

    def log_target(v):
        with np.errstate(all="ignore"):
            val = model.log_potential(space.from_unconstrained(v)) + space.log_jacobian(v)
        val = float(val)
        return val if not math.isnan(val) else -math.inf

    out = np.empty((n, d))
    accepted_burn = 0
    accepted_kept = 0
    kept = 0
    for i in range(total):
        prop = u + math.exp(log_scale) * (chol @ z[i])
        lp_prop = log_target(prop)
        accept = log_uniform[i] < lp_prop - lp
        if accept:
            u, lp = prop, lp_prop
        if i < burn:
            accepted_burn += accept
            k = i + 1
            gamma = 1.0 / (k + 1) ** 0.6
            log_scale += gamma * ((1.0 if accept else 0.0) - target_accept)
            delta = u - mean
            mean = mean + delta / (k + 1)
            cov = cov + (np.outer(delta, delta) * k / (k + 1) - cov) / (k + 1)
            if k >= 2 * d + 10:
                try:
                    chol = np.linalg.cholesky(base * cov + 1e-10 * np.eye(d))
                except np.linalg.LinAlgError:
                    pass
        else:
            accepted_kept += accept
            j = i - burn
            if j % thin == thin - 1:
                out[kept] = u
                kept += 1

    draws = space.from_unconstrained(out)
    acc = accepted_kept / max(1, total - burn)
    ess = min(effective_sample_size(out[:, j]) for j in range(d))
    diagnostics = {
        "acceptance_rate": acc,
        "burn_in": burn,
        "thin": thin,
        "adapted_scale": math.exp(log_scale),
        "acceptance_in_band": bool(0.15 <= acc <= 0.6),
    }
    if not diagnostics["acceptance_in_band"]:
        warnings.warn(f"MCMC acceptance rate {acc:.3f} is outside the expected band after adaptation")
    return PosteriorSample(draws, "mcmc", seed, diagnostics, ess)


# --------------------------------------------------------------------------
# Truth function and e-value
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TruthFunction:
    """W(v): fraction of draws with surprise at most v, held as sorted log-surprises."""

    log_values: np.ndarray

    @property
    def n(self) -> int:
        return self.log_values.size

    def at_log(self, log_v) -> np.ndarray | float:
        idx = np.searchsorted(self.log_values, log_v, side="right")
        out = idx / self.n
        return out if np.ndim(out) else float(out)

    def __call__(self, v) -> np.ndarray | float:
        with np.errstate(divide="ignore"):
            return self.at_log(np.log(v))

    def curve(self, knots: int = CURVE_KNOTS) -> np.ndarray:
        """(log v, W(v)) at ``knots`` empirical quantiles of the log-surprise."""
        finite = self.log_values[np.isfinite(self.log_values)]
        if finite.size == 0:
            return np.empty((0, 2))
        levels = (np.arange(knots) + 0.5) / knots
        v = np.quantile(finite, levels, method="inverted_cdf")
        return np.column_stack([v, self.at_log(v)])


def truth_function(sample: PosteriorSample, sf: SurpriseFunction) -> TruthFunction:
    values = np.asarray(log_surprise(sf, sample.draws), dtype=float)
    return TruthFunction(np.sort(values))


@dataclass(frozen=True)
class EvalEstimate:
    ev: float
    se: float
    n: float
    method: str

    @property
    def ev_bar(self) -> float:
        return 1.0 - self.ev


def estimate_evalue(W: TruthFunction, log_s_star: float, n_eff: float | None = None) -> EvalEstimate:
    """ev = W(s*) with binomial standard error on the effective sample size.

    ``log_s_star`` is the log of s*; pass ``-inf`` for s* = 0.
    """
    if log_s_star is None or math.isnan(log_s_star):
        raise ValidationError("a valid s* from the hypothesis optimizer is required")
    ev = float(W.at_log(log_s_star))
    n_eff = float(W.n if n_eff is None else n_eff)
    se = math.sqrt(ev * (1.0 - ev) / n_eff) if n_eff > 0 else math.inf
    return EvalEstimate(ev, se, n_eff, "mc")


def indicator_ess(sample: PosteriorSample, sf: SurpriseFunction, log_s_star: float) -> float:
    """Effective size for the indicator chain 1[log s <= log s*] (draws in chain order)."""
    if sample.method != "mcmc":
        return float(sample.n)
    values = np.asarray(log_surprise(sf, sample.draws), dtype=float)
    ind = (values <= log_s_star).astype(float)
    return effective_sample_size(ind)


# --------------------------------------------------------------------------
# Quadrature route (t <= 2)
# --------------------------------------------------------------------------

_SNAP = 1e-13
# breakpoints around the density peak, in units of the local Laplace scale
_OFFSETS = np.array([0.5, 1.0, 2.0, 3.0, 4.5, 6.0, 8.0, 11.0, 15.0, 20.0])
_GL_X, _GL_W = np.polynomial.legendre.leggauss(40)


def _outward_root(fn, u0: float, level: float, direction: float, scale: float):
    """Nearest u beyond u0 (along ``direction``) with fn(u) = level, given fn(u0) > level.

    Returns None when fn stays above the level out to the edge of the chart.
    """
    step = max(scale, 1e-8)
    prev = u0
    for _ in range(200):
        cur = u0 + direction * step
        val = fn(cur)
        if not math.isfinite(val) or val <= level:
            if not math.isfinite(val) and val != -math.inf:
                return None
            a, b = sorted((prev, cur))
            return brentq(lambda x: fn(x) - level, a, b, xtol=1e-14, rtol=1e-15, maxiter=200)
        prev = cur
        step *= 2.0
        if abs(cur - u0) > 1e4:
            return None
    return None


class _Line:
    """A 1-D section [lo, hi] of the support with its unconstrained chart x = x(u)."""

    def __init__(self, lo: float, hi: float):
        self.space = ParameterSpace.box(["x"], [lo], [hi])
        self.lo, self.hi = lo, hi

    def to_x(self, u):
        return self.space.from_unconstrained(np.asarray(u, dtype=float)[..., None])[..., 0]

    def to_u(self, x: float) -> float:
        with np.errstate(all="ignore"):
            return float(self.space.to_unconstrained(np.array([x]))[0])

    def log_jac(self, u):
        return self.space.log_jacobian(np.asarray(u, dtype=float)[..., None])


def _peak(fn, u0: float):
    def neg(u):
        v = fn(u)
        return -v if math.isfinite(v) else 1e300

    res = minimize_scalar(neg, bracket=(u0 - 0.5, u0 + 0.5))
    return float(res.x), -float(res.fun)


def _line_mass(logp, logs, line: _Line, x_hint: float, log_s_star: float, shift: float, same_peak: bool):
    """Mass of exp(logp - shift) along the line: (part in {s <= s*}, total, error estimate).

    ``logp``/``logs`` are vectorized over x.  Assumes both are unimodal along
    the line.  Integration runs in the chart variable u, Gauss-Legendre on the
    bounded pieces and adaptive quadrature on the two unbounded end pieces.
    """

    def scalar(fn):
        def f(u):
            with np.errstate(all="ignore"):
                v = float(fn(line.to_x(np.array([u])))[0])
            return v if not math.isnan(v) else -math.inf

        return f

    fp, fs = scalar(logp), scalar(logs)
    u0 = line.to_u(min(max(x_hint, line.lo), line.hi))
    if not math.isfinite(u0):
        u0 = 0.0
    up, pmax = _peak(fp, u0)
    if not math.isfinite(pmax):
        return 0.0, 0.0, 0.0
    us, smax = (up, fs(up)) if same_peak else _peak(fs, up)

    h = 1e-3
    curv = -(fp(up + h) - 2 * pmax + fp(up - h)) / h**2
    scale = 1.0 / math.sqrt(curv) if math.isfinite(curv) and curv > 0 else 1.0

    if log_s_star >= smax - _SNAP * max(1.0, abs(smax)):
        above = None  # whole line lies in T(s*)
        roots = []
    elif log_s_star == -math.inf:
        above = (-math.inf, math.inf)
        roots = []
    else:
        left = _outward_root(fs, us, log_s_star, -1.0, scale)
        right = _outward_root(fs, us, log_s_star, 1.0, scale)
        above = (-math.inf if left is None else left, math.inf if right is None else right)
        roots = [r for r in (left, right) if r is not None]

    breaks = np.unique(np.concatenate([[up], up - scale * _OFFSETS, up + scale * _OFFSETS, roots]))

    def integrand(u):
        u = np.asarray(u, dtype=float)
        with np.errstate(all="ignore"):
            v = np.exp(logp(line.to_x(u)) + line.log_jac(u) - shift)
        return np.where(np.isfinite(v), v, 0.0)

    a, b = breaks[:-1], breaks[1:]
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    nodes = mid[:, None] + half[:, None] * _GL_X[None, :]
    # unbounded ends: u = edge -/+ scale * tau / (1 - tau), tau in [0, 1)
    tau = 0.5 * (_GL_X + 1.0)
    stretch = scale * tau / (1.0 - tau)
    tail_w = 0.5 * _GL_W * scale / (1.0 - tau) ** 2
    tails = np.stack([breaks[0] - stretch, breaks[-1] + stretch])
    values = integrand(np.concatenate([nodes, tails]))
    pieces = np.concatenate([(values[:-2] * _GL_W[None, :]).sum(axis=1) * half, (values[-2:] * tail_w).sum(axis=1)])
    probes = np.concatenate([mid, [breaks[0] - 1.0, breaks[-1] + 1.0]])
    if above is None:
        mask = np.ones(probes.size, dtype=bool)
    else:
        mask = (probes < above[0]) | (probes > above[1])
    total = float(pieces.sum())
    low = float(pieces[mask].sum())
    # the outermost rule on each side doubles as a crude error bound
    err = float(pieces[-2:].sum()) + 1e-15 * total
    return low, total, err


def quadrature_evalue(model: PosteriorModel, sf: SurpriseFunction, log_s_star: float) -> EvalEstimate:
    """ev = W(s*) by deterministic quadrature, for effective dimension 1 or 2.

    The posterior is normalized numerically.  The sublevel set is located by
    root finding along coordinate lines, so log s and log p must be unimodal
    along lines (true for the built-in log-concave families).
    """
    space = model.space
    t = space.dim
    if t > 2:
        raise ValidationError(f"quadrature route supports dimension <= 2, got {t}")
    if log_s_star is None or math.isnan(log_s_star):
        raise ValidationError("a valid s* is required")
    same_peak = sf.reference.kind == "uniform"

    def logp_q(q):
        with np.errstate(all="ignore"):
            v = np.asarray(model.log_potential(space.embed(q)), dtype=float)
        return np.where(np.isnan(v), -np.inf, v)

    def logs_q(q):
        with np.errstate(all="ignore"):
            v = np.asarray(log_surprise(sf, space.embed(q)), dtype=float)
        return np.where(np.isnan(v), -np.inf, v)

    with np.errstate(all="ignore"):
        u0 = space.to_unconstrained(model.initial_point())
    if not np.all(np.isfinite(u0)):
        u0 = np.zeros(t)

    def neg(u):
        v = float(logp_q(space.from_unconstrained(u)[:t]))
        return -v if math.isfinite(v) else 1e300

    res = minimize(neg, u0, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-12, "maxfev": 20000})
    q_mode = space.from_unconstrained(res.x)[:t]
    shift = float(logp_q(q_mode))
    if not math.isfinite(shift):
        raise ValidationError("posterior density is not finite near its mode")

    if t == 1:
        line = _Line(space.lower[0], space.upper[0])
        low, total, err = _line_mass(
            lambda x: logp_q(x[..., None]), lambda x: logs_q(x[..., None]), line, q_mode[0], log_s_star, shift, same_peak
        )
        ev = low / total if total > 0 else 0.0
        return EvalEstimate(min(max(ev, 0.0), 1.0), err / total if total > 0 else math.inf, 0, "quadrature")

    if space.simplex:
        lo0, hi0 = 0.0, 1.0
        inner_bounds = lambda x: (0.0, max(1.0 - x, 0.0))
    else:
        lo0, hi0 = space.lower[0], space.upper[0]
        inner_bounds = lambda x: (space.lower[1], space.upper[1])

    def slice_integrals(x):
        a, b = inner_bounds(x)
        if not b > a:
            return np.zeros(2)
        pair = lambda y: np.stack([np.broadcast_to(x, np.shape(y)), y], axis=-1)
        low, total, _ = _line_mass(
            lambda y: logp_q(pair(y)), lambda y: logs_q(pair(y)), _Line(a, b), q_mode[1], log_s_star, shift, same_peak
        )
        return np.array([low, total])

    sd = _laplace_sd(logp_q, q_mode)
    outer_pts = [q_mode[0]]
    if sd is not None:
        for k in (1.0, 3.0, 6.0, 10.0, 20.0):
            outer_pts.extend([q_mode[0] - k * sd, q_mode[0] + k * sd])
    outer_pts = sorted(p for p in outer_pts if lo0 < p < hi0)
    scale = (sd or 1.0) * (_laplace_sd(logp_q, q_mode, axis=1) or 1.0) * 2 * math.pi
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        val, err = quad_vec(
            slice_integrals, lo0, hi0, epsabs=1e-10 * scale, epsrel=1e-8, norm="max", points=outer_pts, limit=2000
        )
    low, total = float(val[0]), float(val[1])
    ev = low / total if total > 0 else 0.0
    return EvalEstimate(min(max(ev, 0.0), 1.0), float(err) / total if total > 0 else math.inf, 0, "quadrature")


def _laplace_sd(logp_q, q_mode, axis: int = 0):
    """Marginal sd along ``axis`` from the inverse negative Hessian of log p at the mode."""
    q = np.asarray(q_mode, dtype=float)
    d = q.size
    h = 1e-4 * np.maximum(np.abs(q), 1e-2)
    f = lambda p: float(logp_q(p))
    f0 = f(q)
    hess = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            ei = np.zeros(d)
            ej = np.zeros(d)
            ei[i], ej[j] = h[i], h[j]
            if i == j:
                hess[i, i] = (f(q + ei) - 2 * f0 + f(q - ei)) / h[i] ** 2
            else:
                hess[i, j] = (f(q + ei + ej) - f(q + ei - ej) - f(q - ei + ej) + f(q - ei - ej)) / (4 * h[i] * h[j])
    if not np.all(np.isfinite(hess)):
        return None
    try:
        cov = np.linalg.inv(-hess)
    except np.linalg.LinAlgError:
        return None
    var = cov[axis, axis]
    return math.sqrt(var) if var > 0 and math.isfinite(var) else None
