"""Surprise maximization over Theta and over the null set.

Everything runs on log s in unconstrained coordinates.  Local searches are
derivative-free (Nelder-Mead) and are finished by a finite-difference Newton
polish; constrained problems go through either the null-set embedding or an
augmented-Lagrangian penalty on the ambient space followed by a projection
onto the equality manifold.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize
from scipy.stats import norm, qmc

from .errors import InfeasibleHypothesisError, OptimizationError, ValidationError
from .hypothesis import FEASIBILITY_TOL, Hypothesis, constraint_residual, evaluate_constraints
from .surprise import SurpriseFunction, log_surprise

DEFAULT_STARTS = 16
DEFAULT_BUDGET = 10_000
ROUTES = ("auto", "embedding", "penalty")


@dataclass(frozen=True)
class OptimumReport:
    theta: np.ndarray
    log_value: float
    converged: bool
    restarts: int
    residual: float
    evaluations: int
    route: str

    @property
    def value(self) -> float:
        return math.exp(self.log_value) if self.log_value < 700 else math.inf


def start_points(center, scale, count: int, seed) -> np.ndarray:
    """Deterministic starts: the center, then scrambled Halton points pushed through a normal quantile."""
    center = np.asarray(center, dtype=float)
    d = center.size
    if count <= 1:
        return center[None, :]
    q = qmc.Halton(d, scramble=True, seed=np.random.default_rng(seed)).random(count - 1)
    z = norm.ppf(np.clip(q, 1e-6, 1 - 1e-6))
    return np.vstack([center, center + 2.0 * np.asarray(scale) * z])


def _newton_polish(f: Callable, u: np.ndarray, fu: float, iters: int = 8):
    """Minimize f near u by Newton steps on central-difference derivatives; keep only improvements."""
    d = u.size
    evals = 0
    for _ in range(iters):
        h = 1e-4 * np.maximum(1.0, np.abs(u))
        grad = np.empty(d)
        hess = np.empty((d, d))
        fp = np.empty(d)
        fm = np.empty(d)
        for i in range(d):
            e = np.zeros(d)
            e[i] = h[i]
            fp[i], fm[i] = f(u + e), f(u - e)
            grad[i] = (fp[i] - fm[i]) / (2 * h[i])
            hess[i, i] = (fp[i] - 2 * fu + fm[i]) / h[i] ** 2
        for i in range(d):
            for j in range(i + 1, d):
                ei = np.zeros(d)
                ej = np.zeros(d)
                ei[i], ej[j] = h[i], h[j]
                val = (f(u + ei + ej) - f(u + ei - ej) - f(u - ei + ej) + f(u - ei - ej)) / (4 * h[i] * h[j])
                hess[i, j] = hess[j, i] = val
                evals += 4
        evals += 2 * d
        if not (np.all(np.isfinite(grad)) and np.all(np.isfinite(hess))):
            break
        try:
            if np.min(np.linalg.eigvalsh(hess)) <= 0:
                break
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            break
        cand = u - step
        fc = f(cand)
        evals += 1
        if not (fc <= fu):
            break
        done = np.max(np.abs(step)) < 1e-13 * max(1.0, float(np.max(np.abs(u))))
        u, fu = cand, fc
        if done:
            break
    return u, fu, evals


def _multistart(f: Callable, starts: np.ndarray, budget: int):
    """Nelder-Mead from each start (skipping non-finite ones); return best (u, f, converged, evals, used)."""
    best = None
    evals = 0
    used = 0
    for u0 in starts:
        f0 = f(u0)
        evals += 1
        if not np.isfinite(f0):
            continue
        used += 1
        d = u0.size
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = minimize(
                f,
                u0,
                method="Nelder-Mead",
                options={"maxfev": budget, "xatol": 1e-10, "fatol": 1e-13, "adaptive": d > 2},
            )
        evals += res.nfev
        u, fu = np.asarray(res.x, dtype=float), float(res.fun)
        if not np.isfinite(fu):
            continue
        u, fu, ne = _newton_polish(f, u, fu)
        evals += ne
        if best is None or fu < best[1]:
            best = (u, fu, bool(res.success))
    if best is None:
        return None, math.inf, False, evals, used
    return best[0], best[1], best[2], evals, used


def _neg_log_surprise(sf: SurpriseFunction, to_theta: Callable):
    def f(u):
        with np.errstate(all="ignore"):
            val = log_surprise(sf, to_theta(np.asarray(u, dtype=float)))
        return -val if np.isfinite(val) else math.inf

    return f


def _scale_hint(sf: SurpriseFunction, seed) -> np.ndarray:
    space = sf.space
    model = sf.posterior
    if model.has_direct_sampler:
        draws = model.sample(512, np.random.default_rng(seed))
        with np.errstate(all="ignore"):
            u = space.to_unconstrained(draws)
        u = u[np.all(np.isfinite(u), axis=1)]
        if len(u) > 8:
            sd = u.std(axis=0)
            return np.where(sd > 0, sd, 1.0)
    return np.ones(space.dim)


def sup_surprise_global(
    sf: SurpriseFunction,
    space=None,
    *,
    starts: int = DEFAULT_STARTS,
    budget: int = DEFAULT_BUDGET,
    seed: int = 0,
) -> OptimumReport:
    """s_hat = sup over Theta of s, by multi-start local search."""
    space = space or sf.space
    with np.errstate(all="ignore"):
        center = space.to_unconstrained(sf.posterior.initial_point())
    if not np.all(np.isfinite(center)):
        center = np.zeros(space.dim)
    pts = start_points(center, _scale_hint(sf, seed), starts, seed)
    f = _neg_log_surprise(sf, space.from_unconstrained)
    u, fu, ok, evals, used = _multistart(f, pts, budget)
    if u is None:
        raise OptimizationError("surprise is not finite at any start point")
    return OptimumReport(space.from_unconstrained(u), -fu, ok, used, 0.0, evals, "global")


# --------------------------------------------------------------------------
# Constrained problems
# --------------------------------------------------------------------------


def _project(c: Callable, u: np.ndarray, iters: int = 30) -> np.ndarray:
    """Gauss-Newton minimum-norm steps driving c(u) to zero."""
    for _ in range(iters):
        cu = c(u)
        if cu.size == 0 or not np.all(np.isfinite(cu)) or np.max(np.abs(cu)) <= 1e-14:
            break
        h = 1e-7 * np.maximum(1.0, np.abs(u))
        jac = np.empty((cu.size, u.size))
        for i in range(u.size):
            e = np.zeros(u.size)
            e[i] = h[i]
            jac[:, i] = (c(u + e) - c(u - e)) / (2 * h[i])
        step = np.linalg.lstsq(jac, cu, rcond=None)[0]
        cand = u - step
        cc = c(cand)
        if not np.all(np.isfinite(cc)) or np.max(np.abs(cc)) >= np.max(np.abs(cu)):
            break
        u = cand
    return u


def _augmented_lagrangian(f, eq, ineq, u0, budget):
    """Minimize f subject to eq(u) = 0, ineq(u) <= 0 by the method of multipliers."""
    lam = np.zeros(eq(u0).size)
    nu = np.zeros(ineq(u0).size)
    mu = 10.0
    u = np.asarray(u0, dtype=float)
    evals = 0
    prev_viol = math.inf
    for _ in range(40):
        def merit(v):
            fv = f(v)
            if not np.isfinite(fv):
                return math.inf
            hv, gv = eq(v), ineq(v)
            if not (np.all(np.isfinite(hv)) and np.all(np.isfinite(gv))):
                return math.inf
            shifted = np.maximum(0.0, nu + mu * gv)
            return fv + lam @ hv + 0.5 * mu * hv @ hv + (shifted @ shifted - nu @ nu) / (2 * mu)

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = minimize(merit, u, method="BFGS", jac="3-point", options={"gtol": 1e-9, "maxiter": 500})
        evals += res.nfev
        if not np.isfinite(res.fun):
            break
        u = np.asarray(res.x, dtype=float)
        hv, gv = eq(u), ineq(u)
        viol = max([0.0] + list(np.abs(hv)) + list(np.maximum(gv, 0.0)))
        lam = lam + mu * hv
        nu = np.maximum(0.0, nu + mu * gv)
        if viol < 1e-11:
            break
        if viol > 0.25 * prev_viol:
            mu = min(mu * 10.0, 1e10)
        prev_viol = viol
        if evals > budget:
            break
    return u, evals


def _constrained_search(f, to_theta, H: Hypothesis, eq_in_u: bool, starts, budget):
    """Best feasible optimum over starts for constraints expressed through to_theta."""

    def eq(u):
        return H.equality_values(to_theta(u)) if eq_in_u else np.zeros(0)

    def ineq(u):
        return H.inequality_values(to_theta(u))

    def active_at(u):
        # freeze the active set so the projection Jacobian has a fixed shape
        mask = ineq(u) > -FEASIBILITY_TOL
        return lambda v: np.concatenate([eq(v), ineq(v)[mask]])

    best = None
    evals = 0
    used = 0
    for u0 in starts:
        if not np.isfinite(f(u0)):
            continue
        used += 1
        u, ne = _augmented_lagrangian(f, eq, ineq, u0, budget)
        evals += ne
        u = _project(active_at(u), u)
        theta = to_theta(u)
        resid = constraint_residual(H, theta)
        fu = f(u)
        if resid <= FEASIBILITY_TOL and np.isfinite(fu) and (best is None or fu < best[1]):
            best = (u, fu, resid)
    return best, evals, used


def sup_surprise_hypothesis(
    sf: SurpriseFunction,
    H: Hypothesis,
    *,
    route: str = "auto",
    starts: int = DEFAULT_STARTS,
    budget: int = DEFAULT_BUDGET,
    seed: int = 0,
    global_optimum: OptimumReport | None = None,
) -> OptimumReport:
    """s* = sup over the null set of s.

    ``route`` picks the embedding of the null manifold (exact feasibility) or
    the ambient augmented-Lagrangian penalty; ``auto`` prefers the embedding.
    When ``global_optimum`` is given, log s* is clamped to log s_hat.
    """
    if route not in ROUTES:
        raise ValidationError(f"route must be one of {ROUTES}")
    space = sf.space
    H.dim(space)
    if H.unconstrained:
        glob = global_optimum or sup_surprise_global(sf, starts=starts, budget=budget, seed=seed)
        return OptimumReport(glob.theta, glob.log_value, glob.converged, glob.restarts, 0.0, 0, "unconstrained")

    if H.point is not None and route != "penalty":
        theta = np.asarray(H.point, dtype=float)
        cv = evaluate_constraints(H, theta)
        value = log_surprise(sf, theta)
        if not cv.feasible:
            raise InfeasibleHypothesisError(f"point {theta.tolist()} violates the constraints of {H.name!r}")
        report = OptimumReport(theta, float(value), True, 0, constraint_residual(H, theta), 1, "point")
        return _clamp(report, global_optimum)

    use_embedding = H.embedding is not None and route != "penalty"
    if route == "embedding" and H.embedding is None:
        raise ValidationError(f"hypothesis {H.name!r} has no embedding")

    if use_embedding:
        emb = H.embedding_space
        to_theta = lambda v: np.asarray(H.embedding(emb.from_unconstrained(v)), dtype=float)
        center = np.zeros(emb.dim)
        scale = np.ones(emb.dim)
        route_name = "embedding"
    else:
        with np.errstate(all="ignore"):
            center = space.to_unconstrained(sf.posterior.initial_point())
        if not np.all(np.isfinite(center)):
            center = np.zeros(space.dim)
        scale = _scale_hint(sf, seed)
        to_theta = space.from_unconstrained
        route_name = "penalty"

    f = _neg_log_surprise(sf, to_theta)
    pts = start_points(center, scale, starts, seed)

    if use_embedding and H.inequality is None:
        u, fu, ok, evals, used = _multistart(f, pts, budget)
        if u is None:
            raise InfeasibleHypothesisError(f"surprise is not finite anywhere on {H.name!r}")
        theta = to_theta(u)
        report = OptimumReport(theta, -fu, ok, used, constraint_residual(H, theta), evals, route_name)
        return _clamp(report, global_optimum)

    best, evals, used = _constrained_search(f, to_theta, H, not use_embedding, pts, budget)
    if best is None:
        raise InfeasibleHypothesisError(f"no feasible point of {H.name!r} found from {len(pts)} starts")
    u, fu, resid = best
    report = OptimumReport(to_theta(u), -fu, True, used, resid, evals, route_name)
    return _clamp(report, global_optimum)


def _clamp(report: OptimumReport, glob: OptimumReport | None) -> OptimumReport:
    if glob is None or report.log_value <= glob.log_value:
        return report
    return OptimumReport(
        report.theta, glob.log_value, report.converged, report.restarts, report.residual, report.evaluations, report.route
    )
