"""End-to-end operations behind the CLI subcommands."""
from __future__ import annotations

import time
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from ._version import __version__
from .calibration import CalibrationRow, ConsistencyRow, Study, calibrate_critical_level, consistency_study
from .config import TestSpec
from .decision import qq_confidence
from .errors import ValidationError
from .hypothesis import pushforward_hypothesis
from .pipeline import EvidenceResult, combined_se, compute_evidence
from .report import EvalReport, to_csv, write_atomic
from .surprise import SurpriseFunction, named_map, pushforward

QUADRATURE_INVARIANCE_TOL = 1e-5
CALIBRATION_REPLICATES = 1000
CONSISTENCY_REPLICATES = 200


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _seed(spec: TestSpec, seed: int | None) -> int:
    return spec.seed if seed is None else int(seed)


def _evidence(spec: TestSpec, sf: SurpriseFunction, H, seed: int) -> EvidenceResult:
    return compute_evidence(
        sf,
        H,
        method=spec.method,
        n_draws=spec.n_draws,
        seed=seed,
        tuning=spec.tuning,
        starts=spec.starts,
        budget=spec.budget,
        route=spec.route,
        thresholds=spec.thresholds,
    )


def _report(spec: TestSpec, H, res: EvidenceResult, seed: int, started: float, meta=None) -> EvalReport:
    opt, glob, est = res.hypothesis_optimum, res.global_optimum, res.estimate
    diagnostics = {"route": est.method, "n_eff": est.n}
    if res.sample is not None:
        diagnostics.update(res.sample.diagnostics)
        diagnostics["sampler_ess"] = res.sample.ess
    return EvalReport(
        version=__version__,
        family=spec.family,
        reference=spec.reference,
        hypothesis=H.name,
        method=spec.method,
        seed=seed,
        N=spec.n_draws if spec.method != "quadrature" else 0,
        theta_star=list(opt.theta),
        log_s_star=opt.log_value,
        theta_hat=list(glob.theta),
        log_s_hat=glob.log_value,
        ev=est.ev,
        ev_bar=est.ev_bar,
        se=est.se,
        t=res.t,
        h=res.h,
        sev=res.sev,
        decision=None if res.decision is None else res.decision.verdict.value,
        thresholds={"c1": spec.thresholds.c1, "c2": spec.thresholds.c2},
        optimizer={
            "route": opt.route,
            "converged": opt.converged,
            "restarts": opt.restarts,
            "residual": opt.residual,
            "evaluations": opt.evaluations,
        },
        diagnostics=diagnostics,
        meta={"wall_clock_s": round(time.perf_counter() - started, 6), "timestamp": _now(), **(meta or {})},
    )


def run_test(spec: TestSpec, *, seed: int | None = None, curve_path: str | None = None) -> EvalReport:
    """Optimization step, integration step, standardization and decision for one spec."""
    started = time.perf_counter()
    seed = _seed(spec, seed)
    sf = spec.surprise()
    H = spec.build_hypothesis(sf.space)
    res = _evidence(spec, sf, H, seed)
    curve_path = curve_path or spec.curve_path
    meta = {"curve": None}
    if curve_path and res.truth is not None:
        curve = res.truth.curve()
        write_atomic(curve_path, to_csv(["log_v", "W"], curve.tolist()))
        meta["curve"] = str(curve_path)
    return _report(spec, H, res, seed, started, meta)


def _study(spec: TestSpec, block) -> Study:
    post = spec.posterior()
    # 1-D quadrature costs milliseconds per replicate, 2-D about a second; MC beyond that
    default_method = "quadrature" if post.space.dim == 1 else "direct"
    H = spec.build_hypothesis(post.space)
    theta0 = tuple(float(v) for v in block["theta0"])
    if len(theta0) != post.space.ambient_dim:
        raise ValidationError(f"theta0 needs {post.space.ambient_dim} coordinates, got {len(theta0)}")
    if not post.space.contains(np.asarray(theta0)):
        raise ValidationError(f"theta0={list(theta0)} lies outside the parameter space")
    return Study(
        prior=spec.prior,
        hypothesis=H,
        theta0=theta0,
        reference=spec.reference,
        method=block.get("method", default_method),
        n_draws=min(spec.n_draws, 20_000),
        starts=min(spec.starts, 4),
    )


def run_calibration(spec: TestSpec, *, seed: int | None = None, workers: int = 1) -> list[CalibrationRow]:
    """One c(n) row per grid point; replicate seeds derive from (seed, n, replicate)."""
    block = spec.calibration
    if block is None:
        raise ValidationError("spec has no 'calibration' block")
    study = _study(spec, block)
    seed = _seed(spec, seed)
    replicates = block.get("replicates", CALIBRATION_REPLICATES)
    alpha = block.get("alpha", 0.05)
    return [calibrate_critical_level(study, n, replicates, alpha, seed, workers) for n in block["n_grid"]]


def run_consistency_study(spec: TestSpec, *, seed: int | None = None, workers: int = 1) -> list[ConsistencyRow]:
    block = spec.consistency
    if block is None:
        raise ValidationError("spec has no 'consistency' block")
    study = _study(spec, block)
    replicates = block.get("replicates", CONSISTENCY_REPLICATES)
    return consistency_study(study, block["n_grid"], replicates, _seed(spec, seed), workers)


@dataclass(frozen=True)
class InvarianceResult:
    map: str
    method: str
    original: EvalReport
    mapped: EvalReport
    delta: float
    tolerance: float
    passed: bool

    def result(self) -> dict:
        return {
            "map": self.map,
            "method": self.method,
            "delta": self.delta,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "original": self.original.result(),
            "mapped": self.mapped.result(),
        }


def run_invariance_check(spec: TestSpec, map_name: str | None = None, *, seed: int | None = None) -> InvarianceResult:
    """Same test in the original and the reparameterized coordinates, same method and seed."""
    if map_name is None:
        if spec.invariance is None:
            raise ValidationError("no reparameterization given (use --map or an 'invariance' block)")
        map_name = spec.invariance["map"]
    started = time.perf_counter()
    seed = _seed(spec, seed)
    sf = spec.surprise()
    H = spec.build_hypothesis(sf.space)
    rep = named_map(map_name, sf.space)
    sf_mapped = pushforward(sf, rep)
    H_mapped = pushforward_hypothesis(H, rep)

    res = _evidence(spec, sf, H, seed)
    original = _report(spec, H, res, seed, started)
    started = time.perf_counter()
    res_mapped = _evidence(spec, sf_mapped, H_mapped, seed)
    mapped = _report(spec, H_mapped, res_mapped, seed, started, {"map": map_name})

    delta = mapped.ev - original.ev
    if spec.method == "quadrature":
        tol = QUADRATURE_INVARIANCE_TOL
        passed = abs(delta) < tol
    else:
        tol = 3.0 * combined_se(res.estimate, res_mapped.estimate)
        passed = abs(delta) <= tol
    return InvarianceResult(map_name, spec.method, original, mapped, delta, tol, passed)


def qq_table(ts, hs, points: int = 11) -> list[tuple[int, int, float, float]]:
    """Rows (t, h, c, QQ(t, h, c)) on an evenly spaced c grid, for every h <= t."""
    if points < 2:
        raise ValidationError("need at least two grid points")
    grid = np.linspace(0.0, 1.0, points)
    rows = []
    for t in ts:
        for h in hs:
            if h > t:
                continue
            rows.extend((int(t), int(h), float(c), qq_confidence(t, h, float(c))) for c in grid)
    if not rows:
        raise ValidationError("no (t, h) pair with h <= t")
    return rows

