"""Simulation studies: empirical critical levels and consistency under H / not H."""
from __future__ import annotations

import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.stats import kstest

from .decision import qq_confidence
from .errors import ValidationError
from .hypothesis import Hypothesis, evaluate_constraints
from .models import Prior, conjugate_posterior_update, simulate_data
from .pipeline import compute_evidence
from .surprise import SurpriseFunction, make_reference

MIN_CALIBRATION_REPLICATES = 200


@dataclass(frozen=True)
class CalibrationRow:
    n: int
    c_n: float
    replicates: int
    seed: int


@dataclass(frozen=True)
class ConsistencyRow:
    n: int
    median_ev_bar: float
    ks: float | None
    replicates: int
    hypothesis_true: bool


@dataclass(frozen=True)
class Study:
    """Everything needed to simulate one replicate's evidence against H."""

    prior: Prior
    hypothesis: Hypothesis
    theta0: tuple[float, ...]
    reference: str = "uniform"
    method: str = "quadrature"
    n_draws: int = 20_000
    starts: int = 4

    def ev_bar(self, n: int, seed: int, replicate: int) -> float:
        rng = np.random.default_rng([seed, n, replicate])
        params = {"sigma": self.prior.params["sigma"]} if self.prior.family == "normal" else {}
        data = simulate_data(self.prior.family, self.theta0, n, rng, **params)
        post = conjugate_posterior_update(self.prior, data)
        sf = SurpriseFunction(post, make_reference(self.reference, post))
        result = compute_evidence(
            sf,
            self.hypothesis,
            method=self.method,
            n_draws=self.n_draws,
            seed=int(rng.integers(2**63)),
            starts=self.starts,
            with_global=False,
        )
        return result.estimate.ev_bar


# Worker processes are forked after _TASK is set, so closures in hypotheses
# never need to be pickled; only indices cross the process boundary.
_TASK: Callable[[int], float] | None = None


def _run_index(i: int) -> float:
    return _TASK(i)


def parallel_map(fn: Callable[[int], float], count: int, workers: int = 1) -> np.ndarray:
    """fn(0..count-1) with results in index order, optionally across forked processes."""
    global _TASK
    if workers <= 1 or count < 2 or "fork" not in multiprocessing.get_all_start_methods():
        return np.array([fn(i) for i in range(count)], dtype=float)
    _TASK = fn
    try:
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            chunk = max(1, count // (4 * workers))
            return np.array(list(pool.map(_run_index, range(count), chunksize=chunk)), dtype=float)
    finally:
        _TASK = None


def simulate_ev_bars(study: Study, n: int, replicates: int, seed: int, workers: int = 1) -> np.ndarray:
    if replicates < 1:
        raise ValidationError("replicates must be at least 1")
    _check_theta0(study)
    return parallel_map(lambda r: study.ev_bar(n, seed, r), replicates, workers)


def _check_theta0(study: Study, require_feasible: bool = False) -> bool:
    feasible = evaluate_constraints(study.hypothesis, np.asarray(study.theta0, dtype=float)).feasible
    if require_feasible and not feasible:
        raise ValidationError(f"theta0={list(study.theta0)} does not satisfy {study.hypothesis.name!r}")
    return feasible


def critical_level(ev_bars: Sequence[float], alpha: float) -> float:
    """Empirical (1 - alpha)-quantile, order statistic with ceiling index."""
    if not 0.0 <= alpha < 1.0:
        raise ValidationError(f"alpha must lie in [0, 1), got {alpha}")
    values = np.sort(np.asarray(ev_bars, dtype=float))
    k = math.ceil((1.0 - alpha) * values.size - 1e-9)
    return float(values[min(max(k, 1), values.size) - 1])


def calibrate_critical_level(
    study: Study, n: int, replicates: int, alpha: float, seed: int, workers: int = 1
) -> CalibrationRow:
    """c(n): the (1 - alpha) quantile of ev_bar over data simulated at theta0 in H."""
    if replicates < MIN_CALIBRATION_REPLICATES:
        raise ValidationError(f"calibration needs at least {MIN_CALIBRATION_REPLICATES} replicates")
    _check_theta0(study, require_feasible=True)
    ev_bars = simulate_ev_bars(study, n, replicates, seed, workers)
    return CalibrationRow(int(n), critical_level(ev_bars, alpha), int(replicates), int(seed))


def ks_uniform(values: Sequence[float]) -> float:
    return float(kstest(np.asarray(values, dtype=float), "uniform").statistic)


def consistency_study(
    study: Study, n_grid: Sequence[int], replicates: int, seed: int, workers: int = 1
) -> list[ConsistencyRow]:
    """Per n: median ev_bar and the KS distance of QQ(t, h, ev_bar) from Uniform[0, 1]."""
    if not n_grid:
        raise ValidationError("n grid must be nonempty")
    if replicates < 1:
        raise ValidationError("replicates must be at least 1")
    true_h = _check_theta0(study)
    post = conjugate_posterior_update(
        study.prior, simulate_data(study.prior.family, study.theta0, 1, 0, **_sim_params(study.prior))
    )
    t = post.space.dim
    h = study.hypothesis.dim(post.space) if study.hypothesis.is_sharp else None
    rows = []
    for n in n_grid:
        ev_bars = simulate_ev_bars(study, int(n), replicates, seed, workers)
        ks = None
        if h is not None:
            ks = ks_uniform([qq_confidence(t, h, float(e)) for e in ev_bars])
        rows.append(ConsistencyRow(int(n), float(np.median(ev_bars)), ks, int(replicates), true_h))
    return rows


def _sim_params(prior: Prior) -> dict:
    return {"sigma": prior.params["sigma"]} if prior.family == "normal" else {}
