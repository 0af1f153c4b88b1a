"""The full test: optimization step, integration step, standardization, decision."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

from .decision import Decision, DecisionThresholds, decide, standardized_evalue
from .errors import ValidationError
from .hypothesis import Hypothesis, check_hypothesis_space
from .integrate import (
    DEFAULT_N,
    EvalEstimate,
    PosteriorSample,
    TruthFunction,
    estimate_evalue,
    indicator_ess,
    quadrature_evalue,
    sample_posterior_direct,
    sample_posterior_mcmc,
    truth_function,
)
from .optimize import DEFAULT_BUDGET, DEFAULT_STARTS, OptimumReport, sup_surprise_global, sup_surprise_hypothesis
from .surprise import SurpriseFunction

METHODS = ("direct", "mcmc", "quadrature")


@dataclass(frozen=True)
class EvidenceResult:
    hypothesis_optimum: OptimumReport
    global_optimum: OptimumReport | None
    estimate: EvalEstimate
    t: int
    h: int | None
    sev: float | None
    decision: Decision | None
    sample: PosteriorSample | None = None
    truth: TruthFunction | None = None


def compute_evidence(
    sf: SurpriseFunction,
    H: Hypothesis,
    *,
    method: str = "direct",
    n_draws: int = DEFAULT_N,
    seed: int = 0,
    tuning: Mapping[str, Any] | None = None,
    starts: int = DEFAULT_STARTS,
    budget: int = DEFAULT_BUDGET,
    route: str = "auto",
    thresholds: DecisionThresholds = DecisionThresholds(),
    with_global: bool = True,
) -> EvidenceResult:
    if method not in METHODS:
        raise ValidationError(f"method must be one of {METHODS}, got {method!r}")
    space = sf.space
    check_hypothesis_space(H, space)
    glob = None
    if with_global or H.unconstrained:
        glob = sup_surprise_global(sf, starts=starts, budget=budget, seed=seed)
    opt = sup_surprise_hypothesis(
        sf, H, route=route, starts=starts, budget=budget, seed=seed, global_optimum=glob
    )

    sample = truth = None
    if H.unconstrained:
        # T(s_hat) is the whole space
        estimate = EvalEstimate(1.0, 0.0, 0, method if method == "quadrature" else "mc")
    elif method == "quadrature":
        estimate = quadrature_evalue(sf.posterior, sf, opt.log_value)
    else:
        rng = np.random.default_rng(seed)
        if method == "direct":
            sample = sample_posterior_direct(sf.posterior, n_draws, rng)
        else:
            sample = sample_posterior_mcmc(sf.posterior, n_draws, rng, tuning)
        truth = truth_function(sample, sf)
        n_eff = indicator_ess(sample, sf, opt.log_value)
        estimate = estimate_evalue(truth, opt.log_value, n_eff)

    t = space.dim
    h = H.dim(space) if H.is_sharp else None
    sev = decision = None
    if h is not None:
        sev = standardized_evalue(t, h, estimate.ev_bar)
        decision = decide(sev, thresholds)
    return EvidenceResult(opt, glob, estimate, t, h, sev, decision, sample, truth)


def combined_se(a: EvalEstimate, b: EvalEstimate) -> float:
    return math.sqrt(a.se**2 + b.se**2)
