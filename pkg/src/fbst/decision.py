"""Chi-square confidence transform, standardized e-values and decisions."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from scipy.special import gammainc, gammaincinv

from .errors import ValidationError


def _dof(k) -> int:
    if int(k) != k or k < 0:
        raise ValidationError(f"degrees of freedom must be a nonnegative integer, got {k}")
    return int(k)


def chi2_cdf(k: int, x: float) -> float:
    """Chi2(k, x) = P(k/2, x/2), the regularized lower incomplete gamma.

    k = 0 is the point mass at zero.
    """
    k = _dof(k)
    if x < 0 or math.isnan(x):
        raise ValidationError(f"x must be nonnegative, got {x}")
    if k == 0:
        return 1.0
    if math.isinf(x):
        return 1.0
    return float(gammainc(0.5 * k, 0.5 * x))


def chi2_quantile(k: int, c: float) -> float:
    k = _dof(k)
    if not 0.0 <= c <= 1.0:
        raise ValidationError(f"probability must lie in [0, 1], got {c}")
    if k == 0 or c == 0.0:
        return 0.0
    if c == 1.0:
        return math.inf
    return float(2.0 * gammaincinv(0.5 * k, c))


def _check_dims(t, h):
    if t is None or h is None:
        raise ValidationError("both dim(Theta) and dim(H) are required")
    t, h = _dof(t), _dof(h)
    if t < 1:
        raise ValidationError("dim(Theta) must be at least 1")
    if h > t:
        raise ValidationError(f"dim(H)={h} exceeds dim(Theta)={t}")
    return t, h


def qq_confidence(t: int, h: int, c: float) -> float:
    """QQ(t, h, c) = Chi2(t - h, Chi2^-1(t, c)): asymptotic P(ev_bar <= c) under H."""
    t, h = _check_dims(t, h)
    if not 0.0 <= c <= 1.0:
        raise ValidationError(f"c must lie in [0, 1], got {c}")
    if c == 0.0:
        return 0.0
    return chi2_cdf(t - h, chi2_quantile(t, c))


def qq_inverse(t: int, h: int, p: float) -> float:
    """Inverse of c -> QQ(t, h, c) for h < t: Chi2(t, Chi2^-1(t - h, p))."""
    t, h = _check_dims(t, h)
    if h == t:
        raise ValidationError("QQ(t, t, .) is not invertible")
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"p must lie in [0, 1], got {p}")
    return chi2_cdf(t, chi2_quantile(t - h, p))


def standardized_evalue(t: int, h: int | None, ev_bar: float) -> float:
    """sev = 1 - QQ(t, h, ev_bar)."""
    if h is None:
        raise ValidationError("standardized e-value needs dim(H); hypothesis has no equality constraints")
    if not 0.0 <= ev_bar <= 1.0:
        raise ValidationError(f"ev_bar must lie in [0, 1], got {ev_bar}")
    return 1.0 - qq_confidence(t, h, ev_bar)


class Verdict(str, Enum):
    REJECT = "Reject"
    NEUTRAL = "Neutral"
    ACCEPT = "Accept"


@dataclass(frozen=True)
class DecisionThresholds:
    c1: float = 0.05
    c2: float = 0.95

    def __post_init__(self):
        if not 0.0 < self.c1 < self.c2 < 1.0:
            raise ValidationError(f"thresholds must satisfy 0 < c1 < c2 < 1, got ({self.c1}, {self.c2})")


@dataclass(frozen=True)
class Decision:
    verdict: Verdict
    sev: float
    thresholds: DecisionThresholds


def decide(sev: float, thresholds: DecisionThresholds = DecisionThresholds()) -> Decision:
    """Reject on [0, c1), remain Neutral on [c1, c2), Accept on [c2, 1]."""
    if not 0.0 <= sev <= 1.0:
        raise ValidationError(f"sev must lie in [0, 1], got {sev}")
    if sev < thresholds.c1:
        verdict = Verdict.REJECT
    elif sev < thresholds.c2:
        verdict = Verdict.NEUTRAL
    else:
        verdict = Verdict.ACCEPT
    return Decision(verdict, sev, thresholds)


def disjunction_evalue(evs: Sequence[float]) -> float:
    """Support for a disjunction of hypotheses: the largest disjunct support."""
    evs = list(evs)
    if not evs:
        raise ValidationError("disjunction needs at least one e-value")
    for ev in evs:
        if not 0.0 <= ev <= 1.0:
            raise ValidationError(f"e-values must lie in [0, 1], got {ev}")
    return max(evs)
