"""Null sets given by equality and inequality constraints."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import DimensionError, ValidationError
from .models import ParameterSpace
from .surprise import Reparameterization

FEASIBILITY_TOL = 1e-8


@dataclass(frozen=True)
class Hypothesis:
    """Theta_H = {theta : g(theta) <= 0, h(theta) = 0}.

    ``n_equalities`` is the declared number m of independent equalities, so
    dim(H) = t - m.  ``embedding`` optionally parameterizes the null manifold
    by points of ``embedding_space`` (whose effective dimension must be t - m);
    a fully determined null set is given by ``point`` instead.
    """

    name: str
    equality: Callable[[np.ndarray], np.ndarray] | None = None
    n_equalities: int = 0
    inequality: Callable[[np.ndarray], np.ndarray] | None = None
    embedding: Callable[[np.ndarray], np.ndarray] | None = None
    embedding_space: ParameterSpace | None = None
    point: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.n_equalities < 0:
            raise ValidationError("number of equalities must be nonnegative")
        if (self.equality is None) != (self.n_equalities == 0):
            raise ValidationError("declare n_equalities >= 1 exactly when equality constraints are given")
        if (self.embedding is None) != (self.embedding_space is None):
            raise ValidationError("an embedding needs its domain space")

    def dim(self, space: ParameterSpace) -> int:
        h = space.dim - self.n_equalities
        if h < 0:
            raise ValidationError(f"{self.n_equalities} equalities exceed dim(Theta)={space.dim}")
        if self.embedding_space is not None and self.embedding_space.dim != h:
            raise ValidationError(
                f"embedding dimension {self.embedding_space.dim} does not match t - m = {h}"
            )
        if self.point is not None and h != 0:
            raise ValidationError("a fixed point hypothesis must have dimension 0")
        return h

    @property
    def is_sharp(self) -> bool:
        return self.n_equalities >= 1

    @property
    def unconstrained(self) -> bool:
        return self.equality is None and self.inequality is None

    def equality_values(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if self.equality is None:
            return np.zeros(theta.shape[:-1] + (0,))
        return np.atleast_1d(np.asarray(self.equality(theta), dtype=float))

    def inequality_values(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if self.inequality is None:
            return np.zeros(theta.shape[:-1] + (0,))
        return np.atleast_1d(np.asarray(self.inequality(theta), dtype=float))

    def intersect(self, other: "Hypothesis") -> "Hypothesis":
        """H and H' together.  An embedding survives only if the other side adds no equalities."""
        eqs = [h for h in (self.equality, other.equality) if h is not None]
        ineqs = [g for g in (self.inequality, other.inequality) if g is not None]
        embedding, emb_space, point = None, None, None
        if other.equality is None:
            embedding, emb_space, point = self.embedding, self.embedding_space, self.point
        elif self.equality is None:
            embedding, emb_space, point = other.embedding, other.embedding_space, other.point
        return Hypothesis(
            name=f"{self.name}&{other.name}",
            equality=_stack(eqs),
            n_equalities=self.n_equalities + other.n_equalities,
            inequality=_stack(ineqs),
            embedding=embedding,
            embedding_space=emb_space,
            point=point,
        )


def _stack(fns):
    if not fns:
        return None
    if len(fns) == 1:
        return fns[0]
    return lambda theta: np.concatenate([np.atleast_1d(np.asarray(f(theta), dtype=float)) for f in fns], axis=-1)


class ConstraintValues(NamedTuple):
    h: np.ndarray
    g: np.ndarray
    feasible: bool


def evaluate_constraints(H: Hypothesis, theta, space: ParameterSpace | None = None) -> ConstraintValues:
    theta = np.asarray(theta, dtype=float)
    if space is not None:
        space.check_point(theta)
    if theta.ndim != 1:
        raise DimensionError("evaluate_constraints takes a single point")
    h = H.equality_values(theta)
    g = H.inequality_values(theta)
    feasible = bool(
        np.all(np.isfinite(h))
        and np.all(np.isfinite(g))
        and (h.size == 0 or np.max(np.abs(h)) <= FEASIBILITY_TOL)
        and (g.size == 0 or np.max(g) <= FEASIBILITY_TOL)
    )
    return ConstraintValues(h, g, feasible)


def constraint_residual(H: Hypothesis, theta) -> float:
    h = H.equality_values(theta)
    g = H.inequality_values(theta)
    parts = [0.0]
    if h.size:
        parts.append(float(np.max(np.abs(h))))
    if g.size:
        parts.append(float(max(np.max(g), 0.0)))
    out = max(parts)
    return out if math.isfinite(out) else math.inf


# --------------------------------------------------------------------------
# Built-in hypotheses
# --------------------------------------------------------------------------


def whole_space() -> Hypothesis:
    return Hypothesis(name="whole_space")


def point_hypothesis(space: ParameterSpace, values: Mapping[str, float] | Sequence[float]) -> Hypothesis:
    """Fix some (or all) coordinates; ``values`` maps labels to values, or lists all coordinates."""
    if isinstance(values, Mapping):
        unknown = set(values) - set(space.labels)
        if unknown:
            raise ValidationError(f"unknown coordinates {sorted(unknown)}; space has {list(space.labels)}")
        fixed = {space.labels.index(k): float(v) for k, v in values.items()}
    else:
        vals = [float(v) for v in values]
        if len(vals) != space.ambient_dim:
            raise DimensionError(f"point needs {space.ambient_dim} coordinates")
        fixed = dict(enumerate(vals))
    if not fixed:
        raise ValidationError("a point hypothesis must fix at least one coordinate")
    idx = np.array(sorted(fixed))
    val = np.array([fixed[i] for i in idx])
    for i, v in zip(idx, val):
        if not space.lower[i] <= v <= space.upper[i]:
            raise ValidationError(f"{space.labels[i]}={v} lies outside its bounds")
    free = [i for i in range(space.ambient_dim) if i not in fixed]
    label = ",".join(f"{space.labels[i]}={fixed[i]:g}" for i in idx)
    equality = lambda theta: np.asarray(theta, dtype=float)[..., idx] - val

    if space.simplex:
        total = float(val.sum())
        if total > 1.0 + 1e-12 or (not free and abs(total - 1.0) > 1e-10):
            raise ValidationError("fixed simplex coordinates must sum to at most 1 (exactly 1 if all fixed)")
        m = min(len(idx), space.ambient_dim - 1)
        if len(free) <= 1:
            pt = np.zeros(space.ambient_dim)
            pt[idx] = val
            if free:
                pt[free[0]] = 1.0 - total
            return Hypothesis(label, equality, m, point=tuple(pt))
        emb_space = ParameterSpace.simplex_of([space.labels[i] for i in free])
        rest = 1.0 - total

        def embed(w):
            w = np.asarray(w, dtype=float)
            out = np.empty(w.shape[:-1] + (space.ambient_dim,))
            out[..., idx] = val
            out[..., free] = rest * w
            return out

        return Hypothesis(label, equality, m, embedding=embed, embedding_space=emb_space)

    if not free:
        return Hypothesis(label, equality, len(idx), point=tuple(val))
    emb_space = ParameterSpace(
        tuple(space.labels[i] for i in free),
        tuple(space.lower[i] for i in free),
        tuple(space.upper[i] for i in free),
    )

    def embed(u):
        u = np.asarray(u, dtype=float)
        out = np.empty(u.shape[:-1] + (space.ambient_dim,))
        out[..., idx] = val
        out[..., free] = u
        return out

    return Hypothesis(label, equality, len(idx), embedding=embed, embedding_space=emb_space)


def hardy_weinberg() -> Hypothesis:
    """Trinomial genotype frequencies (p^2, 2p(1-p), (1-p)^2)."""

    def equality(theta):
        theta = np.asarray(theta, dtype=float)
        return (theta[..., 0] - (1.0 - np.sqrt(np.clip(theta[..., 2], 0.0, None))) ** 2)[..., None]

    def embed(u):
        p = np.asarray(u, dtype=float)[..., 0]
        return np.stack([p * p, 2.0 * p * (1.0 - p), (1.0 - p) ** 2], axis=-1)

    return Hypothesis(
        "hardy_weinberg",
        equality=equality,
        n_equalities=1,
        embedding=embed,
        embedding_space=ParameterSpace.box(["p"], [0.0], [1.0]),
    )


def equal_means(k: int) -> Hypothesis:
    """All K group means equal."""
    if k < 2:
        raise ValidationError("equal_means needs at least two groups")

    def equality(theta):
        theta = np.asarray(theta, dtype=float)
        return theta[..., :-1] - theta[..., 1:]

    def embed(u):
        u = np.asarray(u, dtype=float)
        return np.repeat(u[..., :1], k, axis=-1)

    return Hypothesis(
        "equal_means",
        equality=equality,
        n_equalities=k - 1,
        embedding=embed,
        embedding_space=ParameterSpace.box(["mu"], [-math.inf], [math.inf]),
    )


def check_hypothesis_space(H: Hypothesis, space: ParameterSpace) -> None:
    """Validate a hypothesis against a space: dimension bookkeeping and a sample embedding point."""
    H.dim(space)
    if H.point is not None:
        space.check_point(np.asarray(H.point))
    if H.embedding is not None:
        u = H.embedding_space.from_unconstrained(np.zeros(H.embedding_space.dim))
        theta = np.asarray(H.embedding(u), dtype=float)
        space.check_point(theta)
        if not evaluate_constraints(H, theta).feasible:
            raise ValidationError(f"embedding of {H.name!r} violates its own constraints")


def pushforward_hypothesis(H: Hypothesis, rep: Reparameterization) -> Hypothesis:
    """The same null set expressed in omega = phi(theta) coordinates."""
    inv, fwd = rep.inverse, rep.forward
    equality = None if H.equality is None else (lambda w: H.equality(inv(w)))
    inequality = None if H.inequality is None else (lambda w: H.inequality(inv(w)))
    embedding = None if H.embedding is None else (lambda u: fwd(H.embedding(u)))
    point = None if H.point is None else tuple(float(v) for v in fwd(np.asarray(H.point)))
    return replace(H, equality=equality, inequality=inequality, embedding=embedding, point=point)
