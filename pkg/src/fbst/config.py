"""Test specifications: JSON schema validation and construction of library objects."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import jsonschema

from .decision import DecisionThresholds
from .errors import ValidationError
from .hypothesis import Hypothesis, equal_means, hardy_weinberg, point_hypothesis, whole_space
from .integrate import DEFAULT_N
from .models import DataSet, ParameterSpace, PosteriorModel, Prior, conjugate_posterior_update
from .optimize import DEFAULT_BUDGET, DEFAULT_STARTS
from .surprise import SurpriseFunction, make_reference

SCHEMA_VERSION = 1


def load_schema() -> dict:
    text = resources.files("fbst").joinpath("schema/testspec.schema.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class TestSpec:
    prior: Prior
    data: DataSet
    reference: str
    hypothesis: Mapping[str, Any]
    n_draws: int = DEFAULT_N
    seed: int = 0
    method: str = "direct"
    tuning: Mapping[str, Any] = field(default_factory=dict)
    thresholds: DecisionThresholds = DecisionThresholds()
    starts: int = DEFAULT_STARTS
    budget: int = DEFAULT_BUDGET
    route: str = "auto"
    report_path: str | None = None
    curve_path: str | None = None
    calibration: Mapping[str, Any] | None = None
    consistency: Mapping[str, Any] | None = None
    invariance: Mapping[str, Any] | None = None

    __test__ = False  # keep pytest from collecting this

    @property
    def family(self) -> str:
        return self.prior.family

    def posterior(self) -> PosteriorModel:
        return conjugate_posterior_update(self.prior, self.data)

    def surprise(self) -> SurpriseFunction:
        post = self.posterior()
        return SurpriseFunction(post, make_reference(self.reference, post))

    def build_hypothesis(self, space: ParameterSpace) -> Hypothesis:
        return build_hypothesis(self.hypothesis, space)


def build_hypothesis(block: Mapping[str, Any], space: ParameterSpace) -> Hypothesis:
    kind = block["kind"]
    if kind == "point":
        return point_hypothesis(space, block["values"])
    if kind == "hardy_weinberg":
        if not space.simplex or space.ambient_dim != 3:
            raise ValidationError("hardy_weinberg needs a trinomial (3-category multinomial) model")
        return hardy_weinberg()
    if kind == "equal_means":
        return equal_means(space.ambient_dim)
    return whole_space()


def _data(model: Mapping[str, Any]) -> DataSet:
    family = model["family"]
    if "observations" in model:
        kwargs = {"categories": model["categories"]} if "categories" in model else {}
        return DataSet.from_observations(family, model["observations"], **kwargs)
    if "data" not in model:
        raise ValidationError("model needs either 'data' (sufficient statistics) or 'observations'")
    return DataSet(family, model["data"])


def parse_spec(doc: Mapping[str, Any]) -> TestSpec:
    """Validate a decoded spec document and build a TestSpec; every failure is a ValidationError."""
    try:
        jsonschema.validate(doc, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ValidationError(f"spec invalid at {where}: {exc.message}") from None
    model = doc["model"]
    sampling = doc.get("sampling", {})
    decision = doc.get("decision", {})
    optimizer = doc.get("optimizer", {})
    output = doc.get("output", {})
    try:
        prior = Prior(model["family"], model["prior"])
        data = _data(model)
    except ValidationError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"model block incomplete or malformed: {exc}") from None
    return TestSpec(
        prior=prior,
        data=data,
        reference=doc.get("reference", "uniform"),
        hypothesis=doc["hypothesis"],
        n_draws=sampling.get("N", DEFAULT_N),
        seed=sampling.get("seed", 0),
        method=sampling.get("method", "direct"),
        tuning=sampling.get("tuning", {}),
        thresholds=DecisionThresholds(decision.get("c1", 0.05), decision.get("c2", 0.95)),
        starts=optimizer.get("starts", DEFAULT_STARTS),
        budget=optimizer.get("budget", DEFAULT_BUDGET),
        route=optimizer.get("route", "auto"),
        report_path=output.get("report"),
        curve_path=output.get("curve"),
        calibration=doc.get("calibration"),
        consistency=doc.get("consistency"),
        invariance=doc.get("invariance"),
    )


def load_spec(path: str | Path) -> TestSpec:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read spec {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"spec {path} is not valid JSON: {exc}") from None
    return parse_spec(doc)
