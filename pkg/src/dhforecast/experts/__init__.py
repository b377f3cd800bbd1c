"""Regression experts behind a common fit/predict interface.

Four families are available: ordinary least squares, extra-trees, a small
ReLU network and an RBF epsilon-SVR.  The network and the SVR see features
and targets standardized with statistics from their training rows; the linear
model and the trees work on raw values.  Every prediction is clamped at 0 kW.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from ..errors import InvalidSpec, KindMismatch, NonFinite, ValidationError
from ..features import FeatureMatrix, FeatureSetKind
from .linear import LinearState, fit_linear
from .mlp import NetState, fit_mlp
from .standardize import Standardizer
from .svr import SVRState, fit_svr, warm_start_duals
from .trees import ForestState, fit_extra_trees


class Family(str, enum.Enum):
    LINEAR = "lr"
    EXTRA_TREES = "etr"
    NEURAL_NET = "ann"
    SUPPORT_VECTOR = "svm"

    @property
    def label(self) -> str:
        return self.value.upper()


KIND_LABELS = {
    FeatureSetKind.FULL: "Full",
    FeatureSetKind.MINUS_DT: "dT",
    FeatureSetKind.MINUS_LAGS: "lags",
}


@dataclass(frozen=True)
class LinearParams:
    def validate(self) -> None:
        pass


@dataclass(frozen=True)
class TreeParams:
    n_trees: int = 100
    min_leaf: int = 7
    min_split: int | None = None  # None: number of features + 1
    k_features: int | None = None  # None: all features

    def validate(self) -> None:
        if self.n_trees < 1:
            raise InvalidSpec("n_trees must be >= 1")
        if self.min_leaf < 1:
            raise InvalidSpec("min_leaf must be >= 1")
        if self.min_split is not None and self.min_split < 2:
            raise InvalidSpec("min_split must be >= 2")
        if self.k_features is not None and self.k_features < 1:
            raise InvalidSpec("k_features must be >= 1")


@dataclass(frozen=True)
class NetParams:
    hidden: tuple[int, int] = (12, 12)
    epochs: int = 200
    batch: int = 10
    learning_rate: float = 0.01

    def validate(self) -> None:
        if len(self.hidden) != 2 or min(self.hidden) < 1:
            raise InvalidSpec("hidden must name two positive layer widths")
        if self.epochs < 1:
            raise InvalidSpec("epochs must be >= 1")
        if self.batch < 1:
            raise InvalidSpec("batch must be >= 1")
        if not self.learning_rate > 0:
            raise InvalidSpec("learning_rate must be > 0")


@dataclass(frozen=True)
class SVRParams:
    C: float = 1000.0
    gamma: float = 1e-5
    epsilon: float = 0.01
    max_iter: int = 100_000
    tol: float = 1e-3

    def validate(self) -> None:
        if not self.C > 0:
            raise InvalidSpec("C must be > 0")
        if not self.gamma > 0:
            raise InvalidSpec("gamma must be > 0")
        if not self.epsilon >= 0:
            raise InvalidSpec("epsilon must be >= 0")
        if self.max_iter < 1:
            raise InvalidSpec("max_iter must be >= 1")


Params = Union[LinearParams, TreeParams, NetParams, SVRParams]

PARAM_TYPES = {
    Family.LINEAR: LinearParams,
    Family.EXTRA_TREES: TreeParams,
    Family.NEURAL_NET: NetParams,
    Family.SUPPORT_VECTOR: SVRParams,
}

# (family, feature kind) pairs of the eight-expert roster, in roster order
ROSTER = (
    (Family.LINEAR, FeatureSetKind.FULL),
    (Family.NEURAL_NET, FeatureSetKind.FULL),
    (Family.NEURAL_NET, FeatureSetKind.MINUS_DT),
    (Family.SUPPORT_VECTOR, FeatureSetKind.FULL),
    (Family.SUPPORT_VECTOR, FeatureSetKind.MINUS_DT),
    (Family.EXTRA_TREES, FeatureSetKind.FULL),
    (Family.EXTRA_TREES, FeatureSetKind.MINUS_DT),
    (Family.EXTRA_TREES, FeatureSetKind.MINUS_LAGS),
)


def make_params(family: Family, **values) -> Params:
    cls = PARAM_TYPES[family]
    unknown = set(values) - set(cls.__dataclass_fields__)
    if unknown:
        raise InvalidSpec(f"unknown {family.value} parameters: {sorted(unknown)}")
    if "hidden" in values:
        values["hidden"] = tuple(values["hidden"])
    return cls(**values)


@dataclass(frozen=True)
class ExpertSpec:
    family: Family
    feature_kind: FeatureSetKind
    params: Params = field(default=None)  # type: ignore[assignment]
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "feature_kind", FeatureSetKind(self.feature_kind))
        if self.params is None:
            object.__setattr__(self, "params", PARAM_TYPES[self.family]())

    @property
    def name(self) -> str:
        return f"{self.family.label}-{KIND_LABELS[self.feature_kind]}"

    def validate(self) -> None:
        if not isinstance(self.params, PARAM_TYPES[self.family]):
            raise InvalidSpec(
                f"{self.name}: expected {PARAM_TYPES[self.family].__name__}, "
                f"got {type(self.params).__name__}"
            )
        self.params.validate()


State = Union[LinearState, ForestState, NetState, SVRState]


@dataclass(frozen=True, eq=False)
class ExpertModel:
    spec: ExpertSpec
    state: State
    x_scaler: Standardizer | None = None
    y_scaler: Standardizer | None = None
    n_train: int = 0

    @property
    def name(self) -> str:
        return self.spec.name


def fit(spec: ExpertSpec, train: FeatureMatrix, warm_start: ExpertModel | None = None) -> ExpertModel:
    """Train one expert.

    ``warm_start`` is only used by the SVR, whose convex dual has a unique
    optimum: the previous solution seeds the solver and the result is the
    same model a cold start would reach (within solver tolerance).
    """
    spec.validate()
    if train.targets is None:
        raise ValidationError("training matrix has no targets")
    if train.kind != spec.feature_kind:
        raise KindMismatch(f"{spec.name} expects {spec.feature_kind.value}, got {train.kind.value}")
    if len(train) == 0:
        raise ValidationError("training matrix is empty")
    X, y = train.X, train.targets
    p = spec.params
    if spec.family is Family.LINEAR:
        return ExpertModel(spec, fit_linear(X, y), n_train=len(train))
    if spec.family is Family.EXTRA_TREES:
        state = fit_extra_trees(
            X, y, p.n_trees, p.min_leaf, p.min_split, p.k_features, seed=spec.seed
        )
        return ExpertModel(spec, state, n_train=len(train))

    xs = Standardizer.fit(X)
    ys = Standardizer.fit(y)
    Z = xs.transform(X)
    t = ys.transform(y)
    if spec.family is Family.NEURAL_NET:
        state = fit_mlp(Z, t, p.hidden, p.epochs, p.batch, p.learning_rate, seed=spec.seed)
    else:
        init = None
        if warm_start is not None and warm_start.spec.params == p:
            init = warm_start_duals(warm_start.state, train.hours, p.C)
        state = fit_svr(
            Z, t, p.C, p.gamma, p.epsilon, p.tol, p.max_iter, hours=train.hours, init=init
        )
    return ExpertModel(spec, state, xs, ys, n_train=len(train))


def raw_predict(model: ExpertModel, X: np.ndarray) -> np.ndarray:
    """Unclamped model output in kW."""
    if model.x_scaler is None:
        return model.state.predict(X)
    out = model.state.predict(model.x_scaler.transform(X))
    return model.y_scaler.inverse(out).reshape(-1)


def predict(model: ExpertModel, inputs: FeatureMatrix) -> np.ndarray:
    if inputs.kind != model.spec.feature_kind:
        raise KindMismatch(
            f"{model.name} expects {model.spec.feature_kind.value}, got {inputs.kind.value}"
        )
    out = raw_predict(model, inputs.X)
    if not np.all(np.isfinite(out)):
        raise NonFinite(f"{model.name} produced non-finite predictions")
    return np.maximum(out, 0.0)


def build_roster(seed: int = 0, overrides: dict | None = None) -> list[ExpertSpec]:
    """The eight default experts with per-expert seeds fanned out from ``seed``.

    ``overrides`` maps a family (or its short name) to parameter values that
    replace the defaults for every expert of that family.
    """
    overrides = {Family(k): v for k, v in (overrides or {}).items()}
    children = np.random.SeedSequence(seed).spawn(len(ROSTER))
    specs = []
    for (family, kind), child in zip(ROSTER, children):
        params = make_params(family, **overrides.get(family, {}))
        specs.append(ExpertSpec(family, kind, params, int(child.generate_state(1)[0])))
    return specs


def with_params(spec: ExpertSpec, **values) -> ExpertSpec:
    return replace(spec, params=replace(spec.params, **values))
