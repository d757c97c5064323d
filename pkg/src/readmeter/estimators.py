"""The ten named estimators: three heuristics, a logistic model, and six
neural configurations over the temporary/sessional feature blocks.

Each kind fixes its input blocks, architecture, loss, and output
granularity; prediction is pure and a reloaded checkpoint reproduces
predictions bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
import numpy as np

from . import features as ft
from . import nnet
from .features import FeatureMatrix, SessionalFeatures, Standardizer, TimestampFeatures
from .nnet import DenseNet, TrainConfig, TwoTowerNet

CHECKPOINT_VERSION = "readmeter-estimator-v1"

HIDDEN = 32       # width of the two hidden layers in single-tower nets and towers
TOWER_OUT = 16    # merge width of the two-tower models


class EstimatorKind(str, Enum):
    BASELINE1 = "baseline1"
    BASELINE2 = "baseline2"
    BASELINE3 = "baseline3"
    LOGISTIC = "logistic"
    BASELINE_NN = "baseline-nn"
    PATTERN_BASELINE_NN = "pattern-baseline-nn"
    NN = "nn"
    PATTERN_NN = "pattern-nn"
    PATTERN_SESSIONAL_NN = "pattern-sessional-nn"
    PATTERN_CATEGORY_NN = "pattern-category-nn"


PER_TIMESTAMP_KINDS = (
    EstimatorKind.BASELINE1,
    EstimatorKind.BASELINE2,
    EstimatorKind.BASELINE3,
    EstimatorKind.LOGISTIC,
    EstimatorKind.BASELINE_NN,
    EstimatorKind.PATTERN_BASELINE_NN,
    EstimatorKind.NN,
    EstimatorKind.PATTERN_NN,
)
PER_SESSION_KINDS = (
    EstimatorKind.PATTERN_SESSIONAL_NN,
    EstimatorKind.PATTERN_CATEGORY_NN,
)
HEURISTIC_KINDS = (
    EstimatorKind.BASELINE1,
    EstimatorKind.BASELINE2,
    EstimatorKind.BASELINE3,
)
TRAINED_KINDS = tuple(k for k in EstimatorKind if k not in HEURISTIC_KINDS)

# kind -> (tower-A columns, tower-B columns or None for single-tower nets)
KIND_INPUTS: dict[EstimatorKind, tuple[tuple[str, ...], tuple[str, ...] | None]] = {
    EstimatorKind.LOGISTIC: (ft.TS_MESSAGE_COLUMNS + ft.TS_USER_COLUMNS, None),
    EstimatorKind.NN: (ft.TS_MESSAGE_COLUMNS + ft.TS_USER_COLUMNS, None),
    EstimatorKind.BASELINE_NN: (ft.TS_BASELINE_COLUMNS, None),
    EstimatorKind.PATTERN_NN: (ft.TS_MESSAGE_COLUMNS + ft.TS_USER_COLUMNS, ft.TS_PATTERN_COLUMNS),
    EstimatorKind.PATTERN_BASELINE_NN: (ft.TS_BASELINE_COLUMNS, ft.TS_PATTERN_COLUMNS),
    EstimatorKind.PATTERN_SESSIONAL_NN: (ft.SESS_MESSAGE_COLUMNS, ft.SESS_PATTERN_COLUMNS),
    EstimatorKind.PATTERN_CATEGORY_NN: (ft.SESS_MESSAGE_COLUMNS, ft.SESS_PATTERN_COLUMNS),
}

_BASELINE_COLUMN = {
    EstimatorKind.BASELINE1: "baseline_share",
    EstimatorKind.BASELINE2: "baseline_center",
    EstimatorKind.BASELINE3: "baseline_mouse",
}


class EstimatorError(ValueError):
    pass


def granularity_of(kind: EstimatorKind) -> str:
    return "session" if kind in PER_SESSION_KINDS else "timestamp"


def schema_of(kind: EstimatorKind) -> str:
    return ft.SESS_SCHEMA_VERSION if kind in PER_SESSION_KINDS else ft.TS_SCHEMA_VERSION


def _loss_of(kind: EstimatorKind) -> str:
    if kind is EstimatorKind.PATTERN_SESSIONAL_NN:
        return "absolute-error"
    if kind is EstimatorKind.PATTERN_CATEGORY_NN:
        return "cross-entropy"
    return "weighted-bce"


def _build_net(kind: EstimatorKind, seed: int) -> nnet.Network | None:
    cols_a, cols_b = KIND_INPUTS.get(kind, (None, None))
    if cols_a is None:
        return None
    if kind is EstimatorKind.LOGISTIC:
        return DenseNet.init([len(cols_a), 1], ["sigmoid"], seed=seed)
    if cols_b is None:
        return DenseNet.init([len(cols_a), HIDDEN, HIDDEN, 1], ["relu", "relu", "sigmoid"], seed=seed)
    head_act, head_out = {
        EstimatorKind.PATTERN_SESSIONAL_NN: ("relu", 1),
        EstimatorKind.PATTERN_CATEGORY_NN: ("softmax", 3),
    }.get(kind, ("sigmoid", 1))
    tower_a = DenseNet.init([len(cols_a), HIDDEN, HIDDEN, TOWER_OUT], ["relu", "relu", "relu"], seed=seed)
    tower_b = DenseNet.init([len(cols_b), HIDDEN, HIDDEN, TOWER_OUT], ["relu", "relu", "relu"], seed=seed + 1)
    head = DenseNet.init([TOWER_OUT, head_out], [head_act], seed=seed + 2)
    return TwoTowerNet(tower_a, tower_b, head)


@dataclass(frozen=True)
class Estimator:
    kind: EstimatorKind
    schema: str
    net: nnet.Network | None = None
    standardizer: Standardizer | None = None
    train_config: TrainConfig | None = None

    @property
    def granularity(self) -> str:
        return granularity_of(self.kind)

    def input_columns(self) -> tuple[str, ...]:
        cols_a, cols_b = KIND_INPUTS[self.kind]
        return cols_a + (cols_b or ())

    def _model_inputs(self, X: np.ndarray):
        cols_a, cols_b = KIND_INPUTS[self.kind]
        Xs = self.standardizer.transform(X)
        if cols_b is None:
            return Xs
        return (Xs[:, : len(cols_a)], Xs[:, len(cols_a):])


def _select(matrix: FeatureMatrix, estimator_or_kind) -> np.ndarray:
    kind = estimator_or_kind.kind if isinstance(estimator_or_kind, Estimator) else estimator_or_kind
    cols_a, cols_b = KIND_INPUTS[kind]
    return matrix.X[:, matrix.column_indices(cols_a + (cols_b or ()))]


def build_estimator(
    kind: EstimatorKind,
    train_matrix: FeatureMatrix | None,
    val_matrix: FeatureMatrix | None,
    config: TrainConfig | None = None,
) -> Estimator:
    """Train (or, for baselines, just wrap) one estimator kind.

    The standardizer is fit on the training split only and travels with the
    estimator so inference never touches test statistics.
    """
    if kind in _BASELINE_COLUMN:
        return Estimator(kind=kind, schema=ft.TS_SCHEMA_VERSION)
    if train_matrix is None or val_matrix is None or config is None:
        raise EstimatorError(f"{kind.value} requires train/validation matrices and a config")
    expected = schema_of(kind)
    if train_matrix.schema != expected or val_matrix.schema != expected:
        raise EstimatorError(
            f"{kind.value} needs {expected} matrices, got {train_matrix.schema}/{val_matrix.schema}"
        )
    loss = _loss_of(kind)
    if loss == "weighted-bce" and train_matrix.label is None:
        raise EstimatorError("per-timestamp training requires gaze labels")
    if loss != "weighted-bce" and train_matrix.label_time is None:
        raise EstimatorError("per-session training requires reading-time labels")

    cols_a, cols_b = KIND_INPUTS[kind]
    columns = cols_a + (cols_b or ())
    X_train = _select(train_matrix, kind)
    X_val = _select(val_matrix, kind)
    standardizer = Standardizer.fit(X_train, columns)
    Xt = standardizer.transform(X_train)
    Xv = standardizer.transform(X_val)
    if cols_b is not None:
        Xt = (Xt[:, : len(cols_a)], Xt[:, len(cols_a):])
        Xv = (Xv[:, : len(cols_a)], Xv[:, len(cols_a):])

    if loss == "weighted-bce":
        y_train, y_val = train_matrix.label, val_matrix.label
    elif loss == "absolute-error":
        y_train, y_val = train_matrix.label_time, val_matrix.label_time
    else:
        y_train, y_val = train_matrix.label_class, val_matrix.label_class

    net = _build_net(kind, seed=config.seed)
    trained, _ = nnet.train(net, (Xt, y_train), (Xv, y_val), config, loss)
    return Estimator(
        kind=kind,
        schema=expected,
        net=trained,
        standardizer=standardizer,
        train_config=config,
    )


def predict_matrix(estimator: Estimator, matrix: FeatureMatrix) -> np.ndarray:
    """Bulk prediction over a feature matrix.

    Per-timestamp kinds return p per row; the sessional time model returns
    seconds; the category model returns an (n, 3) probability array.
    """
    if matrix.schema != estimator.schema:
        raise EstimatorError(
            f"schema mismatch: estimator={estimator.schema} matrix={matrix.schema}"
        )
    if estimator.kind in _BASELINE_COLUMN:
        col = matrix.column_indices([_BASELINE_COLUMN[estimator.kind]])[0]
        return matrix.X[:, col].copy()
    X = _select(matrix, estimator)
    out = nnet.forward(estimator.net, estimator._model_inputs(X))
    if estimator.kind is EstimatorKind.PATTERN_CATEGORY_NN:
        return out
    return out[:, 0]


def predict_timestamp(estimator: Estimator, feats: TimestampFeatures):
    """p_{m,t} for one feature row (per-timestamp kinds only)."""
    from .baselines import TimestampPrediction

    if estimator.granularity != "timestamp":
        raise EstimatorError(f"{estimator.kind.value} is not a per-timestamp estimator")
    if estimator.kind in _BASELINE_COLUMN:
        idx = {"baseline1": 0, "baseline2": 1, "baseline3": 2}[estimator.kind.value]
        return TimestampPrediction(feats.msg_id, feats.t, feats.baseline[idx])
    vec = feats.vector()[None, :]
    cols = ft.TS_COLUMNS
    keep = [cols.index(c) for c in estimator.input_columns()]
    out = nnet.forward(estimator.net, estimator._model_inputs(vec[:, keep]))
    return TimestampPrediction(feats.msg_id, feats.t, float(out[0, 0]))


def predict_session(estimator: Estimator, feats: SessionalFeatures):
    """Reading time (seconds) or a 3-class probability vector for one row."""
    if estimator.granularity != "session":
        raise EstimatorError(f"{estimator.kind.value} is not a per-session estimator")
    vec = feats.vector()[None, :]
    out = nnet.forward(estimator.net, estimator._model_inputs(vec))
    if estimator.kind is EstimatorKind.PATTERN_CATEGORY_NN:
        return out[0]
    return float(out[0, 0])


def _net_to_dict(net: nnet.Network) -> dict:
    def stack(d: DenseNet) -> dict:
        return {
            "layers": [
                {"in": s.in_dim, "out": s.out_dim, "activation": s.activation}
                for s in d.specs
            ],
            "theta": [float(v) for v in d.theta],
            "seed": d.seed,
        }

    if isinstance(net, TwoTowerNet):
        return {
            "type": "two-tower",
            "tower_a": stack(net.tower_a),
            "tower_b": stack(net.tower_b),
            "head": stack(net.head),
        }
    return {"type": "dense", **stack(net)}


def _net_from_dict(d: dict) -> nnet.Network:
    def stack(sd: dict) -> DenseNet:
        specs = [
            nnet.LayerSpec(layer["in"], layer["out"], layer["activation"])
            for layer in sd["layers"]
        ]
        return DenseNet(specs, np.array(sd["theta"], dtype=np.float64), seed=sd.get("seed", 0))

    if d["type"] == "two-tower":
        return TwoTowerNet(stack(d["tower_a"]), stack(d["tower_b"]), stack(d["head"]))
    return stack(d)


def save_estimator(estimator: Estimator, path) -> None:
    doc: dict = {
        "format": CHECKPOINT_VERSION,
        "kind": estimator.kind.value,
        "schema": estimator.schema,
        "granularity": estimator.granularity,
    }
    if estimator.net is not None:
        doc["net"] = _net_to_dict(estimator.net)
        doc["standardizer"] = estimator.standardizer.to_dict()
        cfg = estimator.train_config
        doc["train_config"] = {
            "batch_size": cfg.batch_size, "max_epochs": cfg.max_epochs, "lr": cfg.lr,
            "beta1": cfg.beta1, "beta2": cfg.beta2, "eps": cfg.eps,
            "positive_weight": cfg.positive_weight, "patience": cfg.patience, "seed": cfg.seed,
        }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_estimator(path) -> Estimator:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_VERSION:
        raise EstimatorError(f"{path}: unsupported checkpoint format {doc.get('format')!r}")
    kind = EstimatorKind(doc["kind"])
    if "net" not in doc:
        return Estimator(kind=kind, schema=doc["schema"])
    return Estimator(
        kind=kind,
        schema=doc["schema"],
        net=_net_from_dict(doc["net"]),
        standardizer=Standardizer.from_dict(doc["standardizer"]),
        train_config=TrainConfig(**doc["train_config"]),
    )
