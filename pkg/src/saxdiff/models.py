"""Regression models mapping transition features to maximum trill speed.

Two model classes are supported: ordinary least squares (LM) and a
one-hidden-layer perceptron (MLP, 50 rectified-linear units, lbfgs).
Predictions below 0.5 trills/s are clamped to 0.5, which is below any
plausibly recorded trill speed. The evaluation harness runs shuffled
stratified k-fold cross-validation (folds of 150 test trills, strata by
speed bins 0-1.5 / 1.5-3 / 3-4.5 / 4.5+) and reports MSE, interval-
frequency-weighted MSE, and MAPE per fold and on average.
"""

from __future__ import annotations

import csv
import hashlib
import json
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from sklearn.neural_network import MLPRegressor

from .features import FeatureScheme, encode, scheme_from_name, slot_names
from .instrument import Fingering, KeyTable, Transition, parse_mask

CLAMP_FLOOR = 0.5
HIDDEN_SIZE = 50
FOLD_TEST_SIZE = 150
SPEED_BINS = (1.5, 3.0, 4.5)
PERCEPTRON_RESTARTS = 3


class ModelError(ValueError):
    pass


def derive_seed(master_seed: int, *parts) -> int:
    """Deterministic per-task seed from a master seed and a task label."""
    h = hashlib.sha256(repr((master_seed,) + parts).encode()).digest()
    return int.from_bytes(h[:4], "big")


@dataclass(frozen=True)
class TrillObservation:
    transition: Transition
    speed: float
    player_id: str = ""
    session_id: str = ""

    def __post_init__(self):
        if self.speed <= 0:
            raise ModelError(f"trill speed must be positive, got {self.speed}")


OBSERVATION_FIELDS = (
    "player_id",
    "session_id",
    "mask_from",
    "mask_to",
    "midi_from",
    "midi_to",
    "speed",
)


def load_observations(path) -> list[TrillObservation]:
    """Read a TrillObservation CSV (see OBSERVATION_FIELDS for columns)."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            src = Fingering(
                parse_mask(row["mask_from"]), int(row["midi_from"]), label=""
            )
            dst = Fingering(parse_mask(row["mask_to"]), int(row["midi_to"]), label="")
            out.append(
                TrillObservation(
                    Transition(src, dst),
                    float(row["speed"]),
                    player_id=row.get("player_id", ""),
                    session_id=row.get("session_id", ""),
                )
            )
    return out


def save_observations(observations, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(OBSERVATION_FIELDS)
        for ob in observations:
            w.writerow(
                [
                    ob.player_id,
                    ob.session_id,
                    ob.transition.src.mask_string(),
                    ob.transition.dst.mask_string(),
                    ob.transition.src.written_midi,
                    ob.transition.dst.written_midi,
                    repr(ob.speed),
                ]
            )


@dataclass
class CostModel:
    """A trained speed regressor plus everything needed to reapply it."""

    kind: str  # "linear" | "perceptron"
    scheme: FeatureScheme
    slot_names: list[str]
    # linear: coef (d,), intercept
    coef: np.ndarray | None = None
    intercept: float = 0.0
    # perceptron: input->hidden and hidden->output layers (standardization
    # already folded into w1/b1)
    w1: np.ndarray | None = None  # (d, HIDDEN_SIZE)
    b1: np.ndarray | None = None
    w2: np.ndarray | None = None  # (HIDDEN_SIZE,)
    b2: float = 0.0
    clamp_floor: float = CLAMP_FLOOR
    data_checksum: str = ""

    def raw_predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        if x.shape[1] != len(self.slot_names):
            raise ModelError(
                f"feature width {x.shape[1]} does not match model "
                f"({len(self.slot_names)} slots, scheme {self.scheme.name})"
            )
        if self.kind == "linear":
            return x @ self.coef + self.intercept
        h = np.maximum(x @ self.w1 + self.b1, 0.0)
        return h @ self.w2 + self.b2

    def predict_features(self, x: np.ndarray) -> np.ndarray:
        return np.maximum(self.raw_predict(x), self.clamp_floor)


def predict(model: CostModel, transition: Transition, key_table: KeyTable) -> float:
    """Predicted maximum trill speed, clamped at the floor."""
    x = encode(transition, key_table, model.scheme)
    return float(model.predict_features(x)[0])


def _design(observations, key_table, scheme):
    X = np.array([encode(ob.transition, key_table, scheme) for ob in observations])
    y = np.array([ob.speed for ob in observations])
    return X, y


def _checksum(X: np.ndarray, y: np.ndarray) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(X).tobytes())
    h.update(np.ascontiguousarray(y).tobytes())
    return h.hexdigest()[:16]


def train_linear(
    observations, scheme: FeatureScheme, key_table: KeyTable
) -> CostModel:
    """Ordinary least squares fit of speed on transition features."""
    names = slot_names(scheme, key_table)
    if len(observations) < len(names) + 1:
        raise ModelError(
            f"need at least {len(names) + 1} observations for scheme "
            f"{scheme.name}, got {len(observations)}"
        )
    X, y = _design(observations, key_table, scheme)
    A = np.hstack([X, np.ones((len(X), 1))])
    sol, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
    if rank < A.shape[1]:
        warnings.warn(
            f"rank-deficient design ({rank} < {A.shape[1]}); using the "
            f"minimum-norm least-squares solution"
        )
    return CostModel(
        kind="linear",
        scheme=scheme,
        slot_names=names,
        coef=sol[:-1],
        intercept=float(sol[-1]),
        data_checksum=_checksum(X, y),
    )


def train_perceptron(
    observations, scheme: FeatureScheme, key_table: KeyTable, seed: int = 0
) -> CostModel:
    """One-hidden-layer (50 ReLU units) regressor trained with lbfgs.

    Features are standardized on the training set before fitting; the
    standardization is folded into the stored first-layer weights so the
    saved model applies directly to raw features. Training restarts from a
    few seeds and keeps the lowest-training-loss fit.
    """
    names = slot_names(scheme, key_table)
    if len(observations) < len(names) + 1:
        raise ModelError(
            f"need at least {len(names) + 1} observations for scheme "
            f"{scheme.name}, got {len(observations)}"
        )
    X, y = _design(observations, key_table, scheme)
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Xs = (X - mean) / scale
    best = None
    best_loss = np.inf
    for r in range(PERCEPTRON_RESTARTS):
        mlp = MLPRegressor(
            hidden_layer_sizes=(HIDDEN_SIZE,),
            solver="lbfgs",
            max_iter=500,
            random_state=derive_seed(seed, "mlp-restart", r),
        )
        with warnings.catch_warnings():
            from sklearn.exceptions import ConvergenceWarning

            warnings.simplefilter("ignore", category=ConvergenceWarning)
            mlp.fit(Xs, y)
        loss = float(np.mean((mlp.predict(Xs) - y) ** 2))
        if loss < best_loss:
            best, best_loss = mlp, loss
    w1 = best.coefs_[0]  # (d, hidden)
    b1 = best.intercepts_[0].copy()
    w2 = best.coefs_[1].ravel()
    b2 = float(best.intercepts_[1][0])
    # fold x -> (x - mean)/scale into the first layer
    w1_raw = w1 / scale[:, None]
    b1_raw = b1 - (mean / scale) @ w1
    return CostModel(
        kind="perceptron",
        scheme=scheme,
        slot_names=names,
        w1=w1_raw,
        b1=b1_raw,
        w2=w2,
        b2=b2,
        data_checksum=_checksum(X, y),
    )


def train(observations, scheme, key_table, kind: str, seed: int = 0) -> CostModel:
    if kind in ("linear", "lm"):
        return train_linear(observations, scheme, key_table)
    if kind in ("perceptron", "mlp"):
        return train_perceptron(observations, scheme, key_table, seed=seed)
    raise ModelError(f"unknown model kind {kind!r}")


def model_to_json(model: CostModel) -> str:
    doc = {
        "kind": model.kind,
        "scheme": model.scheme.name,
        "slot_names": model.slot_names,
        "clamp_floor": model.clamp_floor,
        "data_checksum": model.data_checksum,
    }
    if model.kind == "linear":
        doc["coef"] = model.coef.tolist()
        doc["intercept"] = model.intercept
    else:
        doc["w1"] = model.w1.tolist()
        doc["b1"] = model.b1.tolist()
        doc["w2"] = model.w2.tolist()
        doc["b2"] = model.b2
    return json.dumps(doc, indent=1, sort_keys=True)


def save_model(model: CostModel, path) -> None:
    Path(path).write_text(model_to_json(model), encoding="utf-8")


def load_model(path, key_table: KeyTable) -> CostModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    scheme = scheme_from_name(doc["scheme"], key_table)
    kwargs = dict(
        kind=doc["kind"],
        scheme=scheme,
        slot_names=list(doc["slot_names"]),
        clamp_floor=float(doc.get("clamp_floor", CLAMP_FLOOR)),
        data_checksum=doc.get("data_checksum", ""),
    )
    if doc["kind"] == "linear":
        kwargs["coef"] = np.array(doc["coef"])
        kwargs["intercept"] = float(doc["intercept"])
    else:
        kwargs["w1"] = np.array(doc["w1"])
        kwargs["b1"] = np.array(doc["b1"])
        kwargs["w2"] = np.array(doc["w2"])
        kwargs["b2"] = float(doc["b2"])
    model = CostModel(**kwargs)
    if model.slot_names != slot_names(scheme, key_table):
        raise ModelError(f"{path}: slot order does not match scheme {scheme.name}")
    return model


def speed_bin(speed: float) -> int:
    """Stratification bin: 0-1.5, 1.5-3, 3-4.5, 4.5+."""
    for i, edge in enumerate(SPEED_BINS):
        if speed < edge:
            return i
    return len(SPEED_BINS)


def stratified_folds(
    observations, fold_test_size: int = FOLD_TEST_SIZE, seed: int = 0
) -> list[tuple[list[int], list[int]]]:
    """Shuffled stratified k-fold partitions as (train, test) index lists.

    k = N // fold_test_size; every observation lands in exactly one test
    fold and per-fold speed-bin proportions stay within one item of the
    global proportions.
    """
    n = len(observations)
    k = n // fold_test_size
    if k < 2:
        raise ModelError(
            f"need at least {2 * fold_test_size} observations for "
            f"{fold_test_size}-trill test folds, got {n}"
        )
    rng = np.random.default_rng(seed)
    bins: dict[int, list[int]] = {}
    for i, ob in enumerate(observations):
        bins.setdefault(speed_bin(ob.speed), []).append(i)
    test_sets: list[list[int]] = [[] for _ in range(k)]
    # deal each stratum round-robin across folds, starting at a rotating
    # offset so remainders do not pile onto fold 0
    offset = 0
    for b in sorted(bins):
        idx = np.array(bins[b])
        rng.shuffle(idx)
        for j, i in enumerate(idx):
            test_sets[(j + offset) % k].append(int(i))
        offset = (offset + len(idx)) % k
    folds = []
    for t in test_sets:
        tset = set(t)
        folds.append((sorted(i for i in range(n) if i not in tset), sorted(t)))
    return folds


def mse(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    return float(np.mean((y_pred - y_true) ** 2))


def weighted_mse(y_true, y_pred, weights) -> float:
    w = np.asarray(weights, dtype=float)
    if w.sum() <= 0:
        return float("nan")
    return float(np.sum(w * (np.asarray(y_pred) - np.asarray(y_true)) ** 2) / w.sum())


def mape(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    y_true = np.asarray(y_true, dtype=float)
    return float(np.mean(np.abs(np.asarray(y_pred) - y_true) / y_true))


def default_interval_weights_path() -> Path:
    return Path(resources.files("saxdiff") / "data" / "interval_weights.csv")


def load_interval_weights(path) -> dict[int, float]:
    """Interval (absolute semitones) -> relative frequency table."""
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out[int(row["interval_semitones"])] = float(row["relative_frequency"])
    return out


def interval_of(ob: TrillObservation) -> int:
    return abs(ob.transition.dst.written_midi - ob.transition.src.written_midi)


def observation_weights(observations, interval_weights: dict[int, float]) -> np.ndarray:
    w = []
    missing = set()
    for ob in observations:
        iv = interval_of(ob)
        if iv not in interval_weights:
            missing.add(iv)
        w.append(interval_weights.get(iv, 0.0))
    if missing:
        warnings.warn(
            f"no interval weight for semitone distances {sorted(missing)}; "
            f"using weight 0"
        )
    return np.array(w)


@dataclass
class EvalReport:
    model_kind: str
    scheme_name: str
    fold_mse: list[float] = field(default_factory=list)
    fold_wmse: list[float] = field(default_factory=list)
    fold_mape: list[float] = field(default_factory=list)

    @property
    def n_folds(self) -> int:
        return len(self.fold_mse)

    @property
    def mean_mse(self) -> float:
        return float(np.mean(self.fold_mse))

    @property
    def mean_wmse(self) -> float:
        return float(np.nanmean(self.fold_wmse))

    @property
    def mean_mape(self) -> float:
        return float(np.mean(self.fold_mape))


def evaluate(
    model_kind: str,
    scheme: FeatureScheme,
    observations,
    interval_weights: dict[int, float],
    key_table: KeyTable,
    seed: int = 0,
    fold_test_size: int = FOLD_TEST_SIZE,
) -> EvalReport:
    """Cross-validated MSE / wMSE / MAPE for one model-scheme configuration."""
    folds = stratified_folds(observations, fold_test_size, seed=derive_seed(seed, "folds"))
    report = EvalReport(model_kind=model_kind, scheme_name=scheme.name)
    for fi, (train_idx, test_idx) in enumerate(folds):
        train_obs = [observations[i] for i in train_idx]
        test_obs = [observations[i] for i in test_idx]
        model = train(
            train_obs, scheme, key_table, model_kind, seed=derive_seed(seed, "fold", fi)
        )
        X, y = _design(test_obs, key_table, scheme)
        pred = model.predict_features(X)
        report.fold_mse.append(mse(y, pred))
        report.fold_wmse.append(
            weighted_mse(y, pred, observation_weights(test_obs, interval_weights))
        )
        report.fold_mape.append(mape(y, pred))
    return report


def anchor_floor(observations) -> tuple[float, float, float, dict]:
    """MAPE noise floor from repeated recordings of anchor transitions.

    Each anchor's median speed is treated as truth; the per-anchor MAPE of
    its individual recordings is aggregated to (mean, min, max). Anchors
    with a single recording are skipped with a warning.
    """
    groups: dict[tuple, list[float]] = {}
    for ob in observations:
        key = (
            ob.transition.src.mask_string(),
            ob.transition.src.written_midi,
            ob.transition.dst.mask_string(),
            ob.transition.dst.written_midi,
        )
        groups.setdefault(key, []).append(ob.speed)
    per_anchor = {}
    for key, speeds in groups.items():
        if len(speeds) < 2:
            warnings.warn(f"anchor {key[1]}->{key[3]} has a single recording; skipped")
            continue
        med = float(np.median(speeds))
        per_anchor[key] = float(np.mean([abs(s - med) / med for s in speeds]))
    if not per_anchor:
        raise ModelError("no anchor transition has repeated recordings")
    vals = list(per_anchor.values())
    return float(np.mean(vals)), float(np.min(vals)), float(np.max(vals)), per_anchor
