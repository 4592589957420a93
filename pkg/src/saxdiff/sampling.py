"""Training-subset samplers, learning curves, and session planning.

Three ways of picking n transitions from a recorded pool:

* uniform: without replacement, all items equally likely;
* cluster-based: k-means (k=n) over weighted hand-based expert features,
  one uniform pick per cluster;
* empirical: draw written-pitch bigrams by their (Laplace-smoothed) corpus
  frequency, then a uniform fingering realization.

The learning-curve experiment downsamples each cross-validation training
fold with each method, trains the perceptron, and reports mean test MAPE
per (method, n).
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from sklearn.cluster import KMeans

from .features import encode, scheme_from_name
from .instrument import KeyTable, Mapping, Transition, moving_fingers
from .models import (
    FOLD_TEST_SIZE,
    _design,
    derive_seed,
    mape,
    stratified_folds,
    train_perceptron,
)

LAPLACE_ALPHA = 0.1
SESSION_SIZE = 65
CLUSTER_SCHEME = "E-HB"  # expert weights and MIDI enabled
CURVE_SCHEME = "E-HB(NoEW)"
CURVE_SEEDS = 3


class SamplingError(ValueError):
    pass


@dataclass(frozen=True)
class BigramTable:
    """Written-pitch bigram counts with Laplace smoothing over a MIDI range."""

    counts: dict[tuple[int, int], float]
    midi_range: tuple[int, int]
    alpha: float = LAPLACE_ALPHA

    def probability(self, pair: tuple[int, int]) -> float:
        lo, hi = self.midi_range
        span = hi - lo + 1
        total = sum(self.counts.values()) + self.alpha * span * span
        return (self.counts.get(pair, 0.0) + self.alpha) / total

    def all_pairs(self) -> list[tuple[int, int]]:
        lo, hi = self.midi_range
        return [(a, b) for a in range(lo, hi + 1) for b in range(lo, hi + 1)]

    @classmethod
    def from_csv(cls, path, midi_range: tuple[int, int], alpha: float = LAPLACE_ALPHA):
        counts = {}
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                counts[(int(row["midi_from"]), int(row["midi_to"]))] = float(
                    row["count"]
                )
        return cls(counts, midi_range, alpha)


def default_bigrams_path() -> Path:
    return Path(resources.files("saxdiff") / "data" / "bigrams.csv")


def sample_uniform(pool: list, n: int, seed: int) -> list:
    """n distinct items, uniform without replacement."""
    if n > len(pool):
        raise SamplingError(f"cannot sample {n} from a pool of {len(pool)}")
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(pool), size=n, replace=False)
    return [pool[i] for i in sorted(idx)]


def _pool_transitions(pool):
    return [ob.transition if hasattr(ob, "transition") else ob for ob in pool]


def sample_cluster(pool: list, n: int, seed: int, key_table: KeyTable) -> list:
    """One uniform pick from each of n k-means clusters in feature space.

    Items are embedded with the hand-based expert features (MIDI and expert
    weights enabled). Empty-cluster shortfalls are topped up uniformly from
    the unchosen remainder.
    """
    if n > len(pool):
        raise SamplingError(f"cannot sample {n} from a pool of {len(pool)}")
    if n == 0:
        return []
    scheme = scheme_from_name(CLUSTER_SCHEME, key_table)
    X = np.array([encode(t, key_table, scheme) for t in _pool_transitions(pool)])
    rng = np.random.default_rng(seed)
    km = KMeans(
        n_clusters=n,
        n_init=1,
        max_iter=100,
        random_state=derive_seed(seed, "kmeans") % (2**32),
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # duplicate points can collapse clusters
        labels = km.fit_predict(X)
    chosen: list[int] = []
    for c in range(n):
        members = np.flatnonzero(labels == c)
        if len(members):
            chosen.append(int(rng.choice(members)))
    chosen = sorted(set(chosen))
    if len(chosen) < n:
        rest = [i for i in range(len(pool)) if i not in set(chosen)]
        extra = rng.choice(len(rest), size=n - len(chosen), replace=False)
        chosen = sorted(chosen + [rest[i] for i in extra])
    return [pool[i] for i in chosen]


def sample_empirical(
    pool: list,
    n: int,
    seed: int,
    bigrams: BigramTable,
    max_draws_per_item: int = 1000,
) -> list:
    """Sample by corpus bigram probability of the written pitch pair.

    Each draw picks a pitch bigram by smoothed probability, then a uniform
    not-yet-chosen pool realization of it; draws without a realization are
    skipped. If the pool is too sparse to reach n within the retry budget,
    a partial sample is returned with a warning.
    """
    if n > len(pool):
        raise SamplingError(f"cannot sample {n} from a pool of {len(pool)}")
    rng = np.random.default_rng(seed)
    transitions = _pool_transitions(pool)
    by_pair: dict[tuple[int, int], list[int]] = {}
    for i, t in enumerate(transitions):
        by_pair.setdefault((t.src.written_midi, t.dst.written_midi), []).append(i)
    pairs = bigrams.all_pairs()
    probs = np.array([bigrams.probability(p) for p in pairs])
    probs = probs / probs.sum()
    chosen: set[int] = set()
    budget = max_draws_per_item * max(n, 1)
    while len(chosen) < n and budget > 0:
        budget -= 1
        pair = pairs[int(rng.choice(len(pairs), p=probs))]
        candidates = [i for i in by_pair.get(pair, ()) if i not in chosen]
        if candidates:
            chosen.add(int(rng.choice(candidates)))
    if len(chosen) < n:
        warnings.warn(
            f"empirical sampler reached only {len(chosen)}/{n} items before "
            f"exhausting its retry budget; returning a partial sample"
        )
    return [pool[i] for i in sorted(chosen)]


SAMPLERS = ("uniform", "cluster", "empirical")


def sample(
    method: str,
    pool: list,
    n: int,
    seed: int,
    key_table: KeyTable,
    bigrams: BigramTable | None = None,
) -> list:
    if method == "uniform":
        return sample_uniform(pool, n, seed)
    if method == "cluster":
        return sample_cluster(pool, n, seed, key_table)
    if method == "empirical":
        if bigrams is None:
            raise SamplingError("empirical sampling needs a bigram table")
        return sample_empirical(pool, n, seed, bigrams)
    raise SamplingError(f"unknown sampling method {method!r}")


@dataclass
class CurvePoint:
    method: str
    n: int
    mean_mape: float
    std_mape: float


def learning_curve(
    observations,
    key_table: KeyTable,
    bigrams: BigramTable,
    n_grid=None,
    seeds: int = CURVE_SEEDS,
    master_seed: int = 0,
    scheme_name: str = CURVE_SCHEME,
    fold_test_size: int = FOLD_TEST_SIZE,
    methods=SAMPLERS,
) -> list[CurvePoint]:
    """Mean test MAPE per (sampling method, training-set size).

    For every cross-validation fold the training side is downsampled to n
    by each method (a few independent seeds each), the perceptron is
    trained on the subsample, and test MAPE recorded.
    """
    scheme = scheme_from_name(scheme_name, key_table)
    folds = stratified_folds(
        observations, fold_test_size, seed=derive_seed(master_seed, "folds")
    )
    min_train = min(len(tr) for tr, _ in folds)
    if n_grid is None:
        n_grid = list(range(25, min_train, 25)) + [min_train]
    results: dict[tuple[str, int], list[float]] = {}
    for fi, (train_idx, test_idx) in enumerate(folds):
        train_obs = [observations[i] for i in train_idx]
        test_obs = [observations[i] for i in test_idx]
        Xt, yt = _design(test_obs, key_table, scheme)
        for n in n_grid:
            if n > len(train_obs):
                warnings.warn(
                    f"sample size {n} exceeds training fold size "
                    f"{len(train_obs)}; skipped"
                )
                continue
            for method in methods:
                for r in range(seeds):
                    s = derive_seed(master_seed, "curve", fi, method, n, r)
                    sub = sample(method, train_obs, n, s, key_table, bigrams)
                    model = train_perceptron(sub, scheme, key_table, seed=s)
                    pred = model.predict_features(Xt)
                    results.setdefault((method, n), []).append(mape(yt, pred))
    out = []
    for method in methods:
        for n in n_grid:
            vals = results.get((method, n))
            if vals:
                out.append(
                    CurvePoint(method, n, float(np.mean(vals)), float(np.std(vals)))
                )
    return out


def write_curve_csv(points: list[CurvePoint], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "n", "mean_mape", "std_mape"])
        for p in points:
            w.writerow([p.method, p.n, repr(p.mean_mape), repr(p.std_mape)])


@dataclass
class SessionPlan:
    sessions: list[list[Transition]]
    anchors: list[Transition]


def naive_prior(transition: Transition, key_table: KeyTable) -> float:
    """Rough pre-data difficulty: pitch jump size plus moving-finger count."""
    moving, _ = moving_fingers(transition, key_table, Mapping.P2FM)
    jump = abs(transition.dst.written_midi - transition.src.written_midi)
    return float(jump + len(moving))


def plan_sessions(
    transitions: list[Transition],
    anchors: list[Transition],
    key_table: KeyTable,
    session_size: int = SESSION_SIZE,
    seed: int = 0,
    chart=None,
) -> SessionPlan:
    """Split transitions into recording sessions mixing easy and hard items.

    Transitions are ordered by the naive difficulty prior and dealt
    round-robin, so each session spans the difficulty range; the anchor
    transitions are appended to every session.
    """
    if session_size <= len(anchors):
        raise SamplingError("session size must exceed the number of anchors")
    if chart is not None:
        known = {(f.mask, f.written_midi) for f in chart.fingerings}
        for a in anchors:
            for f in (a.src, a.dst):
                if (f.mask, f.written_midi) not in known:
                    raise SamplingError(
                        f"anchor fingering {f.label or f.written_midi} is not "
                        f"in the chart"
                    )
    anchor_set = {(a.src, a.dst) for a in anchors}
    pool = [t for t in transitions if (t.src, t.dst) not in anchor_set]
    rng = np.random.default_rng(seed)
    order = list(rng.permutation(len(pool)))  # random tie-break under the sort
    order.sort(key=lambda i: naive_prior(pool[i], key_table))
    per_session = session_size - len(anchors)
    n_sessions = max(1, math.ceil(len(pool) / per_session))
    sessions: list[list[Transition]] = [[] for _ in range(n_sessions)]
    for j, i in enumerate(order):
        sessions[j % n_sessions].append(pool[i])
    for s in sessions:
        s.extend(anchors)
    return SessionPlan(sessions=sessions, anchors=list(anchors))
