"""Cost-model training, cross-validation, and sampling experiments.

Uses a synthetic stand-in for a recorded trill dataset: speeds linear in
the hand-based expert features plus noise.

Run: python3 demos/03_train_and_evaluate.py
"""

import numpy as np

from saxdiff import (
    Transition,
    TrillObservation,
    evaluate,
    load_default_instrument,
    predict,
    scheme_from_name,
    train,
)
from saxdiff.features import encode
from saxdiff.models import (
    anchor_floor,
    default_interval_weights_path,
    load_interval_weights,
)
from saxdiff.sampling import (
    BigramTable,
    default_bigrams_path,
    learning_curve,
    plan_sessions,
)

key_table, chart = load_default_instrument()
rng = np.random.default_rng(0)
scheme = scheme_from_name("E-HB(NoEW)", key_table)

print("== synthetic observation pool (480 recorded trills) ==")
fs = chart.fingerings
w = rng.uniform(-0.06, 0.01, 9)
obs = []
for i, j in rng.integers(0, len(fs), size=(480, 2)):
    t = Transition(fs[i], fs[j])
    speed = 4.0 + float(w @ encode(t, key_table, scheme))
    obs.append(TrillObservation(t, max(speed + rng.normal(0, 0.15), 0.8)))
speeds = [ob.speed for ob in obs]
print(f"speed range {min(speeds):.2f}-{max(speeds):.2f} trills/s")

print("\n== train both model classes on one scheme ==")
lm = train(obs, scheme, key_table, "linear")
mlp = train(obs, scheme, key_table, "perceptron", seed=0)
t = Transition(fs[0], fs[30])
print(f"sample transition {fs[0].label} -> {fs[30].label}: "
      f"LM {predict(lm, t, key_table):.2f}, "
      f"MLP {predict(mlp, t, key_table):.2f} trills/s")

print("\n== stratified cross-validation (150-trill test folds) ==")
iw = load_interval_weights(default_interval_weights_path())
for kind in ("linear", "perceptron"):
    rep = evaluate(kind, scheme, obs, iw, key_table, seed=0)
    print(f"{kind:10s}: MSE {rep.mean_mse:.3f}  wMSE {rep.mean_wmse:.3f}  "
          f"MAPE {rep.mean_mape:.3f}  ({rep.n_folds} folds)")

print("\n== how much data does the perceptron need? ==")
bigrams = BigramTable.from_csv(
    default_bigrams_path(), midi_range=(chart.min_midi, chart.max_midi)
)
points = learning_curve(obs, key_table, bigrams, n_grid=[50, 150], seeds=1)
for p in points:
    print(f"{p.method:10s} n={p.n:3d}  MAPE {p.mean_mape:.3f} "
          f"+/- {p.std_mape:.3f}")

print("\n== planning recording sessions ==")
pool = [Transition(fs[i], fs[j]) for i, j in rng.integers(0, len(fs), (400, 2))]
anchors = pool[:6]
plan = plan_sessions(pool[6:], anchors, key_table)
print(f"{len(plan.sessions)} sessions of <= 65 trills, "
      f"{len(plan.anchors)} anchors repeated in every session")

print("\n== the anchor noise floor ==")
anchored = [
    TrillObservation(a, 3.0 + rng.normal(0, 0.3), session_id=f"s{k}")
    for a in anchors
    for k in range(6)
]
mean, lo, hi, _ = anchor_floor(anchored)
print(f"per-anchor MAPE vs median: mean {mean:.3f} (range {lo:.3f}-{hi:.3f}) "
      f"-- no model can be expected to beat this")
