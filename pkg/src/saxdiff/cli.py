"""Command-line pipeline: extract, train, evaluate, curve, difficulty, chart.

Every subcommand is deterministic given its flags and --seed; primary
outputs are written atomically (write-then-rename). The bundled data
assets (key table, chart, expert weights, interval weights, bigrams) can
be overridden per-flag or via the SAXDIFF_DATA_DIR environment variable.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from pathlib import Path

from . import engine, features, instrument, models, sampling, trills

DATA_DIR_ENV = "SAXDIFF_DATA_DIR"


def asset_path(name: str) -> Path:
    override = os.environ.get(DATA_DIR_ENV)
    if override:
        p = Path(override) / name
        if p.exists():
            return p
    from importlib import resources

    return Path(resources.files("saxdiff") / "data" / name)


def atomic_write(path, data) -> None:
    path = Path(path)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_instrument(args):
    kt = instrument.load_key_table(args.key_table or asset_path("key_table.tsv"))
    chart = instrument.load_chart(
        args.chart or asset_path("fingering_chart.tsv"), kt
    )
    return kt, chart


def cmd_extract(args) -> int:
    failures = 0
    rows_out = []
    with open(args.manifest, newline="", encoding="utf-8") as fh:
        manifest = list(csv.DictReader(fh))
    for row in manifest:
        try:
            track = trills.F0Track.from_csv(row["track"])
            result = trills.extract_trill_speed(
                track, min_confidence=args.min_confidence
            )
            expected = (int(row["midi_from"]), int(row["midi_to"]))
            result = trills.flag_mismatch(result, expected)
            rows_out.append(
                [
                    row.get("player_id", ""),
                    row.get("session_id", ""),
                    row["mask_from"],
                    row["mask_to"],
                    row["midi_from"],
                    row["midi_to"],
                    repr(result.trill_speed),
                    "interval_mismatch" if result.interval_mismatch else "",
                ]
            )
        except Exception as e:
            failures += 1
            print(f"extract: {row.get('track', '?')}: {e}", file=sys.stderr)
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(list(models.OBSERVATION_FIELDS) + ["review"])
    w.writerows(rows_out)
    atomic_write(args.out, buf.getvalue())
    print(f"extract: wrote {len(rows_out)} observations, {failures} failures")
    return 1 if failures else 0


def cmd_train(args) -> int:
    kt, _ = _load_instrument(args)
    obs = models.load_observations(args.observations)
    weight_table = None
    if args.expert_weights:
        weight_table = features.load_weight_table(args.expert_weights)
    scheme = features.scheme_from_name(args.scheme, kt, weight_table)
    model = models.train(obs, scheme, kt, args.model, seed=args.seed)
    model.clamp_floor = args.clamp_floor
    atomic_write(args.out, models.model_to_json(model))
    print(
        f"train: {args.model} on {scheme.name}, {len(obs)} observations, "
        f"{len(model.slot_names)} feature slots -> {args.out}"
    )
    return 0


def cmd_evaluate(args) -> int:
    kt, _ = _load_instrument(args)
    obs = models.load_observations(args.observations)
    interval_weights = None
    iw_path = args.interval_weights or asset_path("interval_weights.csv")
    try:
        interval_weights = models.load_interval_weights(iw_path)
    except OSError:
        print(
            f"evaluate: interval weight table {iw_path} unavailable; "
            f"wMSE column omitted",
            file=sys.stderr,
        )
    lines = [["feature_set", "lm_mse", "lm_wmse", "lm_mape", "mlp_mse", "mlp_wmse", "mlp_mape"]]
    for name in features.SCHEME_NAMES:
        scheme = features.scheme_from_name(name, kt)
        cells = [name]
        for kind in ("linear", "perceptron"):
            rep = models.evaluate(
                kind,
                scheme,
                obs,
                interval_weights or {},
                kt,
                seed=args.seed,
                fold_test_size=args.fold_size,
            )
            wmse = f"{rep.mean_wmse:.4f}" if interval_weights else "n/a"
            cells += [f"{rep.mean_mse:.4f}", wmse, f"{rep.mean_mape:.4f}"]
        lines.append(cells)
        print("evaluate:", " ".join(f"{c:>12}" for c in cells))
    buf = io.StringIO()
    csv.writer(buf).writerows(lines)
    atomic_write(args.out, buf.getvalue())
    return 0


def cmd_curve(args) -> int:
    kt, chart = _load_instrument(args)
    obs = models.load_observations(args.observations)
    bigrams = sampling.BigramTable.from_csv(
        args.bigrams or asset_path("bigrams.csv"),
        midi_range=(chart.min_midi, chart.max_midi),
        alpha=args.alpha,
    )
    grid = [int(x) for x in args.grid.split(",")] if args.grid else None
    points = sampling.learning_curve(
        obs,
        kt,
        bigrams,
        n_grid=grid,
        seeds=args.curve_seeds,
        master_seed=args.seed,
        fold_test_size=args.fold_size,
    )
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["method", "n", "mean_mape", "std_mape"])
    for p in points:
        w.writerow([p.method, p.n, repr(p.mean_mape), repr(p.std_mape)])
    atomic_write(args.out, buf.getvalue())
    print(f"curve: wrote {len(points)} points to {args.out}")
    return 0


def cmd_difficulty(args) -> int:
    kt, chart = _load_instrument(args)
    model = models.load_model(args.model_file, kt)
    data = Path(args.score).read_bytes()
    part = engine.parse_part(data, chart, source=args.score)
    if args.tempo:
        part = engine.NotatedPart(part.notes, args.tempo, source=part.source)
    report = engine.annotate(part, chart, model, kt, objective=args.objective)
    annotated, doc = engine.render_annotations(report, data)
    atomic_write(f"{args.out_prefix}.musicxml", annotated)
    atomic_write(f"{args.out_prefix}.json", json.dumps(doc, indent=1))
    print(engine.summary_text(report))
    return 0


def cmd_chart(args) -> int:
    kt, chart = _load_instrument(args)
    print("# keys")
    for k in kt.keys:
        tags = "".join(
            t for t, on in (("palm", k.is_palm), ("bis", k.is_bis)) if on
        )
        print(
            f"{k.index:2d} {k.name:12s} {k.hand} paf={k.finger_paf:2s} "
            f"p2fm={k.finger_p2fm:2s} {tags}"
        )
    print(f"# fingerings ({len(chart.fingerings)}, "
          f"range {chart.min_midi}-{chart.max_midi}, "
          f"{chart.pair_count()} unordered pairs)")
    for f in chart.fingerings:
        print(f"{f.label:10s} {f.written_midi:3d} {f.mask_string()}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="saxdiff", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--key-table", help="override the bundled key table")
    common.add_argument("--chart", help="override the bundled fingering chart")
    common.add_argument("--seed", type=int, default=0, help="master random seed")
    sub = p.add_subparsers(dest="command", required=True)

    def add_parser(name, **kw):
        return sub.add_parser(name, parents=[common], **kw)

    s = add_parser("extract", help="trill speeds from f0 tracks")
    s.add_argument("manifest", help="CSV: track,player_id,session_id,"
                   "mask_from,mask_to,midi_from,midi_to")
    s.add_argument("out", help="output TrillObservation CSV")
    s.add_argument("--min-confidence", type=float, default=trills.DEFAULT_MIN_CONFIDENCE)
    s.set_defaults(func=cmd_extract)

    s = add_parser("train", help="fit a cost model")
    s.add_argument("observations")
    s.add_argument("scheme", help=f"one of {', '.join(features.SCHEME_NAMES)}")
    s.add_argument("out")
    s.add_argument("--model", choices=["linear", "perceptron"], default="perceptron")
    s.add_argument("--clamp-floor", type=float, default=models.CLAMP_FLOOR)
    s.add_argument("--expert-weights", help="override expert weight table")
    s.set_defaults(func=cmd_train)

    s = add_parser("evaluate", help="cross-validate all schemes and models")
    s.add_argument("observations")
    s.add_argument("out", help="output results CSV")
    s.add_argument("--fold-size", type=int, default=models.FOLD_TEST_SIZE)
    s.add_argument("--interval-weights", help="override interval weight table")
    s.set_defaults(func=cmd_evaluate)

    s = add_parser("curve", help="sampling-method learning curves")
    s.add_argument("observations")
    s.add_argument("out")
    s.add_argument("--fold-size", type=int, default=models.FOLD_TEST_SIZE)
    s.add_argument("--alpha", type=float, default=sampling.LAPLACE_ALPHA)
    s.add_argument("--curve-seeds", type=int, default=sampling.CURVE_SEEDS)
    s.add_argument("--grid", help="comma-separated sample sizes")
    s.add_argument("--bigrams", help="override bigram count table")
    s.set_defaults(func=cmd_curve)

    s = add_parser("difficulty", help="annotate a part with difficulty")
    s.add_argument("score", help="MusicXML (raw or compressed) with one part")
    s.add_argument("model_file")
    s.add_argument("out_prefix")
    s.add_argument("--tempo", type=float, help="override the score tempo (BPM)")
    s.add_argument("--objective", choices=["sum", "bottleneck"], default="sum")
    s.set_defaults(func=cmd_difficulty)

    s = add_parser("chart", help="dump the key map and fingering chart")
    s.set_defaults(func=cmd_chart)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (
        instrument.ChartError,
        features.SchemeError,
        trills.TrillExtractionError,
        models.ModelError,
        sampling.SamplingError,
        engine.PartError,
        OSError,
    ) as e:
        print(f"saxdiff: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
