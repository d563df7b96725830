"""Command-line surface: evaluate, calibrate, fuse, aggregate,
train-head, synth, report.

Exit codes: 0 success, 2 validation error, 3 I/O or parse error.
All arithmetic happens in the library modules; the CLI only wires files
to functions and formats output.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import fileio, fusion, head, metrics, synth
from .core import join
from .errors import ParseError, SlaError, ValidationError
from .metrics import MetricReport, format_metric_row

EXIT_VALIDATION = 2
EXIT_IO = 3

TABLE_HEADER = "RMSE PCC SRC %<=0.5 %<=1.0"


def _pair_on_keys(pred_records, ref_records):
    """Match prediction and reference records on (speaker, part)."""
    from .errors import EmptyJoin

    refs = {r.key: r.score for r in ref_records}
    pairs = [(p.score, refs[p.key]) for p in pred_records if p.key in refs]
    if not pairs:
        raise EmptyJoin("no shared (speaker, part) keys between predictions and references")
    return [p for p, _ in pairs], [r for _, r in pairs]


def cmd_evaluate(args) -> int:
    allow_overall = args.overall
    pred = fileio.read_predictions(args.predictions, "prediction", allow_overall)
    ref = fileio.read_predictions(
        args.references, "prediction" if allow_overall else "reference", allow_overall
    )
    p, r = _pair_on_keys(pred, ref)
    report = metrics.full_report(p, r)
    if args.format == "csv":
        print("rmse,pcc,src,within_half,within_one,n")
        print(f"{report.rmse:.3f},{report.pcc:.3f},{report.src:.3f},"
              f"{report.within_half:.1f},{report.within_one:.1f},{report.n}")
    else:
        print(TABLE_HEADER)
        print(format_metric_row(report))
    if args.out:
        doc = {
            "rmse": report.rmse, "pcc": report.pcc, "src": report.src,
            "within_half": report.within_half, "within_one": report.within_one,
            "n": report.n,
        }
        Path(args.out).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                                  encoding="utf-8")
    return 0


def cmd_calibrate(args) -> int:
    w2v = fileio.read_predictions(args.w2v, "prediction")
    mllm = fileio.read_predictions(args.mllm, "prediction")
    refs = fileio.read_predictions(args.references, "reference")
    dev = join(w2v, mllm, refs)
    calib = fusion.calibrate(dev, grid_step=args.grid_step)
    provenance = {
        "w2v_digest": fileio.file_digest(args.w2v),
        "mllm_digest": fileio.file_digest(args.mllm),
        "ref_digest": fileio.file_digest(args.references),
        "grid_step": args.grid_step,
    }
    fileio.write_calibration(args.out, calib, provenance)
    print(f"{'bin':>3} {'interval':>14} {'count':>6} {'w':>6} {'bin_rmse':>9}")
    edges = calib.layout.edges
    for k in range(fusion.N_BINS):
        rows = [row for row in dev.rows
                if fusion.bin_index(row.mllm, calib.layout) == k]
        if rows:
            fused = [fusion.fuse_one(row.w2v, row.mllm, calib) for row in rows]
            bin_rmse = f"{metrics.rmse(fused, [row.reference for row in rows]):9.4f}"
        else:
            bin_rmse = f"{'-':>9}"
        close = "]" if k == fusion.N_BINS - 1 else ")"
        interval = f"[{edges[k]:.2f}-{edges[k + 1]:.2f}{close}"
        print(f"{k:>3} {interval:>14} {calib.per_bin_counts[k]:>6} "
              f"{calib.weights[k]:>6.2f} {bin_rmse}")
    print(f"dev RMSE: {calib.dev_rmse:.6f}")
    return 0


def cmd_fuse(args) -> int:
    w2v = fileio.read_predictions(args.w2v, "prediction")
    mllm = fileio.read_predictions(args.mllm, "prediction")
    calib, _ = fileio.read_calibration(args.calibration)
    data = join(w2v, mllm)
    fused = fusion.fuse_dataset(data, calib, clamp=args.clamp)
    fused.sort(key=lambda r: (r.speaker_id, r.part))
    fileio.write_predictions(args.out, fused)
    print(f"wrote {len(fused)} fused scores to {args.out}")
    return 0


def cmd_aggregate(args) -> int:
    pred = fileio.read_predictions(args.predictions, "prediction")
    overall = fusion.aggregate_overall(pred)
    fileio.write_predictions(args.out, overall)
    print(f"wrote {len(overall)} overall scores to {args.out}")
    return 0


def cmd_train_head(args) -> int:
    train_data = fileio.read_features(args.train_features)
    dev_data = fileio.read_features(args.dev_features)
    config = head.TrainConfig(
        epochs=args.epochs,
        learning_rate=args.learning_rate,
        warmup_steps=args.warmup_steps,
        weight_decay=args.weight_decay,
        batch_size=args.batch_size,
        seed=args.seed,
        mode=args.mode,
    )
    params, history = head.train(train_data, dev_data, config)
    fileio.write_head_params(args.out, params)
    log_lines = [
        f"epoch={h['epoch']} train_loss={h['train_loss']!r} dev_macro_f1={h['dev_macro_f1']!r}"
        for h in history
    ]
    if args.history:
        Path(args.history).write_text("\n".join(log_lines) + "\n",
                                      encoding="utf-8", newline="\n")
    for line in log_lines:
        print(line)
    best = max(history, key=lambda h: h["dev_macro_f1"])
    print(f"best epoch {best['epoch']} dev_macro_f1={best['dev_macro_f1']!r}")
    return 0


def cmd_synth(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.preset == "heteroscedastic":
        cfg = synth.heteroscedastic_config(args.n_speakers, args.seed)
    else:
        cfg = synth.SynthConfig(n_speakers=args.n_speakers, seed=args.seed,
                                w2v_noise=(args.noise,) * fusion.N_BINS,
                                mllm_noise=(args.noise,) * fusion.N_BINS)
    data = synth.generate_scores(cfg)
    from .core import ScoredRecord

    fileio.write_predictions(out_dir / "w2v.csv",
                             [ScoredRecord(r.speaker_id, r.part, r.w2v) for r in data.rows])
    fileio.write_predictions(out_dir / "mllm.csv",
                             [ScoredRecord(r.speaker_id, r.part, r.mllm) for r in data.rows])
    fileio.write_predictions(out_dir / "refs.csv",
                             [ScoredRecord(r.speaker_id, r.part, r.reference) for r in data.rows])
    print(f"wrote {len(data)} rows per file to {out_dir} (w2v.csv, mllm.csv, refs.csv)")

    if args.features:
        levels = [2.5, 3.5, 4.5]
        frames = synth.generate_frames(args.frames_per_class, levels, args.feature_dim,
                                       args.separation, seed=args.seed)
        dev_frames = synth.generate_frames(max(1, args.frames_per_class // 2), levels,
                                           args.feature_dim, args.separation,
                                           seed=args.seed + 1)
        fileio.write_features(out_dir / "train_features.txt", frames)
        fileio.write_features(out_dir / "dev_features.txt", dev_frames)
        print(f"wrote {len(frames)} train / {len(dev_frames)} dev feature sequences")
    return 0


def cmd_report(args) -> int:
    """Render precomputed leaderboard rows (name,rmse,pcc,src,within_half,within_one)."""
    path = Path(args.rows)
    try:
        lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    expected = "name,rmse,pcc,src,within_half,within_one"
    if not lines or lines[0] != expected:
        raise ParseError(f"{path}: expected header {expected!r}")
    print(f"{'Model':<20} {TABLE_HEADER}")
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) != 6:
            raise ParseError(f"{path}:{lineno}: expected 6 fields")
        name = fields[0]
        try:
            vals = [float(v) for v in fields[1:]]
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: bad numeric field") from exc
        report = MetricReport(rmse=vals[0], pcc=vals[1], src=vals[2],
                              within_half=vals[3], within_one=vals[4], n=0)
        print(f"{name:<20} {format_metric_row(report)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slascore",
        description="Two-grader spoken language assessment scoring pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="score a prediction file against references")
    p.add_argument("predictions")
    p.add_argument("references")
    p.add_argument("--out", help="also write metrics as JSON")
    p.add_argument("--format", choices=("table", "csv"), default="table")
    p.add_argument("--overall", action="store_true",
                   help="inputs hold per-speaker overall rows")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("calibrate", help="grid-search per-interval fusion weights")
    p.add_argument("w2v")
    p.add_argument("mllm")
    p.add_argument("references")
    p.add_argument("--grid-step", type=float, default=0.01)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("fuse", help="apply a fixed calibration to two prediction files")
    p.add_argument("w2v")
    p.add_argument("mllm")
    p.add_argument("calibration")
    p.add_argument("--clamp", action="store_true", help="clip fused scores to [2.0, 5.5]")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("aggregate", help="average the four part scores per speaker")
    p.add_argument("predictions")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("train-head", help="train the toy grader head on feature files")
    p.add_argument("train_features")
    p.add_argument("dev_features")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--learning-rate", type=float, default=1e-4)
    p.add_argument("--warmup-steps", type=int, default=600)
    p.add_argument("--weight-decay", type=float, default=0.01)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=(head.REGRESSION, head.CLASSIFICATION),
                   default=head.CLASSIFICATION)
    p.add_argument("--out", required=True, help="best parameters (JSON)")
    p.add_argument("--history", help="per-epoch training log")
    p.set_defaults(func=cmd_train_head)

    p = sub.add_parser("synth", help="generate synthetic prediction/feature files")
    p.add_argument("--n-speakers", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--preset", choices=("uniform", "heteroscedastic"), default="uniform")
    p.add_argument("--noise", type=float, default=0.3,
                   help="per-bin sigma for the uniform preset")
    p.add_argument("--features", action="store_true", help="also write feature files")
    p.add_argument("--frames-per-class", type=int, default=50)
    p.add_argument("--feature-dim", type=int, default=8)
    p.add_argument("--separation", type=float, default=8.0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="render precomputed leaderboard rows")
    p.add_argument("rows", help="CSV: name,rmse,pcc,src,within_half,within_one")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    import logging

    logging.basicConfig(format="warning: %(message)s", level=logging.WARNING)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SlaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
