"""Command-line entry point: ``activepoly analyze|phantom|evaluate``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .errors import ActivePolyError, ConfigError, IngestionError, ValidationError
from .imaging import LANDMARKS_FILENAME, load_sequence
from .motion import INFARCTED, MI, NORMAL
from .phantom import PhantomConfig, generate_phantom, write_sequence
from .pipeline import PipelineConfig, process_echo
from .report import (emit_report, evaluate_batch, load_labels, load_reports, render_overlay,
                     write_overlay)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_UNPROCESSABLE = 3


def _read_json(path, what):
    path = Path(path)
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise IngestionError(f"{path}: cannot read {what} ({exc})", path) from exc
    except json.JSONDecodeError as exc:
        raise IngestionError(f"{path}: malformed JSON ({exc})", path) from exc


def _echo_dirs(root: Path) -> list:
    """``root`` itself if it holds a landmarks file, else its echo subdirectories."""
    if not root.is_dir():
        raise IngestionError(f"{root}: not a directory", root)
    if (root / LANDMARKS_FILENAME).is_file():
        return [root]
    dirs = sorted(p for p in root.iterdir() if (p / LANDMARKS_FILENAME).is_file())
    if not dirs:
        raise IngestionError(f"{root}: no echo directories (none holds {LANDMARKS_FILENAME})",
                             root)
    return dirs


def _pipeline_config(args) -> PipelineConfig:
    config = PipelineConfig()
    if args.config:
        config = PipelineConfig.from_dict(_read_json(args.config, "config"))
    kw = {}
    if args.threshold is not None:
        kw["threshold"] = args.threshold
    if args.lam is not None:
        kw["lambda_rp"] = kw["lambda_ap"] = args.lam
    if args.iters is not None:
        kw["chanvese"] = config.chanvese.with_(iterations=args.iters)
    try:
        return config.with_(**kw) if kw else config
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _write_overlays(report, seq, out_dir: Path):
    """End-diastolic overlay plus one ghosted overlay per frame of maximal displacement."""
    ed = report.frames[0]
    paths = [write_overlay(render_overlay(seq[0], ed.segments), out_dir / f"{report.id}_ed.png")]
    for t in sorted(set(report.max_frames().values())):
        res = report.frames[t]
        if t == 0 or res is None:
            continue
        img = render_overlay(seq[t], res.segments, report.curves, ed.segments)
        paths.append(write_overlay(img, out_dir / f"{report.id}_t{t:03d}.png"))
    return paths


def _analyze_one(echo_dir, config, out_dir, overlay):
    seq = load_sequence(echo_dir)
    report = process_echo(seq, config, keep_frames=overlay)
    emit_report(report, out_dir)
    if overlay and report.ok:
        _write_overlays(report, seq, out_dir)
    return report


def cmd_analyze(args) -> int:
    config = _pipeline_config(args)
    dirs = _echo_dirs(Path(args.echo_dir))
    out_dir = Path(args.out)
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        reports = list(pool.map(lambda d: _analyze_one(d, config, out_dir, args.overlay), dirs))
    status = EXIT_OK
    for r in reports:
        d = r.diagnosis
        if d is None:
            print(f"{r.id}: unprocessable ({r.error})")
            status = EXIT_UNPROCESSABLE
            continue
        bad = [v.segment_id for v in d.verdicts if v.label == INFARCTED]
        print(f"{r.id}: {d.echo_label} lvef={d.lvef:.3f} gate={d.gate} infarcted={bad}")
    return status


def _labels_entry(truth):
    codes = {str(s): (3 if lab == INFARCTED else 1) for s, lab in truth.segment_labels.items()}
    codes.setdefault("4", 1)
    echo = MI if INFARCTED in truth.segment_labels.values() else NORMAL
    return {"segments": dict(sorted(codes.items())), "echo": echo}


def cmd_phantom(args) -> int:
    data = _read_json(args.config, "phantom config")
    out = Path(args.out)
    if isinstance(data, dict):
        seq, truth = generate_phantom(PhantomConfig.from_dict(data))
        write_sequence(seq, truth, out)
        print(f"{seq.id}: {len(seq)} frames, lvef={truth.true_lvef:.3f} -> {out}")
        return EXIT_OK
    if not isinstance(data, list) or not data:
        raise ConfigError("phantom config must be an object or a non-empty list of objects")
    labels = {}
    for i, entry in enumerate(data):
        if not isinstance(entry, dict):
            raise ConfigError(f"phantom config entry {i} must be an object")
        entry = dict(entry)
        echo_id = str(entry.pop("id", f"phantom_{i:03d}"))
        seq, truth = generate_phantom(PhantomConfig.from_dict(entry), echo_id)
        write_sequence(seq, truth, out / echo_id)
        labels[echo_id] = _labels_entry(truth)
        print(f"{echo_id}: {len(seq)} frames, lvef={truth.true_lvef:.3f}")
    with open(out / "labels.json", "w") as fh:
        json.dump(labels, fh, indent=2)
    return EXIT_OK


def _fmt(v):
    return "   n/a" if v is None else f"{v:.4f}"


def cmd_evaluate(args) -> int:
    reports = load_reports(args.reports_dir)
    result = evaluate_batch(reports, load_labels(args.labels))
    cols = ("accuracy", "sensitivity", "specificity", "precision", "f1", "far")
    print("table      " + " ".join(f"{c[:6]:>6}" for c in cols) + "   tp   tn   fp   fn")
    rows = [(f"segment {s}", *v) for s, v in result.segments.items()]
    rows += [("pooled", *result.pooled), ("echo", *result.echo)]
    for name, cm, m in rows:
        vals = m.as_dict()
        print(f"{name:<10} " + " ".join(_fmt(vals[c]) for c in cols)
              + f" {cm.tp:4d} {cm.tn:4d} {cm.fp:4d} {cm.fn:4d}")
    if result.excluded:
        print("excluded (no diagnosis): " + ", ".join(result.excluded))
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(result.to_dict(), fh, indent=2)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="activepoly",
                                     description="LV wall-motion analysis and MI detection")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="analyze one echo directory or a directory of echos")
    p.add_argument("echo_dir")
    p.add_argument("--config", help="pipeline config JSON")
    p.add_argument("--out", default="reports", help="output directory (default: reports)")
    p.add_argument("--overlay", action="store_true", help="write segment overlay PNGs")
    p.add_argument("--threshold", type=float, help="infarction threshold on the ratio")
    p.add_argument("--iters", type=int, help="snake iterations")
    p.add_argument("--lambda", dest="lam", type=float, help="polynomial regularization weight")
    p.add_argument("--jobs", type=int, default=1, help="echos analyzed concurrently")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("phantom", help="render synthetic echos from a config JSON")
    p.add_argument("config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("evaluate", help="score reports against ground-truth labels")
    p.add_argument("reports_dir")
    p.add_argument("labels")
    p.add_argument("--json", help="also write the tables to this JSON file")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValidationError, ConfigError, IngestionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ActivePolyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNPROCESSABLE


if __name__ == "__main__":
    sys.exit(main())
