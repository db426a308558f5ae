"""depthbench command line.

Exit codes: 0 success, 1 usage, 2 data error, 3 model error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import dataio, leaderboard
from .errors import ConfigError, DepthBenchError, FormatError, GraphError
from .metrics import ScoreParams, evaluate_batch, final_score

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_MODEL = 0, 1, 2, 3

log = logging.getLogger("depthbench")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _config(args, overrides=None):
    from .config import load_config

    try:
        return load_config(getattr(args, "config", None), overrides)
    except (ConfigError, OSError) as exc:
        raise CliError(f"config: {exc}", EXIT_USAGE) from None


def _load_graph(spec: str):
    from .engine.graph import GraphSpec
    from .engine.zoo import BUILTIN_GRAPHS

    if spec in BUILTIN_GRAPHS:
        return BUILTIN_GRAPHS[spec]()
    try:
        return GraphSpec.load(spec)
    except OSError as exc:
        raise CliError(f"cannot read graph {spec}: {exc}", EXIT_MODEL) from None


def _load_model(graph_spec, weights_path, backend):
    from .engine.graph import Engine
    from .engine.weights import WeightStore

    graph = _load_graph(graph_spec)
    try:
        weights = WeightStore.load(weights_path)
    except OSError as exc:
        raise CliError(f"cannot read weights {weights_path}: {exc}", EXIT_MODEL) from None
    return Engine(graph, weights, backend=backend)


def _pngs(d: Path) -> dict[str, Path]:
    if not d.is_dir():
        raise CliError(f"not a directory: {d}", EXIT_DATA)
    return {p.stem: p for p in sorted(d.glob("*.png"))}


def cmd_evaluate(args) -> int:
    cfg = _config(args, {"aggregation": args.aggregation} if args.aggregation else None)
    unit = args.unit_scale if args.unit_scale is not None else cfg.unit_scale
    preds = _pngs(Path(args.pred_dir))
    if args.manifest:
        index = dataio.read_manifest(args.manifest, root=cfg.data_root if args.data_root_paths else None)
        gts = {e.image_id: e.depth_path for e in index.entries}
    elif args.gt_dir:
        gts = _pngs(Path(args.gt_dir))
    else:
        raise CliError("give a ground-truth directory or --manifest", EXIT_USAGE)
    missing_pred = sorted(gts.keys() - preds.keys())
    missing_gt = sorted(preds.keys() - gts.keys())
    if missing_pred or missing_gt:
        lines = [f"unpaired image ids:"]
        lines += [f"  no prediction: {i}" for i in missing_pred]
        lines += [f"  no ground truth: {i}" for i in missing_gt]
        raise CliError("\n".join(lines), EXIT_DATA)
    if not gts:
        raise CliError("no image pairs found", EXIT_DATA)

    def pairs():
        for image_id in sorted(gts):
            pred = dataio.read_depth16_raw(preds[image_id]).astype(np.float64) * unit
            gt = dataio.load_depth16(gts[image_id], unit, cfg.max_depth)
            yield image_id, pred, gt

    report = evaluate_batch(pairs(), aggregation=cfg.aggregation)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "eval.csv").write_text(report.to_csv())
    (out / "eval.json").write_text(report.to_json())
    print(f"images={len(report.per_image)} n_valid={report.n_valid} aggregation={report.aggregation}")
    print(f"si_rmse={report.si_rmse:.6f} rmse={report.rmse:.6f} "
          f"log10={report.log10_err:.6f} rel={report.rel_err:.6f}")
    if args.runtime_ms is not None:
        print(f"score={final_score(report.si_rmse, args.runtime_ms, cfg.score):.6f}")
    return EXIT_OK


def cmd_score(args) -> int:
    cfg = _config(args)
    params = ScoreParams(args.c) if args.c is not None else cfg.score
    score = final_score(args.si_rmse, args.runtime_ms, params)
    print(f"score={score!r}")
    print(f"rounded={int(round(score))}")
    return EXIT_OK


def cmd_leaderboard(args) -> int:
    cfg = _config(args)
    rows = leaderboard.builtin_rows() if args.csv_in == "builtin" else leaderboard.read_rows(args.csv_in)
    if not rows:
        raise CliError("leaderboard CSV has no rows", EXIT_DATA)
    if args.c is not None:
        params = ScoreParams(args.c)
    elif args.calibrate_row:
        params = leaderboard.calibrate_from(rows, args.calibrate_row)
    else:
        params = cfg.score
    ranked = leaderboard.rank(rows, params)
    sys.stdout.write(f"# C={params.normalization_c!r}\n")
    sys.stdout.write(leaderboard.render_text(ranked))
    if args.out:
        Path(args.out).write_text(leaderboard.render_csv(ranked))
    return EXIT_OK


def cmd_infer(args) -> int:
    cfg = _config(args)
    engine = _load_model(args.graph, args.weights, args.backend)
    try:
        image = dataio.load_rgb(args.rgb_in)
    except (OSError, FormatError) as exc:
        raise CliError(f"cannot load {args.rgb_in}: {exc}", EXIT_DATA) from None
    raw = engine.run_raw(image)
    depth = dataio.DepthMap.from_array(raw, max_depth=cfg.max_depth)
    dataio.save_depth16(depth, args.depth_out, cfg.unit_scale)
    print(f"shape={raw.shape[0]}x{raw.shape[1]} min={float(raw.min()):.6f} "
          f"max={float(raw.max()):.6f} mean={float(raw.mean(dtype=np.float64)):.6f} "
          f"valid={depth.n_valid}")
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import time_inference

    cfg = _config(args)
    runs = args.runs if args.runs is not None else cfg.runs
    warmup = args.warmup if args.warmup is not None else cfg.warmup
    engine = _load_model(args.graph, args.weights, args.backend)
    if args.input:
        try:
            image = dataio.load_rgb(args.input).values
        except (OSError, FormatError) as exc:
            raise CliError(f"cannot load {args.input}: {exc}", EXIT_DATA) from None
    else:
        h, w, c = engine.shapes[engine.graph.inputs[0]]
        from .rng import make_rng
        image = make_rng(cfg.seed).random((h, w, c)).astype(np.float32)
    try:
        report = time_inference(engine, image, runs=runs, warmup=warmup, statistic=cfg.statistic)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE) from None
    report.environment += f" backend={args.backend or 'default'}"
    if args.out:
        Path(args.out).write_text(report.to_json())
    print(f"runs={runs} warmup={warmup} p50={report.p50:.3f}ms p90={report.p90:.3f}ms "
          f"p99={report.p99:.3f}ms mean={report.mean:.3f}ms min={report.min:.3f}ms")
    return EXIT_OK


def cmd_init_model(args) -> int:
    from .engine.zoo import BUILTIN_GRAPHS, random_weights, zero_weights

    if args.name not in BUILTIN_GRAPHS:
        raise CliError(f"unknown builtin graph {args.name!r}; have {sorted(BUILTIN_GRAPHS)}", EXIT_USAGE)
    graph = BUILTIN_GRAPHS[args.name]()
    weights = zero_weights(graph) if args.zero else random_weights(graph, args.seed)
    Path(args.graph_out).write_text(graph.to_json())
    weights.save(args.weights_out)
    print(f"wrote {args.graph_out} and {args.weights_out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="depthbench", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="TOML config file; flags override it")
        return sp

    backends = ["auto", "numpy", "cython", "naive"]

    e = common(sub.add_parser("evaluate", help="score predicted depth PNGs against ground truth"))
    e.add_argument("pred_dir")
    e.add_argument("gt_dir", nargs="?")
    e.add_argument("--manifest", help="CSV manifest giving ground-truth depth paths")
    e.add_argument("--data-root-paths", action="store_true",
                   help="resolve manifest paths against the configured data root")
    e.add_argument("--out", required=True, help="output directory for eval.csv / eval.json")
    e.add_argument("--aggregation", choices=["pooled", "mean"])
    e.add_argument("--unit-scale", type=float)
    e.add_argument("--runtime-ms", type=float, help="also print the final score for this runtime")
    e.set_defaults(func=cmd_evaluate)

    s = common(sub.add_parser("score", help="final score from si-RMSE and runtime"))
    s.add_argument("--si-rmse", type=float, required=True)
    s.add_argument("--runtime-ms", type=float, required=True)
    s.add_argument("--c", type=float, help="normalization constant (default: TCL-calibrated)")
    s.set_defaults(func=cmd_score)

    lb = common(sub.add_parser("leaderboard", help="rank (name, si_rmse, runtime_ms) rows"))
    lb.add_argument("csv_in", help="CSV path, or 'builtin' for the bundled reference rows")
    lb.add_argument("--c", type=float)
    lb.add_argument("--calibrate-row", help="calibrate C from this row's reported_score")
    lb.add_argument("--out", help="also write the ranking as CSV")
    lb.set_defaults(func=cmd_leaderboard)

    i = common(sub.add_parser("infer", help="run a graph on one RGB image"))
    i.add_argument("graph", help="graph JSON path or builtin name (tcl-tiny)")
    i.add_argument("weights", help="DBW1 weight file")
    i.add_argument("rgb_in")
    i.add_argument("depth_out")
    i.add_argument("--backend", choices=backends)
    i.set_defaults(func=cmd_infer)

    b = common(sub.add_parser("bench", help="time single-image inference"))
    b.add_argument("graph")
    b.add_argument("weights")
    b.add_argument("--runs", type=int)
    b.add_argument("--warmup", type=int)
    b.add_argument("--input", help="RGB PNG to time on (default: seeded random image)")
    b.add_argument("--out", help="write the LatencyReport JSON here")
    b.add_argument("--backend", choices=backends)
    b.set_defaults(func=cmd_bench)

    m = sub.add_parser("init-model", help="write a builtin graph and initial weights")
    m.add_argument("name")
    m.add_argument("graph_out")
    m.add_argument("weights_out")
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--zero", action="store_true", help="all-zero weights")
    m.set_defaults(func=cmd_init_model)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except GraphError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except FormatError as exc:
        is_model = str(exc).startswith(("not a DBW1", "DBW1", "malformed DBW1"))
        print(f"{'model' if is_model else 'data'} error: {exc}", file=sys.stderr)
        return EXIT_MODEL if is_model else EXIT_DATA
    except (DepthBenchError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
