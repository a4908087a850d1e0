"""Command line entry point: ``nsa-forge {synthesize,blend,eval,config,demo}``.

Exit codes: 0 ok, 1 usage, 2 data error, 3 placement exhaustion.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .core import RngStream
from .io import DataError, read_image, write_image, write_label
from .metrics import UndefinedMetricError
from .pipeline import MODES, DatasetSpec, PreprocessSpec, blend_pair, default_workers, evaluate, preprocess, synthesize
from .poisson import SolverError
from .sampler import PlacementError, apply_ablation

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_PLACEMENT = 0, 1, 2, 3

log = logging.getLogger("nsa_forge")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _preprocess_spec(cfg, choice: str):
    mode = cfg.preprocess_mode if choice == "auto" else choice
    return PreprocessSpec.for_mode(mode, cfg.rotate_max)


def _cmd_synthesize(args) -> int:
    cfg = load_config(args.config)
    spec = DatasetSpec(
        input_dir=Path(args.input),
        class_config=cfg,
        preprocessing=_preprocess_spec(cfg, args.preprocess),
        count=args.count,
        base_seed=args.seed,
        output_dir=Path(args.output),
        mode=args.mode,
        ablation=args.ablation,
        filter_window=args.filter_window,
    )
    records = synthesize(spec, workers=args.workers)
    ok = sum(r["status"] == "ok" for r in records)
    print(json.dumps({"written": ok, "skipped": len(records) - ok, "manifest": str(spec.output_dir / "manifest.jsonl")}))
    return EXIT_OK if ok else EXIT_PLACEMENT


def _cmd_blend(args) -> int:
    cfg = apply_ablation(load_config(args.config), args.ablation)
    rng = RngStream(args.seed)
    prep = _preprocess_spec(cfg, args.preprocess)
    img_d = preprocess(read_image(args.destination), prep, rng)
    img_s = img_d if args.source is None else preprocess(read_image(args.source), prep, rng)
    result = blend_pair(img_s, img_d, cfg, args.mode, rng, args.filter_window)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    write_image(out / "blended.png", result.image)
    files = {"image": "blended.png"}
    for kind, label in result.labels.items():
        files[kind] = f"label_{kind}.png"
        write_label(out / files[kind], label)
    print(json.dumps({"files": files, "placements": [p.to_dict() for p in result.placements]}, sort_keys=True))
    return EXIT_OK


def _cmd_eval(args) -> int:
    report = evaluate(args.predictions, args.truth, args.fpr_limit, args.resample_256, args.connectivity)
    text = json.dumps(report.to_dict(), indent=2)
    if args.output:
        Path(args.output).write_text(text + "\n")
    else:
        print(text)
    if args.figure:
        from .plotting import score_curves

        score_curves(report, args.figure)
    print(
        f"image_auroc\t{report.image_auroc:.6f}\npixel_auroc\t{report.pixel_auroc:.6f}\n"
        f"au_pro@{report.fpr_limit:g}\t{report.au_pro:.6f}",
        file=sys.stderr,
    )
    return EXIT_OK


def _cmd_config_check(args) -> int:
    status = EXIT_OK
    for path in args.paths:
        try:
            cfg = load_config(path)
        except ConfigError as exc:
            for line in exc.diagnostics:
                print(line, file=sys.stderr)
            status = EXIT_DATA
        else:
            print(f"{path}: ok ({cfg.name}, n_max={cfg.n_max}, constraints={'on' if cfg.constrained else 'off'})")
    return status


def _cmd_demo(args) -> int:
    from .demo import demo
    from .plotting import demo_grid

    cfg = load_config(args.config)
    prep = _preprocess_spec(cfg, args.preprocess)
    rng = RngStream(args.seed)
    img_s = preprocess(read_image(args.source), prep, rng)
    img_d = preprocess(read_image(args.destination), prep, rng)
    variants, stats = demo(img_s, img_d, cfg, seed=args.seed, trials=args.trials)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    demo_grid(img_s, img_d, variants, out / "demo_grid.png")
    for name, (image, _) in variants.items():
        write_image(out / f"demo_{name.lower()}.png", image)
    stats["figure"] = str(out / "demo_grid.png")
    (out / "demo_stats.json").write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n")
    print(json.dumps(stats, sort_keys=True))
    return EXIT_OK


def _add_common(p, *, with_mode=True):
    p.add_argument("--config", required=True, help="config file or shipped class name (e.g. bottle)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--preprocess",
        choices=("auto", "none", "object", "texture", "cxr"),
        default="auto",
        help="preprocessing recipe; 'auto' follows the config",
    )
    if with_mode:
        p.add_argument("--mode", choices=MODES, default="nsa-logistic")
        p.add_argument("--ablation", choices=("A", "B", "C", "D"), default=None)
        p.add_argument("--filter-window", type=int, default=5)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nsa-forge", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synthesize", help="generate a synthetic-anomaly dataset")
    _add_common(p)
    p.add_argument("--input", required=True, help="directory of normal PNG images")
    p.add_argument("--output", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: $NSA_FORGE_WORKERS or 1)")
    p.set_defaults(func=_cmd_synthesize)

    p = sub.add_parser("blend", help="blend a single image pair (debugging)")
    _add_common(p)
    p.add_argument("--source", help="source image (omit for cutpaste)")
    p.add_argument("--destination", required=True)
    p.add_argument("--output", required=True, help="output directory")
    p.set_defaults(func=_cmd_blend)

    p = sub.add_parser("eval", help="score anomaly maps against ground-truth masks")
    p.add_argument("--predictions", required=True, help="directory of 8/16-bit prediction PNGs")
    p.add_argument("--truth", required=True, help="directory of binary mask PNGs with matching stems")
    p.add_argument("--fpr-limit", type=float, default=0.3)
    p.add_argument("--resample-256", action="store_true", help="resample maps and masks to 256x256 first")
    p.add_argument("--connectivity", type=int, choices=(4, 8), default=8)
    p.add_argument("--output", help="write the JSON report here instead of stdout")
    p.add_argument("--figure", help="also render ROC/PRO curves to this image file")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("config", help="config utilities")
    csub = p.add_subparsers(dest="config_command", required=True, parser_class=_Parser)
    c = csub.add_parser("check", help="validate config files")
    c.add_argument("paths", nargs="+")
    c.set_defaults(func=_cmd_config_check)

    p = sub.add_parser("demo", help="composite figure of CutPaste, FPI, PII and NSA on one pair")
    _add_common(p, with_mode=False)
    p.add_argument("--source", required=True)
    p.add_argument("--destination", required=True)
    p.add_argument("--output", required=True, help="output directory")
    p.add_argument("--trials", type=int, default=8)
    p.set_defaults(func=_cmd_demo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "workers", None) is None and args.command == "synthesize":
        try:
            args.workers = default_workers()
        except ValueError as exc:
            print(f"nsa-forge: error: {exc}", file=sys.stderr)
            return EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as exc:
        for line in exc.diagnostics:
            print(line, file=sys.stderr)
        return EXIT_DATA
    except PlacementError as exc:
        print(f"nsa-forge: placement failed: {exc}", file=sys.stderr)
        return EXIT_PLACEMENT
    except (DataError, UndefinedMetricError, SolverError, ValueError, OSError) as exc:
        print(f"nsa-forge: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
