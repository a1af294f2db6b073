"""Command-line front end: ``ademseg generate|noise|features|segment|eval|sweep``.

Exit status: 0 success, 2 usage error, 3 data error, 4 numerical failure.
EM non-convergence is a warning, not a failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import evaluation as ev
from .features import BorderPolicy, compute_features
from .fuzzy import weight_map
from .gmm import FitError
from .images import (
    PgmError,
    grid_to_image,
    image_to_label_map,
    label_map_to_image,
    read_labels,
    read_pgm,
    write_grid,
    write_labels,
    write_pgm,
)
from .segment import RunConfig, SegMethod, segment

log = logging.getLogger("ademseg")

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


def _size(text):
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like 90x90, got {text!r}")
    if w < 1 or h < 1:
        raise argparse.ArgumentTypeError(f"size must be positive, got {text!r}")
    return w, h


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _methods(text):
    try:
        return [SegMethod(v.strip().lower()) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"methods must be among em,dem,adem, got {text!r}")


def _write(path: Path, data: bytes | str):
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode()
    path.write_bytes(data)
    log.info("wrote %s", path)


def _dump_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _read_image(path):
    try:
        return read_pgm(Path(path).read_bytes())
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}")
    except (PgmError, ValueError) as exc:
        raise DataError(f"{path}: {exc}")


def _read_label_map(path, k):
    try:
        data = Path(path).read_bytes()
        if data[:3] == b"LBL":
            return read_labels(data)
        return image_to_label_map(read_pgm(data), k)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}")
    except (PgmError, ValueError) as exc:
        raise DataError(f"{path}: {exc}")


def _config(args, **override) -> RunConfig:
    doc = {}
    if getattr(args, "manifest", None):
        try:
            doc = json.loads(Path(args.manifest).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot load run manifest {args.manifest}: {exc}")
    flags = {
        "method": getattr(args, "method", None),
        "k": args.k,
        "epsilon": args.epsilon,
        "max_iter": args.max_iter,
        "window_radius": args.radius,
        "s_threshold": args.s_threshold,
        "sigma_break": args.sigma_break,
        "border_policy": args.border,
        "seed": args.seed,
        "membership_override": args.membership,
    }
    doc.update({k: v for k, v in flags.items() if v is not None})
    doc.update(override)
    try:
        cfg = RunConfig.from_manifest(doc)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc))
    if cfg.membership_override:
        try:
            cfg.fuzzy_system()
        except OSError as exc:
            raise DataError(f"cannot read membership file {cfg.membership_override}: {exc.strerror or exc}")
        except (TypeError, ValueError) as exc:
            raise DataError(f"membership file {cfg.membership_override}: {exc}")
    return cfg


def cmd_generate(args):
    w, h = args.size
    try:
        ph = ev.make_phantom(w, h, args.levels, args.layout, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc))
    out = Path(args.out)
    _write(out.with_name(out.name + ".pgm"), write_pgm(ph.image))
    _write(out.with_name(out.name + ".truth.pgm"), write_pgm(label_map_to_image(ph.truth)))
    manifest = {
        "layout": args.layout,
        "width": w,
        "height": h,
        "levels": list(ph.class_levels),
        "k": ph.truth.k,
        "seed": args.seed,
    }
    _write(out.with_name(out.name + ".json"), _dump_json(manifest))


def cmd_noise(args):
    img = _read_image(args.input)
    try:
        spec = ev.NoiseSpec(args.kind, args.amount, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc))
    out = Path(args.out)
    _write(out.with_name(out.name + ".pgm"), write_pgm(ev.add_noise(img, spec)))


def _dump_features(fm, out: Path):
    grids = {"mean": (fm.mean, 0.0, 255.0), "sigma": (fm.sigma, 0.0, 128.0),
             "ncn": (fm.ncn, 0.0, None), "p": (fm.p, 0.0, 1.0)}
    for name, (grid, lo, hi) in grids.items():
        _write(out.with_name(f"{out.name}.{name}.bin"), write_grid(grid))
        hi = float(grid.max()) if hi is None else hi
        _write(out.with_name(f"{out.name}.{name}.pgm"), write_pgm(grid_to_image(grid, lo, max(hi, 1.0))))


def cmd_features(args):
    img = _read_image(args.input)
    cfg = _config(args)
    fm = compute_features(img, cfg.window, cfg.s_threshold)
    weight_map(fm, cfg.fuzzy_system())
    _dump_features(fm, Path(args.out))


def _segment_outputs(img, cfg, out: Path, input_name, dump_features=False):
    labels, mixture, fm = segment(img, cfg.method, cfg)
    _write(out.with_name(out.name + ".labels.pgm"), write_pgm(label_map_to_image(labels)))
    _write(out.with_name(out.name + ".labels.lbl"), write_labels(labels))
    _write(out.with_name(out.name + ".mixture.json"), _dump_json(mixture.to_dict()))
    run = cfg.manifest()
    run["input"] = str(input_name)
    _write(out.with_name(out.name + ".run.json"), _dump_json(run))
    if dump_features:
        _dump_features(fm, out)
    if not mixture.converged:
        log.warning("EM stopped at max_iter=%d without meeting epsilon=%g", cfg.max_iter, cfg.epsilon)
    return labels


def cmd_segment(args):
    if args.method is None and not args.manifest:
        raise UsageError("segment: --method is required (em, dem or adem)")
    img = _read_image(args.input)
    cfg = _config(args)
    _segment_outputs(img, cfg, Path(args.out), args.input, args.dump_features)


def cmd_eval(args):
    out = Path(args.out)
    truth = _read_label_map(args.truth, args.k)
    if args.compare:
        if not args.image:
            raise UsageError("eval --compare needs --image")
        img = _read_image(args.image)
        if img.shape != truth.shape:
            raise UsageError(f"image {img.shape} and truth {truth.shape} differ in size")
        cfg = _config(args, k=truth.k)
        phantom = ev.Phantom(img, truth, ())
        cmp = ev.run_comparison(phantom, None, args.compare, cfg)
        reports = cmp.reports
    else:
        if not args.pred:
            raise UsageError("eval needs --pred or --compare")
        pred = _read_label_map(args.pred, args.k)
        if pred.shape != truth.shape:
            raise UsageError(f"prediction {pred.shape} and truth {truth.shape} differ in size")
        if pred.k != truth.k:
            raise UsageError(f"prediction has k={pred.k}, truth has k={truth.k}")
        aligned = ev.align_labels(pred, truth)
        reports = {args.name: ev.score(aligned, truth)}
    table = ev.format_table(reports)
    _write(out.with_name(out.name + ".report.json"),
           _dump_json({name: rep.to_dict() for name, rep in reports.items()}))
    _write(out.with_name(out.name + ".table.txt"), table)
    if not args.quiet:
        sys.stdout.write(table)


def cmd_sweep(args):
    if not args.sigma:
        raise UsageError("sweep: --sigma needs at least one value")
    img = _read_image(args.input)
    truth = _read_label_map(args.truth, args.k) if args.truth else None
    if truth is not None and truth.shape != img.shape:
        raise UsageError(f"image {img.shape} and truth {truth.shape} differ in size")
    out = Path(args.out)
    rows = []
    for sigma in sorted(set(args.sigma)):
        cfg = _config(args, method="adem", sigma_break=sigma)
        tag = out.with_name(f"{out.name}.sigma{sigma:g}")
        labels, _, _ = segment(img, cfg.method, cfg)
        _write(tag.with_name(tag.name + ".labels.pgm"), write_pgm(label_map_to_image(labels)))
        row = {"sigma_break": sigma, "labels": tag.name + ".labels.pgm"}
        if truth is not None:
            rep = ev.score(ev.align_labels(labels, truth), truth)
            row.update(rep.to_dict())
        rows.append(row)
    summary = {"input": str(args.input), "rows": rows}
    if truth is not None:
        summary["best_sigma"] = min(rows, key=lambda r: (r["total"], r["sigma_break"]))["sigma_break"]
    _write(out.with_name(out.name + ".summary.json"), _dump_json(summary))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (default 0, or the manifest's)")
    common.add_argument("--out", required=True, help="output path prefix")
    common.add_argument("--quiet", action="store_true", help="only report warnings and errors")

    pipeline = argparse.ArgumentParser(add_help=False)
    pipeline.add_argument("--k", type=int, default=None, help="number of classes (default 3)")
    pipeline.add_argument("--epsilon", type=float, default=None, help="EM stop tolerance (default 0.001)")
    pipeline.add_argument("--max-iter", type=int, default=None)
    pipeline.add_argument("--radius", type=int, default=None, help="window radius (1 = 3x3)")
    pipeline.add_argument("--s-threshold", type=float, default=None, help="NCN gray threshold (default 20)")
    pipeline.add_argument("--sigma-break", type=float, default=None, help="sigma membership break (default 40)")
    pipeline.add_argument("--border", choices=[b.value for b in BorderPolicy], default=None)
    pipeline.add_argument("--membership", default=None, help="JSON file overriding fuzzy breakpoints")
    pipeline.add_argument("--manifest", default=None, help="run manifest to reproduce")

    parser = argparse.ArgumentParser(prog="ademseg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="write a ground-truthed phantom")
    p.add_argument("--layout", choices=[v.value for v in ev.Layout], default="bands")
    p.add_argument("--size", type=_size, default=(90, 90))
    p.add_argument("--levels", type=_int_list, default=[30, 120, 220])
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("noise", parents=[common], help="corrupt an image")
    p.add_argument("input")
    p.add_argument("--kind", choices=[v.value for v in ev.NoiseKind], default="impulse")
    p.add_argument("--amount", type=float, default=0.05)
    p.set_defaults(func=cmd_noise)

    p = sub.add_parser("features", parents=[common, pipeline], help="dump mean/sigma/NCN/p grids")
    p.add_argument("input")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("segment", parents=[common, pipeline], help="segment an image")
    p.add_argument("input")
    p.add_argument("--method", type=str.lower, choices=[m.value for m in SegMethod], default=None)
    p.add_argument("--dump-features", action="store_true")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("eval", parents=[common, pipeline], help="score label maps against truth")
    p.add_argument("--truth", required=True, help="truth label map (.lbl or label PGM)")
    p.add_argument("--pred", help="predicted label map")
    p.add_argument("--name", default="pred", help="column name for --pred")
    p.add_argument("--image", help="image to segment with --compare")
    p.add_argument("--compare", type=_methods, help="comma-separated methods, e.g. em,dem,adem")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", parents=[common, pipeline], help="ADEM over several sigma breaks")
    p.add_argument("input")
    p.add_argument("--sigma", type=_float_list, required=True, help="e.g. 15,40,70")
    p.add_argument("--truth", help="truth label map for error counts")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    if getattr(args, "k", None) is None and args.command in ("eval", "sweep"):
        args.k = 3
    if args.seed is None and not getattr(args, "manifest", None):
        args.seed = 0
    try:
        args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"ademseg {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"ademseg {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FitError as exc:
        print(f"ademseg {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
