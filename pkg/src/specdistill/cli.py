"""Command line front end.

Exit codes: 0 success, 2 usage error, 3 bad input data, 4 numeric failure.
"""

import argparse
import logging
import os
import sys

from . import report
from .config import load_config
from .exceptions import NoLayersFound, SpecDistillError
from .spectral import (
    intensity_histogram,
    load_profile,
    map_student_layers,
    model_profile,
    profile_distance,
    select_layers_topk,
)
from .tensor import list_layer_files, load_npy, parse_grid, tokens_to_spatial

log = logging.getLogger("specdistill")


def _out(args, default="."):
    path = args.out if args.out is not None else default
    os.makedirs(path, exist_ok=True)
    return path


def cmd_analyze(args):
    if not os.path.isdir(args.dir):
        raise NoLayersFound(f"{args.dir}: no such directory")
    files = list_layer_files(args.dir)
    if not files:
        raise NoLayersFound(f"{args.dir}: no layer_<k>.npy files")
    grid = args.tokens
    layers, indices = [], []
    for k, path in files:
        x = load_npy(path)
        if x.ndim == 3:
            if grid is None:
                raise NoLayersFound(f"{path}: token-shaped (B, N, C) layer needs --tokens HxW")
            x = tokens_to_spatial(x, *grid, drop_class=args.drop_class)
        log.info("layer %d: B=%d C=%d H=%d W=%d", k, *x.shape)
        layers.append(x)
        indices.append(k)
    profile = model_profile(layers, indices=indices)
    out = _out(args)
    report.write_profile_json(os.path.join(out, "profile.json"), profile)
    report.write_spectra_csv(os.path.join(out, "spectra.csv"), profile)
    report.write_text(os.path.join(out, "profile.svg"), report.profile_svg(profile, "model-wise spectral intensity"))


def cmd_histogram(args):
    hist = intensity_histogram(load_profile(args.profile), args.bins)
    out = _out(args)
    report.write_histogram_csv(os.path.join(out, "histogram.csv"), hist)
    report.write_text(os.path.join(out, "histogram.svg"), report.bar_chart_svg(hist, "layer intensity histogram"))


def cmd_select(args):
    profile = load_profile(args.profile)
    positions = select_layers_topk(profile, args.k)
    sel = map_student_layers(positions, profile.layer_count, args.student_depth)
    labels = profile.indices
    doc = {"teacher_layers": [labels[i - 1] for i in sel.teacher_layers],
           "student_layers": list(sel.student_layers)}
    report.write_json(os.path.join(_out(args), "selection.json"), doc)


def cmd_distill(args):
    # imported here so the analysis commands stay light
    from .pipeline import run_distillation

    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["data"]["seed"] = args.seed
    out = _out(args, cfg["io"]["output_dir"])
    dyn = run_distillation(cfg, out)
    log.info("profile distance to teacher: baseline %.6g, distilled %.6g",
             dyn["profile_distance"]["baseline"], dyn["profile_distance"]["distilled"])


def cmd_compare(args):
    a, b = load_profile(args.profile_a), load_profile(args.profile_b)
    d = profile_distance(a, b)
    labels = (os.path.basename(args.profile_a), os.path.basename(args.profile_b))
    report.write_text(os.path.join(_out(args), "compare.svg"), report.compare_svg(a, b, labels))
    print(report.fmt(d))


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise ValueError(text)
    return value


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override the data seed")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="specdistill", parents=[common],
                                     description="Spectral analysis and frequency-alignment distillation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="spectral profile of layer_<k>.npy dumps")
    p.add_argument("dir")
    p.add_argument("--tokens", metavar="HxW", type=parse_grid, help="grid for (B, N, C) token dumps")
    p.add_argument("--drop-class", action="store_true", help="drop the leading class token")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("histogram", parents=[common], help="histogram of layer intensities")
    p.add_argument("profile")
    p.add_argument("--bins", type=_positive_int, default=10)
    p.set_defaults(func=cmd_histogram)

    p = sub.add_parser("select", parents=[common], help="top-k layer selection and student mapping")
    p.add_argument("profile")
    p.add_argument("--k", type=_positive_int, default=8)
    p.add_argument("--student-depth", type=_positive_int, required=True)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("distill", parents=[common], help="train teacher, baseline and distilled student")
    p.add_argument("config")
    p.set_defaults(func=cmd_distill)

    p = sub.add_parser("compare", parents=[common], help="distance between two profiles")
    p.add_argument("profile_a")
    p.add_argument("profile_b")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    for name, default in (("out", None), ("seed", None), ("verbose", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        args.func(args)
    except SpecDistillError as exc:
        print(f"specdistill: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"specdistill: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
