"""Command line for building meshes, filter banks and decoders and evaluating them.

Exit codes: 0 success, 1 malformed input, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import decoderopt as dec
from . import evaluation as ev
from . import sphere
from . import wavelets as wl
from .config import ConfigError, load_config
from .mesh import build_mesh, export_mesh, read_mesh_levels
from .waveletopt import build_optimized_bank

log = logging.getLogger("sphwave")


class InputError(Exception):
    """Malformed command line or input file."""


class NumericalError(Exception):
    """A computation failed or produced non-finite output."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


def load_layout(arg: str) -> sphere.SpeakerLayout:
    """A layout file path, or the name of a built-in layout."""
    path = Path(arg)
    if path.exists():
        return sphere.read_layout(path)
    try:
        return sphere.builtin_layout(arg)
    except ValueError:
        raise InputError(f"layout {arg!r} is neither a file nor a built-in layout") from None


def _format(spec, mesh_levels, filters_dir=None, area_method="voronoi"):
    parts = spec.split(":")
    if parts[0] == "swf" and len(parts) == 3 and filters_dir is not None:
        mesh = build_mesh(mesh_levels)
        bank = wl.load_filter_bank(filters_dir, mesh)
        return dec.SwfFormat(bank, int(parts[2]))
    if parts[0] == "swf" and len(parts) == 3 and parts[1] == "optimized":
        raise InputError("swf:optimized needs --filters pointing at an optimised bank")
    return dec.parse_format(spec, mesh_levels)


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericalError("result contains non-finite values")


# ---------------------------------------------------------------------------
# commands

def cmd_mesh_build(args, cfg):
    mesh = build_mesh(args.levels)
    for path, lv in zip(export_mesh(mesh, args.out), mesh.levels):
        print(f"{path}: {lv.n_vertices} vertices, {lv.n_faces} faces")


def cmd_filters_gen(args, cfg):
    mesh = build_mesh(read_mesh_levels(args.mesh))
    bank = wl.build_filter_bank(mesh, args.family, cfg.area_method)
    paths = wl.save_filter_bank(bank, args.out)
    print(f"wrote {len(paths)} filter files to {args.out}")


def cmd_filters_opt(args, cfg):
    mesh = build_mesh(read_mesh_levels(args.mesh))
    level = args.level or cfg.family_level or mesh.max_level
    bank, reports = build_optimized_bank(mesh, level, cfg.filter_weights,
                                         args.init or cfg.family_init, cfg.seed)
    for lv in bank.levels.values():
        _check_finite(lv.A, lv.B, lv.P, lv.Q)
    wl.save_filter_bank(bank, args.out)
    report_path = Path(args.out) / "report.csv"
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write("level,outer,cost,constraint_violation\n")
        for r in reports:
            for outer, f, viol in r.history:
                fh.write(f"{r.level},{outer},{f:.17g},{viol:.17g}\n")
    for r in reports:
        print(f"level {r.level}: params {r.n_params}, constraints {r.n_independent}/"
              f"{r.n_constraints}, cost {r.cost_init:.6g} -> {r.cost_final:.6g}, "
              f"|AP-I| {r.constraint_residual:.2e}")
    if any(r.constraint_residual > 1e-6 for r in reports):
        raise NumericalError("A P = I could not be satisfied")


def cmd_decoder_analytic(args, cfg):
    layout = load_layout(args.layout)
    mode = {"proj": "projection", "pinv": "pseudoinverse"}[args.mode]
    try:
        D = sphere.decode_analytic(layout, args.order, mode, args.regularization)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(str(exc)) from None
    D = sphere.apply_degree_weights(D, args.order, sphere.degree_weights(args.order, args.weights))
    _check_finite(D)
    M = dec.DecodingMatrix(D, dec.AmbisonicsFormat(args.order), layout)
    if args.out:
        dec.save_decoder(M, args.out, args.layout)
    else:
        for name, row in zip(layout.names, D):
            print(name, " ".join(f"{x:.17g}" for x in row))


def cmd_decoder_opt(args, cfg):
    layout = load_layout(args.layout)
    fmt = _format(args.format, args.mesh_levels or cfg.mesh_levels, args.filters, cfg.area_method)
    opts = dec.DecoderOptions(seed=cfg.seed, symmetric=not args.no_pairing,
                              max_iter=cfg.optimizer.max_iter)
    if isinstance(fmt, dec.AmbisonicsFormat):
        opts.directions = sphere.sample_vectors(cfg.eval_directions)
    bands = ["lf", "hf"] if args.band == "both" else [args.band]
    out = Path(args.out)
    for band in bands:
        preset = "lf" if band == "lf" and args.band == "both" else args.preset
        opts.band = band
        D, rep = dec.optimize_decoder(layout, fmt, cfg.weights(preset), opts)
        _check_finite(D.gains)
        path = out if len(bands) == 1 else out.with_name(f"{out.stem}_{band}{out.suffix}")
        dec.save_decoder(D, path, args.layout)
        print(f"{path}: band {band}, preset {preset}, init {rep.init}, "
              f"f {rep.f_init:.6g} -> {rep.f_final:.6g}, paired {rep.paired}")


def _decoder_from_file(path, layout_arg, filters, mesh_levels):
    meta, gains = dec.load_decoder_gains(path)
    layout = load_layout(layout_arg or meta.get("layout", ""))
    if meta.get("format") == "ambisonics":
        fmt = dec.AmbisonicsFormat(int(meta["order"]))
    elif meta.get("format") == "swf":
        levels = int(meta.get("mesh", mesh_levels))
        fmt = _format(f"swf:{meta['family']}:{meta['level']}", levels, filters)
    else:
        raise InputError(f"{path}: header lacks a format")
    try:
        return dec.DecodingMatrix(gains, fmt, layout, meta.get("band", "universal"))
    except ValueError as exc:
        raise InputError(str(exc)) from None


def cmd_eval_sweep(args, cfg):
    n = args.n or cfg.eval_n
    plane = args.plane or cfg.eval_plane
    if args.decoder:
        D = _decoder_from_file(args.decoder, args.layout, args.filters, cfg.mesh_levels)
        report = ev.sweep(decoder=D, plane=plane, n=n)
    elif args.format:
        fmt = _format(args.format, args.mesh_levels or cfg.mesh_levels, args.filters)
        report = ev.sweep(fmt, plane=plane, n=n)
    else:
        raise InputError("eval sweep needs --decoder or --format")
    summary = ev.summarize(report)
    if args.out:
        ev.write_sweep_csv(report, args.out)
    if args.summary:
        ev.write_summary_csv(summary, args.summary)
    print(ev.format_summary(summary))


def cmd_eval_crosstalk(args, cfg):
    D = _decoder_from_file(args.decoder, args.layout, args.filters, cfg.mesh_levels)
    values = ev.crosstalk(D)
    if args.out:
        ev.write_crosstalk_csv(D.layout.names, values, args.out)
    for name, v in zip(D.layout.names, values):
        print(f"{name} {v:.3f}")


def cmd_apply(args, cfg):
    _, D = dec.load_decoder_gains(args.matrix)
    frames = []
    for lineno, line in enumerate(Path(args.input).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            frames.append([float(x) for x in line.split(",")])
        except ValueError:
            raise InputError(f"{args.input}:{lineno}: malformed number") from None
    X = np.array(frames, dtype=float).reshape(len(frames), -1)
    if X.shape[1] != D.shape[1]:
        raise InputError(f"frames have {X.shape[1]} channels, matrix expects {D.shape[1]}")
    Y = X @ D.T
    _check_finite(Y)
    lines = [",".join(f"{x:.17g}" for x in row) for row in Y]
    Path(args.output).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sphwave", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="INI configuration file")
    p.add_argument("--seed", type=int, help="overrides the configured seed and SPHWAVE_SEED")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    mesh = sub.add_parser("mesh").add_subparsers(dest="action", required=True, parser_class=_Parser)
    b = mesh.add_parser("build")
    b.add_argument("--levels", type=int, required=True)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_mesh_build)

    filters = sub.add_parser("filters").add_subparsers(dest="action", required=True,
                                                       parser_class=_Parser)
    g = filters.add_parser("gen")
    g.add_argument("--family", required=True, choices=wl.FAMILIES)
    g.add_argument("--mesh", required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_filters_gen)
    o = filters.add_parser("opt")
    o.add_argument("--mesh", required=True)
    o.add_argument("--out", required=True)
    o.add_argument("--level", type=int)
    o.add_argument("--init", choices=("sint", "random"))
    o.set_defaults(func=cmd_filters_opt)

    decoder = sub.add_parser("decoder").add_subparsers(dest="action", required=True,
                                                       parser_class=_Parser)
    a = decoder.add_parser("analytic")
    a.add_argument("--layout", required=True)
    a.add_argument("--order", type=int, required=True)
    a.add_argument("--mode", choices=("proj", "pinv"), default="proj")
    a.add_argument("--weights", choices=("basic", "max_re", "in_phase"), default="basic")
    a.add_argument("--regularization", type=float, default=0.0)
    a.add_argument("--out")
    a.set_defaults(func=cmd_decoder_analytic)
    d = decoder.add_parser("opt")
    d.add_argument("--layout", required=True)
    d.add_argument("--format", required=True, help="ambi:L or swf:FAMILY:LEVEL")
    d.add_argument("--preset", default="smooth")
    d.add_argument("--band", choices=("lf", "hf", "both"), default="hf")
    d.add_argument("--out", required=True)
    d.add_argument("--filters", help="filter bank directory for swf formats")
    d.add_argument("--mesh-levels", type=int)
    d.add_argument("--no-pairing", action="store_true", help="disable left/right row tying")
    d.set_defaults(func=cmd_decoder_opt)

    evalp = sub.add_parser("eval").add_subparsers(dest="action", required=True, parser_class=_Parser)
    s = evalp.add_parser("sweep")
    s.add_argument("--decoder")
    s.add_argument("--layout")
    s.add_argument("--format")
    s.add_argument("--filters")
    s.add_argument("--mesh-levels", type=int)
    s.add_argument("--plane", choices=("horizontal", "vertical"))
    s.add_argument("--n", type=int)
    s.add_argument("--out")
    s.add_argument("--summary")
    s.set_defaults(func=cmd_eval_sweep)
    c = evalp.add_parser("crosstalk")
    c.add_argument("--decoder", required=True)
    c.add_argument("--layout")
    c.add_argument("--filters")
    c.add_argument("--out")
    c.set_defaults(func=cmd_eval_crosstalk)

    ap = sub.add_parser("apply")
    ap.add_argument("--matrix", required=True)
    ap.add_argument("--in", dest="input", required=True)
    ap.add_argument("--out", dest="output", required=True)
    ap.set_defaults(func=cmd_apply)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = load_config(args.config, args.seed)
        args.func(args, cfg)
    except (InputError, ConfigError, FileNotFoundError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
