"""Command-line entry point: ``sfwmarray <subcommand> [options]``.

Grids and sweeps are written as CSV (or JSON with ``--format json``) to stdout,
or to files under ``--out`` when given. Summaries go to stderr.
"""
from __future__ import annotations

import argparse
import contextlib
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .array import ArraySpec, ModalEnvelope, default_z_grid, envelope_of_guide, first_zero_after_peak, propagate
from .coupler import anti_crossing_sweep, gap_for_coupling_length, refine_anti_crossing
from .errors import ModeCutoff, SfwmError, ValidationError
from .jsa import PumpSpec, build_jsa
from .materials import MaterialModel
from .recipe import (
    default_bandwidth_bracket,
    fit_design_dispersion,
    optimize_pump_bandwidth,
    purity_objective,
    run_recipe,
)
from .schmidt import schmidt_decompose
from .slab import Layer, SlabStack, film_index, find_guided_modes


def _emit_table(args, name, header, rows):
    rows = list(rows)
    if args.format == "json":
        doc = {"columns": list(header), "rows": [list(r) for r in rows]}
        _emit_doc(args, name, doc)
        return
    if args.out:
        path = Path(args.out) / f"{name}.csv"
        io.write_table_csv(header, rows, path)
        print(f"wrote {path}", file=sys.stderr)
    else:
        sys.stdout.write(",".join(header) + "\n")
        for r in rows:
            sys.stdout.write(",".join(io.format_value(x) for x in r) + "\n")


def _emit_doc(args, name, doc):
    if args.out:
        path = Path(args.out) / f"{name}.json"
        io.write_json(doc, path)
        print(f"wrote {path}", file=sys.stderr)
    else:
        sys.stdout.write(io.dumps_json(doc))


def _load(args):
    cfg = io.parse_config(args.config) if args.config else io.parse_config(io.default_config_path())
    lib = io.materials_for(cfg, args.materials)
    return cfg, lib


def cmd_modes(args):
    cfg, lib = _load(args)
    m, g = cfg.materials, cfg.geometry
    lam = args.wavelength or cfg.coupler.wavelength
    width = args.width or g.width_main
    n_film = film_index(g.height, lib[m.core], lib[m.substrate], lib[m.top], lam, 0, g.polarization)
    lateral = lib[m.lateral] if m.lateral else lib[m.substrate]
    stack = SlabStack(
        (Layer(math.inf, lateral), Layer(width, MaterialModel.constant(n_film, (1e-3, 1e3))), Layer(math.inf, lateral)),
        "TM" if g.polarization == "TE" else "TE",
    )
    modes = find_guided_modes(stack, lam)
    if not modes:
        raise ModeCutoff(f"no guided horizontal mode at width {width} um")
    print(f"film index {n_film:.10f} at {lam} um, width {width} um: {len(modes)} mode(s)", file=sys.stderr)
    _emit_table(args, "modes", ("order", "effective_index", "beta"),
                ((md.order, md.effective_index, md.beta) for md in modes))


def cmd_coupler_sweep(args):
    cfg, lib = _load(args)
    spec = io.coupler_spec(cfg, lib)
    if args.gap:
        spec = replace(spec, gap=args.gap)
    pts = anti_crossing_sweep(spec, cfg.coupler.width_sweep, args.steps or cfg.coupler.sweep_steps)
    for p in pts:
        if not p.ok:
            print(f"width {p.width_aux:.6g}: {p.error}", file=sys.stderr)
    _emit_table(args, "coupler_sweep", ("width_aux", "n_eff_even", "n_eff_odd", "splitting"),
                ((p.width_aux, p.n_even, p.n_odd, p.splitting) for p in pts))


def cmd_gap_solve(args):
    cfg, lib = _load(args)
    spec = io.coupler_spec(cfg, lib)
    if args.width_aux:
        spec = replace(spec, width_aux=args.width_aux)
    else:
        pts = anti_crossing_sweep(spec, cfg.coupler.width_sweep, cfg.coupler.sweep_steps)
        spec = replace(spec, width_aux=refine_anti_crossing(spec, pts).width_aux)
    target = args.target or cfg.coupler.target_coupling_length
    sol = gap_for_coupling_length(spec, target, cfg.coupler.gap_bracket)
    print(f"width_aux = {spec.width_aux:.6f} um")
    print(f"gap = {sol.gap:.6f} um")
    print(f"achieved L_c = {sol.coupling_length:.6f} um (C = {sol.coupling:.6e} rad/um)")


def _array_spec(cfg, args, length=None):
    a = cfg.array
    if not a.excitation:
        raise ValidationError(["array.excitation or array.excited_guide: required"])
    c = args.coupling if getattr(args, "coupling", None) else a.coupling
    if c is None:
        c = math.pi / cfg.coupler.target_coupling_length
    if length is None:
        length = getattr(args, "length", None) or a.length
    if length is None:
        probe = ArraySpec(a.n_guides, c, 4 * math.pi / max(c, 1e-300), a.excitation)
        length = first_zero_after_peak(envelope_of_guide(propagate(probe), a.guide), probe.length)
    return ArraySpec(a.n_guides, c, length, a.excitation)


def cmd_diffraction(args):
    cfg, _ = _load(args)
    spec = _array_spec(cfg, args)
    env = propagate(spec, default_z_grid(spec.length, args.samples))
    header = ("z",) + tuple(f"abs_A{n}_sq" for n in range(spec.n_guides))
    power = np.abs(env.amplitudes) ** 2
    _emit_table(args, "diffraction", header, ((z,) + tuple(power[:, j]) for j, z in enumerate(env.z)))


def _source(cfg, lib, args):
    channels = fit_design_dispersion(io.nominal_dispersion(cfg, lib), cfg.dispersion.window_fraction)
    spec = _array_spec(cfg, args)
    apod = envelope_of_guide(propagate(spec), cfg.array.guide)
    env = ModalEnvelope.constant(1.0, spec.length) if args.envelope == "constant" else apod
    p = cfg.pump
    bw = args.bandwidth or p.bandwidth
    pump = PumpSpec(p.main_wavelength, bw or 1e-3, p.aux_wavelength, p.shape)
    if bw is None:
        # same protocol as the design run: optimize on the apodized source
        bracket = p.bandwidth_bracket or default_bandwidth_bracket(channels, spec.length)
        bw = optimize_pump_bandwidth(purity_objective(pump, channels, apod, cfg.grid, cfg.method), bracket).bandwidth
        print(f"optimized bandwidth {bw:.6e} rad/fs", file=sys.stderr)
        pump = pump.with_bandwidth(bw)
    method = args.method or cfg.method
    return build_jsa(pump, channels, env, cfg.grid, method)


def cmd_jsa(args):
    cfg, lib = _load(args)
    jsa = _source(cfg, lib, args)
    if args.format == "json":
        _emit_doc(args, "jsa", io.jsa_document(jsa))
    else:
        _emit_table(args, "jsa", io.GRID_HEADER, io.grid_rows(jsa))


def cmd_purity(args):
    cfg, lib = _load(args)
    jsa = _source(cfg, lib, args)
    res = schmidt_decompose(jsa, n_modes=max(args.modes or 0, 8))
    top = res.coefficients[:8]
    if args.format == "json":
        _emit_doc(args, "purity", {"purity": res.purity, "schmidt_number": res.schmidt_number,
                                   "coefficients": top})
    else:
        print(f"purity = {res.purity:.10f}")
        print(f"schmidt_number = {res.schmidt_number:.10f}")
        print("q_k = " + " ".join(f"{q:.6e}" for q in top))
    if args.modes:
        k = min(args.modes, res.signal_modes.shape[0])
        for name, axis, modes in (("signal", jsa.signal_axis, res.signal_modes), ("idler", jsa.idler_axis,
                                                                                 res.idler_modes)):
            header = ("omega",) + tuple(f"{p}_{j}" for j in range(k) for p in ("re", "im"))
            rows = ((w,) + tuple(x for j in range(k) for x in (modes[j, i].real, modes[j, i].imag))
                    for i, w in enumerate(axis))
            path = Path(args.out or ".") / f"schmidt_{name}_modes.csv"
            io.write_table_csv(header, rows, path)
            print(f"wrote {path}", file=sys.stderr)


def cmd_design(args):
    cfg, lib = _load(args)
    rep = run_recipe(io.recipe_inputs(cfg, lib))
    out = Path(args.out or cfg.output.directory)
    path = out / "design_report.json"
    io.write_report_json(rep, path)
    lines = [f"report written to {path}"]
    for key in ("gvm_residual", "phasematch_point", "aux_width", "gap", "achieved_Lc", "device_length",
                "optimal_bandwidth", "baseline_purity", "apodized_purity", "baseline_sidelobe",
                "apodized_sidelobe"):
        lines.append(f"  {key:18s} {getattr(rep, key)}")
    for e in rep.errors:
        lines.append(f"  step {e['step']} ({e['name']}) failed: {e['error']}: {e['message']}")
    print("\n".join(lines))
    return 0 if rep.ok else 1


def build_parser() -> argparse.ArgumentParser:
    def global_flags(defaults):
        g = argparse.ArgumentParser(add_help=False)

        def d(v):
            return v if defaults else argparse.SUPPRESS

        g.add_argument("--config", default=d(None),
                       help="run configuration (TOML); default is the packaged reference design")
        g.add_argument("--materials", default=d(None), help="material library overriding the config's")
        g.add_argument("--format", choices=("csv", "json"), default=d("csv"))
        g.add_argument("--out", default=d(None), help="output directory (default: stdout)")
        g.add_argument("--threads", type=int, default=d(0), help="cap on BLAS threads, 0 = library default")
        return g

    # global flags are accepted before or after the subcommand
    common = global_flags(False)
    parser = argparse.ArgumentParser(prog="sfwmarray", description=__doc__.splitlines()[0],
                                     parents=[global_flags(True)])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("modes", parents=[common], help="guided modes of the main strip")
    p.add_argument("--wavelength", type=float)
    p.add_argument("--width", type=float)
    p.set_defaults(func=cmd_modes)

    p = sub.add_parser("coupler-sweep", parents=[common], help="supermodes versus aux width")
    p.add_argument("--gap", type=float)
    p.add_argument("--steps", type=int)
    p.set_defaults(func=cmd_coupler_sweep)

    p = sub.add_parser("gap-solve", parents=[common], help="gap for a target coupling length")
    p.add_argument("--target", type=float, help="target L_c in um")
    p.add_argument("--width-aux", type=float, help="skip the anti-crossing search and use this width")
    p.set_defaults(func=cmd_gap_solve)

    def array_opts(p):
        p.add_argument("--coupling", type=float, help="rad/um; default from config or pi / target L_c")
        p.add_argument("--length", type=float, help="um; default from config or first envelope zero")

    p = sub.add_parser("diffraction", parents=[common], help="guide powers along the array")
    array_opts(p)
    p.add_argument("--samples", type=int, default=2048)
    p.set_defaults(func=cmd_diffraction)

    for name, func, helptext in (("jsa", cmd_jsa, "joint spectral amplitude grid"),
                                 ("purity", cmd_purity, "Schmidt purity of the source")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        array_opts(p)
        p.add_argument("--method", choices=("analytic", "quadrature"))
        p.add_argument("--envelope", choices=("guide", "constant"), default="guide")
        p.add_argument("--bandwidth", type=float, help="rad/fs; default from config or optimized")
        if name == "purity":
            p.add_argument("--modes", type=int, default=0, help="write the first k Schmidt modes to CSV")
        p.set_defaults(func=func)

    p = sub.add_parser("design", parents=[common], help="run the full design recipe")
    p.set_defaults(func=cmd_design)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    limit = contextlib.nullcontext()
    if args.threads > 0:
        from threadpoolctl import threadpool_limits

        limit = threadpool_limits(args.threads)
    try:
        with limit:
            return args.func(args) or 0
    except ValidationError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return 2
    except SfwmError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
