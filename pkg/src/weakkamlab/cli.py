"""Command-line front end.

    weakkamlab <command> [model options] [--N N] [--h H] [--out PREFIX] [--json] [--plot]

The model options are ``--family pendulum|mechanical`` with ``--P``, or
``--model FILE``.  ``--set key=value`` overrides individual model-file
entries (for example ``--set V.sin.2=0.1``).

Exit status:
    0  success
    1  any other failure (method disagreement, non-convergence, ...)
    2  expected negative: HypothesisNotSatisfied or BoundaryCase
    3  verification failure: VerificationFailed or BlendMarginFailure
    4  usage or configuration error

Artifacts are written under ``PREFIX`` when ``--out`` is given: one CSV
table, a JSON report when ``--json`` is set (otherwise JSON goes to stdout
only if requested), and a PNG of the table with ``--plot``.  Every JSON
report embeds the fully resolved configuration.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from . import io
from .critical import alpha as alpha_both
from .critical import alpha_branch, alpha_lo
from .errors import (BlendMarginFailure, BoundaryCase, ConfigError, HypothesisNotSatisfied, VerificationFailed,
                     WeakKamError)
from .grid import DEFAULT_N, check_resolution
from .model import KINDS, model_entries, model_from_mapping, model_to_text
from .weakkam import DEFAULT_H

EXIT_OK, EXIT_OTHER, EXIT_NEGATIVE, EXIT_VERIFY, EXIT_USAGE = 0, 1, 2, 3, 4

COMMANDS = ("alpha", "solve", "subsolution", "aubry", "analyze", "curve", "smooth", "verify")


class UsageError(ConfigError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(p):
    g = p.add_argument_group("model")
    g.add_argument("--family", choices=("pendulum", "mechanical"))
    g.add_argument("--P", type=float, default=None, help="cohomology shift (pendulum)")
    g.add_argument("--model", type=Path, help="model file of key=value lines")
    g.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a model entry")
    p.add_argument("--N", type=int, default=DEFAULT_N, help="grid size, a power of two >= 16")
    p.add_argument("--h", type=float, default=DEFAULT_H, help="Lax-Oleinik time step")
    p.add_argument("--out", type=Path, help="output prefix for CSV/JSON/PNG artifacts")
    p.add_argument("--json", action="store_true", help="write PREFIX.json (stdout without --out)")
    p.add_argument("--plot", action="store_true", help="write PREFIX.png next to the CSV")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="weakkamlab", description="Critical values and sub-solutions of 1-d Hamiltonians.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("alpha", help="critical value")
    _common(p)
    p.add_argument("--method", choices=("both", "branch", "lo"), default="both")
    p.add_argument("--max-iter", type=int, default=2000, help="Lax-Oleinik budget for the drift method")

    p = sub.add_parser("solve", help="weak KAM solution by Lax-Oleinik iteration")
    _common(p)
    p.add_argument("--level", type=float, help="level c (default: the critical value)")
    p.add_argument("--tol", type=float, default=1e-11)
    p.add_argument("--max-iter", type=int, default=20000)

    p = sub.add_parser("subsolution", help="max-margin sub-solution at the critical level")
    _common(p)
    p.add_argument("--level", type=float)
    p.add_argument("--mollify", type=float, metavar="EPS", help="also mollify with kernel width EPS")

    p = sub.add_parser("aubry", help="projected Aubry set and its classification")
    _common(p)

    p = sub.add_parser("analyze", help="fixed points, or a monodromy matrix from a file")
    _common(p)
    p.add_argument("--monodromy", type=Path, help="matrix file: dimension line, rows, optional Y and dH")
    p.add_argument("--layout", choices=("interleaved", "split"), default="interleaved")
    p.add_argument("--spectral-tol", type=float, default=1e-8)

    p = sub.add_parser("curve", help="backward calibrated curve of the weak KAM solution")
    _common(p)
    p.add_argument("--x0", type=float, default=0.25)
    p.add_argument("--T", type=float, default=2.0)

    p = sub.add_parser("smooth", help="smooth critical sub-solution")
    _common(p)
    p.add_argument("--radii", type=float, nargs=2, default=(0.05, 0.12), metavar=("R_IN", "R_OUT"))
    p.add_argument("--width", type=float, default=0.01, help="sharp potential width")
    p.add_argument("--eps", type=float, default=0.005, help="mollifier width")
    p.add_argument("--blend", choices=("slope", "value"), default="slope")
    p.add_argument("--anchoring", choices=("maxmin", "midpoint"), default="maxmin")
    p.add_argument("--no-refine", action="store_true", help="skip the 2N smoothness run")

    p = sub.add_parser("verify", help="check a field from CSV as a sub-solution")
    _common(p)
    p.add_argument("--field", type=Path, required=True)
    p.add_argument("--column", help="value column (default: second column)")
    p.add_argument("--level", type=float, required=True)
    p.add_argument("--verify-tol", type=float, default=1e-6)
    return parser


def resolve_model(args):
    entries = {}
    if args.model is not None and args.family is not None:
        raise UsageError("give either --model or --family, not both")
    if args.model is not None:
        try:
            entries = model_entries(Path(args.model).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read model file: {exc}") from None
    elif args.family == "pendulum":
        entries = {"kind": "pendulum"}
    elif args.family == "mechanical":
        entries = {"kind": "mechanical"}
        if not any(s.split("=", 1)[0].strip().startswith("V.") for s in args.set):
            entries["V.cos.1"] = "1.0"
    elif not args.set:
        raise UsageError("no model: use --family or --model")
    if args.P is not None:
        entries["P"] = repr(args.P)
    for item in args.set:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = (s.strip() for s in item.split("=", 1))
        entries[k] = v
    if entries.get("kind", "custom-trig") not in KINDS:
        raise ConfigError(f"unknown model kind {entries.get('kind')!r}")
    return model_from_mapping(entries)


def resolved_config(args, model) -> dict:
    cfg = {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items()) if k != "verbose"}
    cfg["resolved_model"] = model.describe()
    cfg["model_text"] = model_to_text(model)
    return cfg


# --- commands ---------------------------------------------------------------


def _level(args, model):
    if getattr(args, "level", None) is not None:
        return float(args.level), {"level": float(args.level), "source": "given"}
    est = alpha_branch(model, args.N)
    return est.value, {"level": est.value, "source": "alpha_branch", "error": est.error}


def cmd_alpha(args, model):
    if args.method == "branch":
        est = alpha_branch(model, args.N)
    elif args.method == "lo":
        est = alpha_lo(model, args.N, args.h, max_iter=args.max_iter)
    else:
        est = alpha_both(model, args.N, args.h, lo_max_iter=args.max_iter)
    report = {"alpha": est.value, "method": est.method, "error": est.error, "bracket": list(est.bracket),
              "diagnostics": est.diagnostics}
    return est.line(), None, report


def cmd_solve(args, model):
    from .weakkam import weak_kam_solve
    c, info = _level(args, model)
    sol = weak_kam_solve(model, c, args.N, args.h, tol=args.tol, max_iter=args.max_iter)
    line = f"solve level={c:.6f} iterations={sol.iterations} residual={sol.residual:.3g} drift={sol.drift:.3g}"
    return line, io.solution_table(sol), {"level": info, "solution": sol.summary()}


def cmd_subsolution(args, model):
    from .subsol import mollify_subsolution, strict_subsolution
    c, info = _level(args, model)
    cert = strict_subsolution(model, c, args.N)
    report = {"level": info, "certificate": cert.summary()}
    if args.mollify is not None:
        cert = mollify_subsolution(model, cert, args.mollify, c)
        report["mollified"] = cert.summary()
    line = f"subsolution level={c:.6f} min_margin={cert.min_margin:.3g} passed={cert.passed} boundary={cert.boundary}"
    return line, io.certificate_table(cert), report


def _aubry_report(model, N):
    from .aubry import aubry_estimate, classify_aubry
    a = alpha_branch(model, N).value
    return classify_aubry(model, aubry_estimate(model, a, N))


def cmd_aubry(args, model):
    rep = _aubry_report(model, args.N)
    kinds = rep.circle_class or ",".join(pt.cls for pt in rep.points)
    pts = " ".join(f"{pt.x:.6f}" for pt in rep.points) if rep.mode == "finite-points" else "circle"
    line = f"aubry mode={rep.mode} points={pts} class={kinds} hypothesis_satisfied={rep.hypothesis_satisfied}"
    table = None
    if rep.section is not None:
        table = {"x": rep.section.x, "X": rep.section.values}
    return line, table, rep.summary()


def cmd_analyze(args, model):
    from .hyper import analyze_fixed_point, analyze_monodromy, find_fixed_points, read_monodromy
    if args.monodromy is not None:
        M, Y, dH = read_monodromy(args.monodromy)
        mono = analyze_monodromy(M, Y, dH, spectral_tol=args.spectral_tol, layout=args.layout)
        line = f"monodromy size={mono.size} multiplicity_one={mono.multiplicity_one} hyperbolic={mono.hyperbolic}"
        return line, None, {"monodromy": mono.summary()}
    fps = find_fixed_points(model)
    out = [analyze_fixed_point(model, f, args.spectral_tol).summary() for f in fps]
    line = f"fixed_points count={len(out)} hyperbolic={sum(1 for o in out if o['hyperbolic'])}"
    return line, None, {"fixed_points": out, "continuum": bool(getattr(fps, "continuum", False))}


def cmd_curve(args, model):
    from .weakkam import backward_curve, calibration_defect, weak_kam_solve
    c, info = _level(args, model)
    sol = weak_kam_solve(model, c, args.N, args.h)
    curve = backward_curve(model, sol, args.x0, args.T)
    defect = calibration_defect(model, sol.u, curve, c)
    line = f"curve x0={args.x0:g} T={args.T:g} samples={curve.t.size} calibration_defect={defect:.3g}"
    return line, io.curve_table(curve), {"level": info, "solution": sol.summary(), "calibration_defect": defect}


def cmd_smooth(args, model):
    from .smooth import smooth_subsolution
    res = smooth_subsolution(model, args.N, args.h, radii=tuple(args.radii), width=args.width, eps=args.eps,
                             blend=args.blend, anchoring=args.anchoring, refine=not args.no_refine)
    report = res.summary()
    if not res.passed:
        raise _Failed(VerificationFailed(f"smooth sub-solution failed: min eta {res.min_eta:.3e}, "
                                         f"floor {res.strict_floor:.3e}, smoothness {res.smoothness.get('passed')}"),
                      io.smooth_table(res), report)
    line = (f"smooth alpha={res.alpha:.6f} min_eta={res.min_eta:.3g} strict_floor={res.strict_floor:.3g} "
            f"smoothness_ratio={res.smoothness.get('ratio4', math.nan):.4g} passed={res.passed}")
    return line, io.smooth_table(res), report


def cmd_verify(args, model):
    from .subsol import verify_subsolution
    u = io.read_field(args.field, args.column)
    check_resolution(u.N)
    cert = verify_subsolution(model, u, args.level, verify_tol=args.verify_tol, strict=False)
    report = {"certificate": cert.summary(), "field": str(args.field)}
    if not cert.passed:
        raise _Failed(VerificationFailed(f"min margin {cert.min_margin:.3e} < -{args.verify_tol:g}"),
                      io.certificate_table(cert), report)
    line = f"verify level={args.level:g} min_margin={cert.min_margin:.3g} passed=True"
    return line, io.certificate_table(cert), report


class _Failed(Exception):
    """Carries artifacts of a failed run so they are still written."""

    def __init__(self, error, table, report):
        super().__init__(str(error))
        self.error, self.table, self.report = error, table, report


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


def exit_status(exc: BaseException) -> int:
    if isinstance(exc, (HypothesisNotSatisfied, BoundaryCase)):
        return EXIT_NEGATIVE
    if isinstance(exc, (VerificationFailed, BlendMarginFailure)):
        return EXIT_VERIFY
    if isinstance(exc, ConfigError):
        return EXIT_USAGE
    return EXIT_OTHER


def _emit(args, cfg, table, report, status, error=None):
    full = {"config": cfg, "command": args.command, "status": status, "report": report}
    if error is not None:
        full["error"] = {"type": type(error).__name__, "message": str(error)}
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        if table is not None:
            csv_path = Path(f"{args.out}.csv")
            io.write_csv(csv_path, table)
            if args.plot:
                from .plots import plot_table
                plot_table(table, Path(f"{args.out}.png"), title=args.command)
        if args.json:
            io.write_json(Path(f"{args.out}.json"), full)
    elif args.json:
        sys.stdout.write(io.dumps(full))


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.plot and args.out is None:
            raise UsageError("--plot needs --out")
        check_resolution(args.N)
        if not args.h > 0:
            raise UsageError("--h must be positive")
        model = resolve_model(args)
        cfg = resolved_config(args, model)
    except ConfigError as exc:
        print(f"weakkamlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        line, table, report = HANDLERS[args.command](args, model)
    except _Failed as fail:
        status = exit_status(fail.error)
        print(f"weakkamlab: {type(fail.error).__name__}: {fail.error}", file=sys.stderr)
        _emit(args, cfg, fail.table, fail.report, status, fail.error)
        return status
    except WeakKamError as exc:
        status = exit_status(exc)
        print(f"weakkamlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        _emit(args, cfg, None, {}, status, exc)
        return status
    print(line)
    _emit(args, cfg, table, report, EXIT_OK)
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
