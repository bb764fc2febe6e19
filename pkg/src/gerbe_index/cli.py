"""Command-line front end.

Subcommands: validate, ddclass, chern, index-analytic, index-topological,
verify, report.  Scenario arguments accept either a file path or a bundled
fixture name (monopole, bott-toeplitz, bott-toeplitz-twisted,
suspended-rp2-gerbe, thom-rr-line).

Exit codes: 0 pass, 1 verification failure, 2 input error, 3 internal error.
"""

from __future__ import annotations

import argparse
import os
import sys

from .errors import GerbeIndexError, ScenarioError, UnsupportedVersion
from .runner import (RunOptions, build_atlas, build_family, run_ddclass,
                     run_verify, chern_integrals, structural_validate)
from .scenario import resolve_scenario

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INPUT = 2
EXIT_INTERNAL = 3


def _threads(args) -> int:
    if getattr(args, "threads", None):
        return args.threads
    env = os.environ.get("GERBE_INDEX_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _options(args) -> RunOptions:
    return RunOptions(resolution=getattr(args, "resolution", None),
                      truncation=getattr(args, "truncation", None),
                      tolerance=getattr(args, "tolerance", None),
                      threads=_threads(args),
                      n_theta=getattr(args, "theta_grid", None))


def _emit_report(report, args) -> int:
    text = report.to_machine_text()
    out = getattr(args, "report", None)
    if out:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)
        print("report written to %s" % out)
    else:
        sys.stdout.write(text)
    print("result: %s" % ("pass" if report.passed else "FAIL"))
    return EXIT_PASS if report.passed else EXIT_FAIL


def cmd_validate(args) -> int:
    scn = resolve_scenario(args.scenario)
    report = structural_validate(scn, _options(args))
    return _emit_report(report, args)


def cmd_ddclass(args) -> int:
    scn = resolve_scenario(args.scenario)
    cls, desc = run_ddclass(scn, _options(args))
    print("degree-3 classification: %s" % desc)
    if not cls.is_zero:
        print("torsion residues: %s (factors %s)"
              % (list(cls.residues), list(cls.torsion)))
        if any(cls.free):
            print("free coordinates: %s" % (list(cls.free),))
    return EXIT_PASS


def cmd_chern(args) -> int:
    scn = resolve_scenario(args.scenario)
    vals = chern_integrals(scn, _options(args))
    for k in sorted(vals):
        print("%s integral = %r" % (k, vals[k]))
    return EXIT_PASS


def cmd_index(args, side: str) -> int:
    from .family import stabilize
    from .verify import run_pipelines
    scn = resolve_scenario(args.scenario)
    opts = _options(args)
    atlas = build_atlas(scn, opts.resolution)
    F = build_family(scn, atlas, opts.truncation)
    if opts.n_theta:
        F.n_theta = opts.n_theta
    margin = scn.get("verification", "stabilizer-margin", default=1e-6,
                     cast=float)
    res = None
    if side == "analytic":
        stab = stabilize(F, sv_min=margin)
        res = run_pipelines(F, stab=stab, n_theta=F.n_theta)
        print("stabilizer count = %d" % res.index_bundle.stabilizer.count)
        print("kernel rank = %d" % res.index_bundle.kernel_rank)
        print("degree-0 = %r" % res.analytic_deg0)
        print("degree-2 integral = %r" % res.analytic_deg2)
        print("det-line degree-2 integral = %r" % res.det_line)
    else:
        from .chernweil import average_scalar, integrate
        from .verify import symbol_class, topological_index_chern
        S = symbol_class(F, F.n_theta)
        form = topological_index_chern(S)
        d0, dev = average_scalar(form, atlas, 0)
        print("degree-0 = %r (constancy deviation %r)" % (d0.real, dev))
        print("degree-2 integral = %r" % integrate(form, atlas).real)
    return EXIT_PASS


def cmd_verify(args) -> int:
    scn = resolve_scenario(args.scenario)
    report = run_verify(scn, _options(args))
    return _emit_report(report, args)


def cmd_report(args) -> int:
    from .report import parse_machine_report, render_table, render_figures
    try:
        with open(args.path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioError("cannot read report: %s" % exc,
                            module="cli", operation="report")
    rep = parse_machine_report(text)
    print(render_table(rep))
    if not args.no_figures:
        out_dir = args.figures_dir or os.path.dirname(os.path.abspath(args.path))
        stem = os.path.splitext(os.path.basename(args.path))[0]
        for p in render_figures(rep, out_dir, stem):
            print("figure written to %s" % p)
    return EXIT_PASS if rep.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="gerbe-index",
        description="Torsion twists, projective bundle data, and family "
                    "index verification at desk scale.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, scenario=True):
        if scenario:
            p.add_argument("scenario",
                           help="scenario file path or bundled fixture name")
        p.add_argument("--resolution", type=int, default=None,
                       help="override the base grid resolution")
        p.add_argument("--truncation", type=int, default=None,
                       help="override the fiber truncation")
        p.add_argument("--tolerance", type=float, default=None,
                       help="override the verification tolerance")
        p.add_argument("--theta-grid", type=int, default=None,
                       help="override the fiber quadrature count")
        p.add_argument("--threads", type=int, default=None,
                       help="worker count (default: GERBE_INDEX_THREADS or "
                            "available parallelism); recorded in reports")
        p.add_argument("--report", default=None,
                       help="write the machine-readable report to this path")

    common(sub.add_parser("validate", help="structural checks only"))
    common(sub.add_parser("ddclass",
                          help="degree-3 classification of the twist"))
    common(sub.add_parser("chern", help="character integrals of the bundle"))
    common(sub.add_parser("index-analytic", help="analytic index pipeline"))
    common(sub.add_parser("index-topological",
                          help="topological index pipeline"))
    common(sub.add_parser("verify", help="full dual-pipeline verification"))

    pr = sub.add_parser("report", help="render a stored machine report")
    pr.add_argument("path", help="machine report file")
    pr.add_argument("--figures-dir", default=None,
                    help="directory for figures (default: next to the report)")
    pr.add_argument("--no-figures", action="store_true",
                    help="table only, skip figure rendering")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "validate": cmd_validate,
        "ddclass": cmd_ddclass,
        "chern": cmd_chern,
        "index-analytic": lambda a: cmd_index(a, "analytic"),
        "index-topological": lambda a: cmd_index(a, "topological"),
        "verify": cmd_verify,
        "report": cmd_report,
    }
    try:
        return handlers[args.command](args)
    except (ScenarioError, UnsupportedVersion) as exc:
        print("input error: %s" % exc, file=sys.stderr)
        return EXIT_INPUT
    except GerbeIndexError as exc:
        print("verification error: %s" % exc, file=sys.stderr)
        return EXIT_FAIL
    except Exception as exc:  # pragma: no cover - defensive
        print("internal error: %r" % exc, file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
