"""Command line front end: ``tscontrol analyze|simulate|realize|stability``.

Every command reads one document (see :mod:`tscontrol.documents`), writes
a schema-versioned JSON report to ``-o`` (stdout by default) and, with
``--text``, a plain text mirror of the same report. ``simulate`` can also
write the trajectory as CSV.

Exit codes: 0 completed, 2 invalid input, 3 a mathematical precondition
failed (nonregressive time scale where one is required, singular Gramian
when steering or reconstructing, transfer function not strictly proper).
When a precondition fails the report is still written, with the affected
sections marked as skipped.
"""

import argparse
import csv
import io
import json
import math
import os
import sys as _sys
from fractions import Fraction

import numpy as np

from . import __version__
from .documents import DocumentError, SystemDocument, TransferDocument, load_document
from .dynamics import NonRegressiveError, check_regressive, simulate
from .gramian import (NotControllableError, NotObservableError, PD_RTOL, controllability_gramian,
                      min_energy_input, observability_gramian, reconstruct_initial_state)
from .ranktests import (controllable_decomposition, kalman_controllability, kalman_observability,
                        observable_decomposition, pbh_controllability, pbh_observability,
                        tv_controllability_rank, tv_observability_rank)
from .realization import (NotStrictlyProperError, companion_realization, is_minimal,
                          is_minimal_tv, transfer_function)
from .stability import (DELTA, bibo_ti, bibo_tv_integral, exp_stable_integral,
                        exp_stable_spectrum)
from .timescale import TimeScaleError

REPORT_SCHEMA = "tscontrol.report/1"
EXIT_OK, EXIT_INVALID, EXIT_PRECONDITION = 0, 2, 3
SIG_DIGITS = 10
NOISE_DIGITS = 2


class PreconditionError(ArithmeticError):
    pass


# ---------------------------------------------------------------- report values

def _round(x, digits=SIG_DIGITS):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    v = float(f"{x:.{digits}g}")
    return 0.0 if v == 0 else v


def clean(obj):
    """JSON-ready copy: floats rounded, exact rationals as strings."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [clean(v) for v in obj.tolist()] if obj.ndim else clean(obj.item())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _round(obj.real), "im": _round(obj.imag)}
    if isinstance(obj, (float, np.floating)):
        return _round(obj)
    return obj


def _noise(x):
    """Roundoff-level quantity: two significant digits keep reports stable."""
    return _round(x, NOISE_DIGITS)


def _matrix_out(M):
    arr = np.asarray(M, dtype=object)
    if arr.size and all(isinstance(x, (int, Fraction)) for x in arr.flat):
        return [[str(Fraction(x)) for x in row] for row in arr.tolist()]
    return np.asarray(M, dtype=float)


def render_text(report):
    """Line-per-value text mirror of a report."""
    lines = []

    def walk(node, path):
        if isinstance(node, dict):
            if not node:
                lines.append(f"{path}: {{}}")
            for k, v in node.items():
                walk(v, f"{path}.{k}" if path else k)
        elif isinstance(node, list) and any(isinstance(v, dict) for v in node) and not all(
                isinstance(v, dict) and set(v) == {"re", "im"} for v in node):
            for i, v in enumerate(node):
                walk(v, f"{path}[{i}]")
        else:
            lines.append(f"{path}: {json.dumps(node, separators=(', ', ': '))}")

    walk(report, "")
    return "\n".join(lines) + "\n"


def dump_report(report):
    return json.dumps(report, indent=2) + "\n"


# ---------------------------------------------------------------- sections

def _options(base, args):
    opts = dict(base)
    for key in ("tol", "q"):
        if getattr(args, key, None) is not None:
            opts[key] = getattr(args, key)
    if getattr(args, "delta_margin", None) is not None:
        opts["delta"] = args.delta_margin
    if getattr(args, "horizons", None) is not None:
        opts["horizons"] = args.horizons
    for key in ("t0", "tf"):
        if getattr(args, key, None) is not None:
            opts[key] = getattr(args, key)
    return opts


def _interval(opts, grid):
    t0 = float(Fraction(opts["t0"])) if "t0" in opts else grid.t_min
    tf = float(Fraction(opts["tf"])) if "tf" in opts else grid.t_max
    for name, t in (("t0", t0), ("tf", tf)):
        try:
            grid.index(t)
        except (TimeScaleError, KeyError, ValueError):
            raise DocumentError(f"{t!r} is not a point of the time scale", name) from None
    if tf <= t0:
        raise DocumentError(f"need t0 < tf, got t0={t0!r}, tf={tf!r}", "tf")
    return t0, tf


def _horizons(opts):
    h = opts.get("horizons")
    return None if h is None else np.array([float(Fraction(x)) for x in h])


def _system_section(doc, sys, grid):
    return {
        "name": doc.name,
        "n": sys.n, "m": sys.m, "p": sys.p,
        "time_invariant": sys.time_invariant,
        "exact": sys.exact is not None,
        "float_entries": list(doc.float_entries),
        "timescale": list(doc.timescale),
        "grid": {"nodes": len(grid), "t_min": grid.t_min, "t_max": grid.t_max,
                 "mu_max": grid.mu_max, "discrete": grid.is_discrete},
    }


def _regressivity_section(sys, grid):
    r = check_regressive(sys, grid)
    return r.ok, {
        "ok": r.ok,
        "worst_condition_number": r.worst_condition_number,
        "failing_times": list(r.failing_times[:20]),
        "failing_count": len(r.failing_times),
        "tolerance": r.tolerance,
    }


def _rank_out(v):
    out = {"rank": v.rank, "n": v.n, "passed": v.passed, "exact": v.exact,
           "matrix": _matrix_out(v.matrix)}
    if v.exact:
        out["tolerance"] = "exact"
    else:
        out["tolerance"] = v.tolerance
        out["singular_values"] = v.singular_values
    return out


def _pbh_out(v):
    return {
        "passed": v.passed,
        "eigenvalues": [complex(l) for l in v.eigenvalues],
        "ranks": list(v.ranks),
        "witnesses": [{"eigenvalue": complex(l), "vector": [complex(x) for x in p]}
                      for l, p in v.witnesses],
        "tolerance": v.tolerance,
    }


def _decomposition_out(kalman, fn, A, M, tol):
    if kalman.passed:
        return {"skipped": "full rank; no decomposition needed"}
    if kalman.rank == 0:
        return {"skipped": "rank 0; the whole state space is the complement"}
    d = fn(A, M, rank_tol=tol)
    return {"dim": d.dim, "residual": _noise(d.residual), "tolerance": d.tolerance,
            "certified": d.certified}


def _gramian_out(g):
    return {"interval": list(g.interval), "eigen_min": g.eigen_min, "eigen_max": g.eigen_max,
            "invertible": g.invertible, "tolerance": g.tolerance}


def _tv_rank_out(v):
    return {"status": v.status, "witness": v.witness, "rank": v.rank, "n": v.n, "q": v.q,
            "method": v.method, "candidates_checked": len(v.ranks), "warnings": list(v.warnings)}


def _candidates(grid, t0, tf):
    i0, i1 = grid.index(t0), grid.index(tf)
    return grid.times[i0:i1]


def _duality_sections(sys, grid, opts, regressive):
    t0, tf = _interval(opts, grid)
    tol = opts.get("tol")
    q = opts.get("q")
    skip = {"skipped": "time scale is not regressive for this system"}
    sections = {}
    for kind in ("controllability", "observability"):
        ctrb = kind == "controllability"
        sec = {}
        if sys.time_invariant:
            A = sys.exact["A"] if sys.exact is not None else sys.constant("A")
            M = (sys.exact["B"] if ctrb else sys.exact["C"]) if sys.exact is not None else \
                sys.constant("B" if ctrb else "C")
            kal = (kalman_controllability if ctrb else kalman_observability)(A, M, tol=tol)
            sec["kalman"] = _rank_out(kal)
            sec["pbh"] = _pbh_out((pbh_controllability if ctrb else pbh_observability)(
                sys.constant("A"), sys.constant("B" if ctrb else "C"), tol=tol))
            sec["decomposition"] = _decomposition_out(
                kal, controllable_decomposition if ctrb else observable_decomposition,
                A, M, tol)
        else:
            for key in ("kalman", "pbh", "decomposition"):
                sec[key] = {"skipped": "time-varying system"}
        g = None
        if regressive:
            g = (controllability_gramian if ctrb else observability_gramian)(sys, grid, t0, tf)
            sec["gramian"] = _gramian_out(g)
        else:
            sec["gramian"] = skip
        seq = "k_sequence" if ctrb else "l_sequence"
        try:
            v = (tv_controllability_rank if ctrb else tv_observability_rank)(
                sys, grid, t_candidates=_candidates(grid, t0, tf), q=q, tol=tol,
                gramian_interval=(t0, tf) if regressive and not sys.time_invariant else None)
            sec[seq] = _tv_rank_out(v)
        except (NonRegressiveError, np.linalg.LinAlgError) as exc:
            sec[seq] = {"skipped": str(exc)}
        if ctrb:
            if g is None:
                sec["min_energy"] = {"available": False, "reason": skip["skipped"]}
            elif g.invertible:
                sec["min_energy"] = {"available": True}
            else:
                sec["min_energy"] = {"available": False,
                                     "reason": f"Gramian singular on [{t0!r}, {tf!r}]"}
        sections[kind] = sec
    return sections


def _realization_section(sys, grid, opts, regressive):
    if sys.time_invariant:
        mv = is_minimal(sys, tol=opts.get("tol"))
        out = {"minimal": mv.minimal, "method": mv.method,
               "controllability_rank": mv.controllable.rank,
               "observability_rank": mv.observable.rank}
        if sys.exact is not None:
            G = transfer_function(sys)
            out["transfer_function"] = G.to_text()
            out["poles"] = [complex(z) for z in sorted(G.poles(), key=lambda z: (z.real, z.imag))]
        else:
            out["transfer_function"] = {"skipped": "float entries; exact path skipped"}
        return out
    if not regressive:
        return {"skipped": "time scale is not regressive for this system"}
    t0, tf = _interval(opts, grid)
    mv = is_minimal_tv(sys, grid, t0, tf)
    return {"minimal": mv.minimal, "method": mv.method, "interval": [t0, tf]}


def _bound_out(b):
    return {"verdict": b.verdict, "estimate": b.estimate, "tail_estimate": b.tail_estimate,
            "horizons": b.horizons, "partials": b.partials, "definition": b.definition,
            "note": b.note}


def _query_out(q):
    return {"eigenvalue": complex(q.lam), "verdict": q.verdict, "tail_max": q.tail_max,
            "regressive": q.regressive, "delta": q.delta}


def _stability_section(sys, grid, opts, regressive):
    t0, _ = _interval(opts, grid)
    horizons = _horizons(opts)
    delta = opts.get("delta", DELTA)
    out = {}
    if sys.time_invariant:
        sv = exp_stable_spectrum(sys.constant("A"), grid, horizons, delta, t0)
        out["spectrum"] = {"verdict": sv.verdict, "definition": sv.definition,
                           "eigenvalues": [_query_out(q) for q in sv.queries]}
    if not regressive:
        out["exp_integral"] = out["bibo"] = {
            "skipped": "time scale is not regressive for this system"}
        return out
    out["exp_integral"] = _bound_out(exp_stable_integral(sys, grid, horizons, t0))
    if sys.time_invariant:
        bv = bibo_ti(sys, grid, horizons, delta, t0)
        out["bibo"] = {"verdict": bv.verdict, "integral": _bound_out(bv.integral),
                       "pole_verdict": bv.pole_verdict,
                       "poles": [_query_out(q) for q in bv.pole_queries],
                       "agree": bv.agree, "minimal": bv.minimal, "warnings": list(bv.warnings)}
    else:
        b = bibo_tv_integral(sys, grid, horizons, t0)
        v = {"converged": "stable", "divergent": "unstable"}.get(b.verdict, "inconclusive")
        out["bibo"] = {"verdict": v, "integral": _bound_out(b)}
    return out


def _header(command, path):
    return {"schema": REPORT_SCHEMA, "command": command,
            "provenance": {"generator": f"tscontrol {__version__}",
                           "input": os.path.basename(str(path))}}


def _finish(report, failures):
    report["status"] = "precondition_failed" if failures else "ok"
    report["errors"] = failures
    return clean(report), (EXIT_PRECONDITION if failures else EXIT_OK)


# ---------------------------------------------------------------- commands

def _need_system(doc):
    if not isinstance(doc, SystemDocument):
        raise DocumentError("expected a system document (with A and B)")
    return doc


def cmd_analyze(doc, args, path="<document>"):
    doc = _need_system(doc)
    opts = _options(doc.options, args)
    sys, grid = doc.build()
    report = _header("analyze", path)
    report["system"] = _system_section(doc, sys, grid)
    regressive, report["regressivity"] = _regressivity_section(sys, grid)
    report.update(_duality_sections(sys, grid, opts, regressive))
    report["realization"] = _realization_section(sys, grid, opts, regressive)
    report["stability"] = _stability_section(sys, grid, opts, regressive)
    failures = [] if regressive else ["time scale is not regressive for this system: "
                                      "Gramian and transition sections skipped"]
    return _finish(report, failures)


def cmd_stability(doc, args, path="<document>"):
    report = _header("stability", path)
    if isinstance(doc, TransferDocument):
        grid = doc.grid()
        if grid is None:
            raise DocumentError("stability of a transfer function needs a timescale", "timescale")
        G = _strictly_proper(doc)
        R = companion_realization(G)
        sys = R.to_system()
        opts = _options(doc.options, args)
        report["system"] = {"transfer_function": G.to_text(), "realization_dimension": R.n,
                            "timescale": list(doc.timescale)}
    else:
        opts = _options(doc.options, args)
        sys, grid = doc.build()
        report["system"] = _system_section(doc, sys, grid)
    regressive, report["regressivity"] = _regressivity_section(sys, grid)
    report["stability"] = _stability_section(sys, grid, opts, regressive)
    failures = [] if regressive else ["time scale is not regressive for this system: "
                                      "integral tests skipped"]
    return _finish(report, failures)


def _strictly_proper(doc):
    G = doc.G
    for i, row in enumerate(G.entries):
        for j, e in enumerate(row):
            if not e.is_strictly_proper():
                raise PreconditionError(
                    f"G[{i}][{j}] = {doc.text[i][j]} is not a strictly-proper rational function "
                    f"of z (numerator degree must be below denominator degree)")
    return G


def cmd_realize(doc, args, path="<document>"):
    if not isinstance(doc, TransferDocument):
        raise DocumentError("expected a transfer-function document (with G)")
    report = _header("realize", path)
    report["input"] = {"G": doc.text}
    try:
        G = _strictly_proper(doc)
    except PreconditionError as exc:
        return _finish(report, [str(exc)])
    R = companion_realization(G)
    mv = is_minimal(R)
    back = transfer_function(R)
    report["transfer_function"] = G.to_text()
    report["poles"] = [complex(z) for z in sorted(G.poles(), key=lambda z: (z.real, z.imag))]
    report["realization"] = {"dimension": R.n, "form": R.provenance,
                             "A": _matrix_out(R.A), "B": _matrix_out(R.B), "C": _matrix_out(R.C)}
    report["minimality"] = {"minimal": mv.minimal, "method": mv.method,
                            "controllability_rank": mv.controllable.rank,
                            "observability_rank": mv.observable.rank, "tolerance": "exact"}
    report["round_trip"] = {"exact": back == G, "transfer_function": back.to_text()}
    return _finish(report, [])


def _trajectory_csv(X, Y, U):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    n, p, m = X.values.shape[1], Y.values.shape[1], U.shape[1]
    w.writerow(["t"] + [f"x{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(p)]
               + [f"u{i + 1}" for i in range(m)])
    for t, x, y, u in zip(X.times, X.values, Y.values, U):
        w.writerow([f"{v:.{SIG_DIGITS}g}" for v in (t, *x, *y, *u)])
    return buf.getvalue()


def _input_table(u, times, m):
    """Input samples at the trajectory nodes; the last sample is held."""
    if u is None:
        return np.zeros((len(times), m))
    if callable(u):
        return np.array([np.atleast_1d(u(t)) for t in times], dtype=float)
    out = np.zeros((len(times), m))
    last = np.zeros(m)
    for i, t in enumerate(times):
        k = u.index_of(t)
        if k is not None:
            last = u.values[k]
        out[i] = last
    return out


def cmd_simulate(doc, args, path="<document>"):
    doc = _need_system(doc)
    opts = _options(doc.options, args)
    sys, grid = doc.build()
    t0, tf = _interval(opts, grid)
    report = _header("simulate", path)
    report["system"] = _system_section(doc, sys, grid)
    if doc.x0 is None:
        raise DocumentError("simulate needs an initial state", "x0")
    x0 = np.array([float(Fraction(v)) for v in doc.x0])
    failures = []
    u = doc.input_function(grid)
    sim = {"t0": t0, "tf": tf, "x0": x0, "input": "document" if u is not None else "zero"}

    steer = getattr(args, "steer", None)
    if steer is not None:
        if steer is True:
            if doc.xf is None:
                raise DocumentError("--steer without a target needs xf in the document", "xf")
            xf = np.array([float(Fraction(v)) for v in doc.xf])
        else:
            xf = np.asarray(steer, dtype=float)
            if xf.shape != (sys.n,):
                raise DocumentError(f"target has length {xf.size}, expected {sys.n}", "--steer")
        try:
            u = min_energy_input(sys, grid, t0, tf, x0, xf)
            sim["input"] = "min_energy"
        except (NotControllableError, NonRegressiveError) as exc:
            failures.append(f"steering unavailable: {exc}")
            report["steer"] = {"xf": xf, "skipped": str(exc)}
            u = None

    try:
        X, Y = simulate(sys, grid, x0, u, t0, tf)
    except NonRegressiveError as exc:
        failures.append(str(exc))
        report["simulation"] = sim
        return _finish(report, failures) + (None,)
    U = _input_table(u, X.times, sys.m)
    sim["nodes"] = len(X)
    sim["x_final"] = X.values[-1]
    sim["y_final"] = Y.values[-1]
    report["simulation"] = sim
    if steer is not None and "steer" not in report:
        err = float(np.linalg.norm(X.values[-1] - xf))
        report["steer"] = {"xf": xf, "terminal_error": _noise(err), "samples": len(u)}

    if getattr(args, "reconstruct", False):
        try:
            _, Y0 = simulate(sys, grid, x0, None, t0, tf)
            est = reconstruct_initial_state(sys, grid, Y0, t0, tf)
            report["reconstruct"] = {"x0": x0, "estimate": est,
                                     "error": _noise(np.linalg.norm(est - x0)),
                                     "tolerance": PD_RTOL}
        except (NotObservableError, NonRegressiveError) as exc:
            failures.append(f"reconstruction unavailable: {exc}")
            report["reconstruct"] = {"skipped": str(exc)}
    rep, code = _finish(report, failures)
    return rep, code, _trajectory_csv(X, Y, U)


# ---------------------------------------------------------------- argument parsing

def _float_list(text):
    try:
        vals = [float(Fraction(v)) for v in text.split(",") if v.strip()]
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _positive(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def _time(text):
    try:
        return str(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")


def _steer_arg(text):
    return _float_list(text)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(_sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="tscontrol",
                description="Linear systems analysis on time scales.")
    p.add_argument("--version", action="version", version=f"tscontrol {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("document", help="input document (JSON, or text rows for realize)")
        sp.add_argument("-o", "--output", help="report path (default: stdout)")
        sp.add_argument("--text", help="also write a text mirror of the report here")

    def analysis(sp):
        sp.add_argument("--tol", type=_positive, help="rank tolerance (default: automatic)")
        sp.add_argument("--horizons", type=_float_list,
                        help="comma-separated horizon times for the asymptotic tests")
        sp.add_argument("--delta-margin", type=_positive,
                        help=f"marginal band for region verdicts (default {DELTA})")
        sp.add_argument("--q", type=int, help="highest index in the K_j / L_j rank tests")
        sp.add_argument("--t0", type=_time, help="start of the analysis interval")
        sp.add_argument("--tf", type=_time, help="end of the analysis interval")

    a = sub.add_parser("analyze", help="all analyses of a system document")
    common(a)
    analysis(a)
    s = sub.add_parser("simulate", help="simulate, optionally steering or reconstructing")
    common(s)
    analysis(s)
    s.add_argument("--steer", nargs="?", const=True, type=_steer_arg, metavar="XF",
                   help="steer to XF (comma-separated; default: xf in the document)")
    s.add_argument("--reconstruct", action="store_true",
                   help="recover x0 from the zero-input output")
    s.add_argument("--csv", help="trajectory CSV path")
    r = sub.add_parser("realize", help="companion realization of a transfer function")
    common(r)
    st = sub.add_parser("stability", help="stability verdicts only")
    common(st)
    analysis(st)
    return p


def _write(path, text):
    if path is None or path == "-":
        _sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "q", None) is not None and args.q < 0:
        print("tscontrol: error: --q must be nonnegative", file=_sys.stderr)
        return EXIT_INVALID
    commands = {"analyze": cmd_analyze, "simulate": cmd_simulate,
                "realize": cmd_realize, "stability": cmd_stability}
    try:
        doc = load_document(args.document)
        result = commands[args.command](doc, args, args.document)
    except DocumentError as exc:
        print(f"tscontrol: invalid input: {exc}", file=_sys.stderr)
        return EXIT_INVALID
    except (TimeScaleError, ValueError) as exc:
        print(f"tscontrol: invalid input: {exc}", file=_sys.stderr)
        return EXIT_INVALID
    except (PreconditionError, NotStrictlyProperError) as exc:
        print(f"tscontrol: precondition failed: {exc}", file=_sys.stderr)
        return EXIT_PRECONDITION
    report, code = result[0], result[1]
    _write(args.output, dump_report(report))
    if args.text:
        _write(args.text, render_text(report))
    if args.command == "simulate" and getattr(args, "csv", None) and result[2] is not None:
        _write(args.csv, result[2])
    for err in report.get("errors", []):
        print(f"tscontrol: precondition failed: {err}", file=_sys.stderr)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
