"""Command-line front end: cone, constants, solve, model, verify and rerun.

Every run writes its artifacts atomically under an output prefix together
with a JSON manifest that echoes the full configuration.  Exit status is 0
on success (a verification report that fails its assertion is a result),
1 on numerical failure and 2 on input errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from . import solver as S
from . import verification as V
from .cone import ConeSolverError, eval_profile, eval_profile_derivative, solve_cone_profile
from .geometry import GeometryError, LensDomain, load_domain, make_lens
from .isometry import PoleError
from .model import ModelError, build_lens_model, model_height, model_residual
from .supersolutions import (CertificateError, certificate, coefficient_bounds, comparison_constants,
                             profile_below_certificate, sandwich_slack)

log = logging.getLogger("hypgraph")

EXIT_OK, EXIT_NUMERICAL, EXIT_INPUT = 0, 1, 2
NUMERICAL_ERRORS = (S.SolverError, ConeSolverError, CertificateError, ModelError, V.VerificationError)
VERIFY_CASES = ("smooth", "cone", "localization", "corner", "properties")


class InputError(ValueError):
    pass


# --------------------------------------------------------------------------
# argument types


def _number(kind, lo=None, hi=None, lo_open=True, hi_open=True):
    """argparse type accepting ``kind`` values in the given interval."""
    def text():
        left = "(" if lo_open else "["
        right = ")" if hi_open else "]"
        return f"{left}{'-inf' if lo is None else lo:g}, {'inf' if hi is None else hi:g}{right}"

    def parse(s):
        try:
            v = kind(s)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid {kind.__name__} value {s!r}") from None
        if isinstance(v, float) and not math.isfinite(v):
            raise argparse.ArgumentTypeError(f"value {s} is not finite")
        bad = ((lo is not None and (v < lo or (lo_open and v == lo)))
               or (hi is not None and (v > hi or (hi_open and v == hi))))
        if bad:
            raise argparse.ArgumentTypeError(f"value {s} outside the range {text()}")
        return v
    return parse


opening = _number(float, 0.0, 1.0)
positive = _number(float, 0.0)
count = _number(int, 1, None, lo_open=False)


def _common(p):
    p.add_argument("--out", default="hypgraph", help="output prefix (default: hypgraph)")
    p.add_argument("--seed", type=_number(int, 0, None, lo_open=False), default=0,
                   help="seed for randomized sampling (default: 0)")
    p.add_argument("--log-level", default="warning", choices=["debug", "info", "warning", "error"])
    p.add_argument("--plot", action="store_true", help="also write an SVG plot")


def _lens_flags(p, kappa: bool = True):
    p.add_argument("--mu", type=opening, default=0.5, help="corner opening as a fraction of pi, in (0, 1)")
    if kappa:
        p.add_argument("--kappa1", type=positive, default=1.0, help="curvature of the first arc (> 0)")
        p.add_argument("--kappa2", type=positive, default=1.0, help="curvature of the second arc (> 0)")


def _solver_flags(p):
    p.add_argument("--tol", type=positive, default=1e-10, help="relative residual tolerance (default: 1e-10)")
    p.add_argument("--max-iter", type=count, default=60, help="Newton step cap (default: 60)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hypgraph", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"hypgraph {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("cone", help="solve the cone profile for one opening")
    _lens_flags(p, kappa=False)
    p.add_argument("--tol", type=positive, default=1e-9, help="shooting tolerance (default: 1e-9)")
    p.add_argument("--n-grid", type=_number(int, 10, None, lo_open=False), default=1500,
                   help="table size (default: 1500)")
    _common(p)

    p = sub.add_parser("constants", help="comparison constants b, delta, C and sandwich slacks")
    p.add_argument("--mu1", type=opening, required=True, help="smaller opening, in (0, 1)")
    p.add_argument("--mu2", type=opening, default=None, help="larger opening in (mu1, mu1 + delta)")
    _common(p)

    p = sub.add_parser("solve", help="solve the graph equation on a domain")
    p.add_argument("--domain", required=True, help="domain JSON file")
    p.add_argument("--grid", choices=["cartesian", "bipolar", "elliptic"], default="cartesian")
    p.add_argument("--spacing", type=positive, default=1.0 / 64, help="Cartesian spacing (default: 1/64)")
    p.add_argument("--d-tau", type=positive, default=0.04, help="bipolar step across the arcs (default: 0.04)")
    p.add_argument("--n-sigma", type=count, default=40, help="bipolar rows per arc gap (default: 40)")
    p.add_argument("--n-theta", type=count, default=160, help="elliptic angular rows (default: 160)")
    p.add_argument("--n-s", type=count, default=80, help="elliptic radial rows, even (default: 80)")
    _solver_flags(p)
    _common(p)

    p = sub.add_parser("model", help="height of the model graph over lens points")
    _lens_flags(p)
    p.add_argument("--point", nargs=2, type=float, action="append", metavar=("X", "Y"),
                   help="query point; repeatable")
    p.add_argument("--points", help="CSV file with columns x,y")
    _common(p)

    p = sub.add_parser("verify", help="run one verification campaign")
    p.add_argument("case", choices=VERIFY_CASES)
    p.add_argument("--domain", help="domain JSON file (smooth, corner, properties)")
    p.add_argument("--other", help="second domain JSON file (localization; default: capped lens)")
    p.add_argument("--outer", help="enclosing domain JSON file for the inclusion property")
    p.add_argument("--corner", type=_number(int, 0, None, lo_open=False), default=0, help="corner index")
    _lens_flags(p)
    p.add_argument("--spacing", type=positive, default=1.0 / 64, help="Cartesian spacing (default: 1/64)")
    p.add_argument("--d-tau", type=positive, default=0.04, help="coarse lattice step (default: 0.04)")
    p.add_argument("--n-sigma", type=count, default=40, help="coarse lattice rows (default: 40)")
    p.add_argument("--levels", type=_number(int, 2, 20, lo_open=False, hi_open=False), default=V.LEVELS,
                   help="dyadic levels, in [2, 20] (default: 5)")
    p.add_argument("--r0", type=positive, default=None, help="outer band radius (default: half the chart radius)")
    p.add_argument("--tau", type=positive, default=None, help="localization exponent for the consistency check")
    p.add_argument("--no-extrapolate", action="store_true", help="skip the Richardson step")
    p.add_argument("--scale", type=_number(float, 1.0), default=2.0, help="dilation factor k > 1 (default: 2)")
    _common(p)

    p = sub.add_parser("rerun", help="repeat a run from its manifest")
    p.add_argument("manifest", help="manifest JSON written by an earlier run")
    p.add_argument("--out", default=None, help="new output prefix (default: the original)")
    return parser


# --------------------------------------------------------------------------
# serialization


def _clean(obj):
    """JSON-ready copy: numpy scalars and arrays unwrapped, non-finite floats as null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def _atomic_write(path: str, data: bytes):
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def json_bytes(obj) -> bytes:
    return (json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n").encode()


def csv_bytes(header, columns) -> bytes:
    cols = [np.asarray(c) for c in columns]
    lines = [",".join(header)]
    for row in zip(*cols):
        lines.append(",".join(str(int(v)) if isinstance(v, (np.integer, np.bool_)) else "%.17g" % v
                              for v in row))
    return ("\n".join(lines) + "\n").encode()


class Outputs:
    """Collects artifacts and writes them under the prefix, one at a time."""

    def __init__(self, prefix: str):
        self.prefix = prefix
        self.paths = []

    def write(self, suffix: str, data: bytes):
        path = self.prefix + suffix
        _atomic_write(path, data)
        self.paths.append(path)

    def figure(self, suffix: str, fig):
        from .plotting import svg_bytes
        self.write(suffix, svg_bytes(fig))


# --------------------------------------------------------------------------
# helpers


def _threads() -> int:
    raw = os.environ.get("HYPGRAPH_THREADS", "")
    if not raw:
        return min(4, os.cpu_count() or 1)
    try:
        n = int(raw)
    except ValueError:
        raise InputError(f"HYPGRAPH_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise InputError(f"HYPGRAPH_THREADS must be a positive integer, got {raw!r}")
    return n


def _parallel(tasks):
    """Run zero-argument callables on the capped pool; results in input order."""
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        futures = [pool.submit(t) for t in tasks]
        return [f.result() for f in futures]


def _load(path, flag):
    if path is None:
        raise InputError(f"{flag} is required for this case")
    try:
        return load_domain(path)
    except OSError as exc:
        raise InputError(f"{flag}: cannot read {path}: {exc.strerror}") from None
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InputError(f"{flag}: malformed domain file {path}: {exc}") from None


def _lens(args) -> LensDomain:
    return make_lens(args.mu, args.kappa1, args.kappa2)


def _field_diag(fld: S.ScalarField) -> dict:
    return {"iterations": fld.iterations, "residual": fld.residual, "converged": fld.converged,
            "residual_history": fld.residual_history, "nodes": int(np.sum(~fld.grid.fixed)),
            "grid": fld.grid.map.kind}


def _report_out(out: Outputs, rep: V.AsymptoticsReport, plot: bool):
    rows = rep.rows()
    cols = list(zip(*rows)) if rows else [[]] * 7
    out.write(".csv", csv_bytes(["level", "radius", "sup", "count", "floor", "used", "reference"], cols))
    out.write(".json", json_bytes(rep.to_dict()))
    if plot:
        from .plotting import report_figure
        out.figure(".svg", report_figure(rep))
    return {"passed": rep.passed, "exponent": rep.exponent, "message": rep.message}


# --------------------------------------------------------------------------
# subcommands


def run_cone(args, out: Outputs) -> dict:
    table = solve_cone_profile(args.mu, tol=args.tol, n_grid=args.n_grid)
    cert = certificate(args.mu)
    summary = {"mu": table.mu, "a_mu": table.a_mu, "a_mu_fit": table.a_mu_fit, "midpoint": table.midpoint,
               "residual": table.residual, "symmetry_defect": table.symmetry_defect,
               "grid_size": table.grid_size,
               "certificate": {"alpha": cert.alpha, "beta": cert.beta, "A": cert.A, "B": cert.B,
                               "max_L": cert.max_L, "domination_slack": profile_below_certificate(table, cert)}}
    th = table.theta
    out.write(".csv", csv_bytes(["theta", "h", "h_prime"],
                                [th, eval_profile(table, th), eval_profile_derivative(table, th)]))
    out.write(".json", json_bytes(summary))
    if args.plot:
        from .plotting import profile_figure
        out.figure(".svg", profile_figure(table))
    return {"a_mu": table.a_mu, "residual": table.residual}


def run_constants(args, out: Outputs) -> dict:
    t1 = solve_cone_profile(args.mu1)
    cc = comparison_constants(t1)
    rec = cc.to_dict()
    if args.mu2 is not None:
        hi = args.mu1 + cc.delta
        if not args.mu1 < args.mu2 < hi:
            raise InputError(f"--mu2 must lie in ({args.mu1:g}, {hi:.6g})")
        cc = comparison_constants(t1, args.mu2)
        t2 = solve_cone_profile(args.mu2)
        lower, upper = sandwich_slack(t1, t2, cc.C)
        lo, hi = coefficient_bounds(args.mu1, args.mu2, t1.a_mu, cc.C)
        rec = cc.to_dict()
        rec.update(sandwich_lower_slack=lower, sandwich_upper_slack=upper, a_mu1=t1.a_mu, a_mu2=t2.a_mu,
                   a_mu2_bounds=[lo, hi], a_mu2_within=bool(lo * (1 - 1e-6) <= t2.a_mu <= hi * (1 + 1e-6)))
    out.write(".json", json_bytes(rec))
    return {"b": rec["b"], "delta": rec["delta"]}


def _solve_on(args, domain):
    if args.grid == "bipolar":
        return S.solve_lens(domain, args.d_tau, args.n_sigma, tol=args.tol, max_iter=args.max_iter)
    if args.grid == "elliptic":
        if args.n_s % 2:
            raise InputError("--n-s must be even")
        return S.solve_ellipse(domain, args.n_theta, args.n_s, tol=args.tol, max_iter=args.max_iter)
    return S.solve(domain, S.SolverConfig(spacing=args.spacing, tol=args.tol, max_iter=args.max_iter))


def run_solve(args, out: Outputs) -> dict:
    domain = _load(args.domain, "--domain")
    fld = _solve_on(args, domain)
    x = fld.grid.x
    out.write(".csv", csv_bytes(["x", "y", "f", "w", "d"], [x[:, 0], x[:, 1], fld.f, fld.w, fld.grid.d]))
    diag = _field_diag(fld)
    out.write(".json", json_bytes(diag))
    if args.plot:
        from .plotting import field_figure
        out.figure(".svg", field_figure(x, fld.f, f"{args.grid} grid"))
    return diag


def _read_points(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return [[float(r["x"]), float(r["y"])] for r in rows]
    except OSError as exc:
        raise InputError(f"--points: cannot read {path}: {exc.strerror}") from None
    except (KeyError, ValueError, TypeError) as exc:
        raise InputError(f"--points: expected numeric columns x,y in {path} ({exc})") from None


def run_model(args, out: Outputs) -> dict:
    pts = list(args.point or [])
    if args.points:
        pts += _read_points(args.points)
    if not pts:
        raise InputError("give query points with --point X Y or --points FILE")
    lens = _lens(args)
    p = np.asarray(pts, float)
    d1, d2 = lens.distances(p)
    if np.any((d1 <= 0) | (d2 <= 0)):
        k = int(np.argmax((d1 <= 0) | (d2 <= 0)))
        raise InputError(f"point {pts[k]} is not strictly inside the lens")
    model = build_lens_model(lens)
    t = model_height(model, p)
    res = model_residual(model, p, t)
    out.write(".json", json_bytes({"input": p, "height": t, "residual": res}))
    return {"points": len(p), "max_residual": float(np.max(res))}


def _verify_smooth(args):
    domain = _load(args.domain, "--domain")
    if domain.corners:
        raise InputError("--domain: the smooth case needs a domain without corners")
    fld = S.solve(domain, S.SolverConfig(spacing=args.spacing))
    reference = None
    arc = domain.arcs[0]
    if len(domain.arcs) == 1 and arc.kind == "circle":
        R = arc.radius
        reference = lambda x, d: 1 - np.sqrt(1 - d / (2 * R))  # noqa: E731
    return V.check_smooth_expansion(domain, fld, levels=args.levels, reference=reference)


def _verify_cone(args):
    lens = _lens(args)
    dom = lens.domain()
    s = V.lens_samples(dom, args.d_tau, args.n_sigma, extrapolate=not args.no_extrapolate)
    return V.check_cone_growth(s, dom.corners[0], S.cone_table(lens.mu), r0=args.r0, levels=args.levels)


def _verify_localization(args):
    from .geometry import capped_lens_domain
    dom = _lens(args).domain()
    other = _load(args.other, "--other") if args.other else capped_lens_domain(args.mu, args.kappa1, args.kappa2)
    corner = dom.corners[0]
    match = [c for c in other.corners if np.allclose(c.vertex, corner.vertex, atol=1e-12)]
    if not match:
        raise InputError("--other: no corner at the lens vertex")
    fa, fb = _parallel([lambda: S.solve_corner(dom, corner, args.d_tau, args.n_sigma),
                        lambda: S.solve_corner(other, match[0], args.d_tau, args.n_sigma)])
    return V.check_localization(dom, other, corner, fa, fb, r0=args.r0, levels=args.levels)


def _verify_corner(args):
    domain = _load(args.domain, "--domain") if args.domain else _lens(args).domain()
    if args.corner >= len(domain.corners):
        raise InputError(f"--corner: domain has {len(domain.corners)} corners")
    if len(domain.arcs) != 2 or len(domain.corners) != 2:
        raise InputError("--domain: the corner campaign needs a two-arc domain with two corners")
    corner = domain.corners[args.corner]
    extrapolate = not args.no_extrapolate
    floor, s = _parallel([
        lambda: V.lens_floor(corner, args.d_tau, args.n_sigma, extrapolate, args.r0, args.levels),
        lambda: V.lens_samples(domain, args.d_tau, args.n_sigma, extrapolate)])
    return V.check_corner_estimate(domain, corner, s, floor=floor, r0=args.r0, levels=args.levels, tau=args.tau)


def _verify_properties(args, out: Outputs):
    domain = _load(args.domain, "--domain")
    k = args.scale
    tasks = [lambda: S.solve(domain, S.SolverConfig(spacing=args.spacing)),
             lambda: S.solve(domain.scaled(k), S.SolverConfig(spacing=k * args.spacing))]
    if args.outer:
        outer = _load(args.outer, "--outer")
        tasks.append(lambda: S.solve(outer, S.SolverConfig(spacing=args.spacing)))
    fields = _parallel(tasks)
    results = V.property_suite(fields[0], scaled=fields[1], k=k, outer=fields[2] if args.outer else None,
                               seed=args.seed)
    out.write(".json", json_bytes({"properties": [r.to_dict() for r in results],
                                   "passed": all(r.passed for r in results)}))
    return {"passed": all(r.passed for r in results), "failed": [r.name for r in results if not r.passed]}


def run_verify(args, out: Outputs) -> dict:
    if args.case == "properties":
        return _verify_properties(args, out)
    rep = {"smooth": _verify_smooth, "cone": _verify_cone, "localization": _verify_localization,
           "corner": _verify_corner}[args.case](args)
    return _report_out(out, rep, args.plot)


RUNNERS = {"cone": run_cone, "constants": run_constants, "solve": run_solve, "model": run_model,
           "verify": run_verify}


# --------------------------------------------------------------------------
# entry point


def _manifest(argv, args, status, code, timings, outputs, result=None, error=None, diagnostics=None):
    return {"version": __version__, "subcommand": args.subcommand, "argv": list(argv),
            "config": {k: v for k, v in sorted(vars(args).items())}, "status": status, "exit_code": code,
            "timings": timings, "outputs": outputs, "result": result or {}, "error": error,
            "diagnostics": diagnostics or {}}


def _rerun_argv(args):
    try:
        with open(args.manifest) as fh:
            man = json.load(fh)
        argv = list(man["argv"])
    except OSError as exc:
        raise InputError(f"manifest: cannot read {args.manifest}: {exc.strerror}") from None
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InputError(f"manifest: malformed file {args.manifest}: {exc}") from None
    if args.out is not None:
        argv += ["--out", args.out]
    return argv


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    if args.subcommand == "rerun":
        try:
            return main(_rerun_argv(args))
        except InputError as exc:
            print(f"hypgraph: error: {exc}", file=sys.stderr)
            return EXIT_INPUT
    logging.basicConfig(level=getattr(logging, args.log_level.upper()), format="%(levelname)s %(name)s: %(message)s")
    out = Outputs(args.out)
    t0 = time.perf_counter()
    status, code, result, error, diag = "ok", EXIT_OK, None, None, None
    try:
        _threads()  # reject a bad HYPGRAPH_THREADS before any work
        result = RUNNERS[args.subcommand](args, out)
    except (InputError, GeometryError, PoleError, ValueError) as exc:
        if isinstance(exc, NUMERICAL_ERRORS):
            status, code, error = "numerical_failure", EXIT_NUMERICAL, str(exc)
        else:
            status, code, error = "input_error", EXIT_INPUT, str(exc)
    except NUMERICAL_ERRORS as exc:
        status, code, error = "numerical_failure", EXIT_NUMERICAL, str(exc)
        if isinstance(exc, S.SolverError):
            diag = {"residual": exc.residual,
                    "residual_history": exc.diagnostics.get("residual_history", [])}
    timings = {"total_seconds": time.perf_counter() - t0}
    if error:
        print(f"hypgraph: error: {error}", file=sys.stderr)
    try:
        _atomic_write(args.out + ".manifest.json",
                      json_bytes(_manifest(argv, args, status, code, timings, out.paths, result, error, diag)))
    except OSError as exc:
        print(f"hypgraph: error: cannot write manifest under {args.out!r}: {exc.strerror}", file=sys.stderr)
        return EXIT_INPUT
    return code


if __name__ == "__main__":
    sys.exit(main())
