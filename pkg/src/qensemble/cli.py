"""Command-line interface: ``qensemble <command> [options]``.

Commands print a payload (json, csv or pretty) whose header echoes the
numeric configuration, including any values taken from QENSEMBLE_*
environment variables. Exit codes: 0 success, 1 usage or parameter error,
2 verification failure, 3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import sys

import numpy as np

from . import __version__
from . import families as fm
from . import kernels as kn
from . import oracle as orc
from . import skewengine as se
from . import suites
from ._accel import HAVE_NUMBA
from .errors import DomainError, NonConvergent, QEnsembleError, RouteMismatch, TermBudgetExceeded
from .qcore import LatticePoint, QContext

EXIT_OK, EXIT_SPEC, EXIT_VERIFY, EXIT_NONCONVERGENT = 0, 1, 2, 3

FAMILY_PARAMS = {
    fm.LITTLE_Q_JACOBI: ("alpha", "beta"),
    fm.AL_SALAM_CARLITZ: ("alpha",),
    fm.Q_LAGUERRE: ("alpha",),
    fm.BIG_Q_JACOBI: ("a", "b", "c"),
}


class SpecError(Exception):
    """Invalid command-line specification (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_SPEC, f"{self.prog}: error: {message}\n")


# ------------------------------------------------------------ helpers


def _family(args, required=True):
    if args.family is None:
        if required:
            raise SpecError("--family is required")
        return None
    names = FAMILY_PARAMS[args.family]
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise SpecError(f"{args.family} needs " + ", ".join(f"--{n}" for n in missing))
    try:
        return fm.WeightFamily(args.family, tuple(getattr(args, n) for n in names))
    except DomainError as exc:
        raise SpecError(str(exc)) from exc


def _context(args, q=None):
    q = args.q if q is None else q
    if q is None:
        raise SpecError("--q is required")
    try:
        ctx, env = QContext.from_env(q, trunc_depth=args.trunc_depth, tail_tol=args.tail_tol, cmp_tol=args.cmp_tol)
        if args.family == fm.BIG_Q_JACOBI and args.a is not None:
            _family(args).support(ctx)
    except DomainError as exc:
        raise SpecError(str(exc)) from exc
    return ctx, env


def _header(args, ctx, env, fam=None, extra=None):
    config = {"q": ctx.q, "trunc_depth": ctx.trunc_depth, "tail_tol": ctx.tail_tol, "cmp_tol": ctx.cmp_tol}
    if extra:
        config.update(extra)
    return {
        "command": args.command,
        "version": __version__,
        "family": None if fam is None else {"name": fam.tag, "params": fam.param_dict},
        "config": config,
        "env_overrides": env,
        "numba": HAVE_NUMBA,
    }


def _point(pt: LatticePoint, q: float) -> dict:
    return {"endpoint": pt.endpoint, "k": pt.k, "value": pt.value(q)}


def _rel(a, b):
    scale = max(abs(a), abs(b))
    return abs(a - b) / scale if scale > 0 else 0.0


def _grid(args, fam, ctx):
    """Lattice points on one anchor for k in kmin..kmax (inclusive)."""
    lat = fm.build_lattice(fam, ctx)
    try:
        kmin, kmax = (int(v) for v in args.grid.split(":"))
    except ValueError as exc:
        raise SpecError(f"--grid expects kmin:kmax, got {args.grid!r}") from exc
    if not 0 <= args.anchor < len(lat.anchors):
        raise SpecError(f"--anchor must be in 0..{len(lat.anchors) - 1} for {fam.tag}")
    pts = [LatticePoint(lat.anchors[args.anchor], k) for k in range(kmin, kmax + 1)]
    for pt in pts:
        try:
            lat.index(pt)
        except (KeyError, ValueError, DomainError) as exc:
            raise SpecError(f"grid point {pt} is outside the truncated lattice") from exc
    return pts


# ----------------------------------------------------------- commands


def cmd_partition(args):
    fam = _family(args)
    ctx, env = _context(args)
    N = args.n
    if not 1 <= N <= 10:
        raise SpecError("--n must be in 1..10")
    values = {}
    if N % 2 == 0:
        values["closed"] = se.partition_explicit(fam, N // 2, ctx)
        values["product_u"] = se.partition_product_u(fam, N // 2, ctx)
    else:
        values["beta_route"] = se.partition_odd(fam, N, ctx)
        values["bordered_pfaffian"] = float(se.pfaffian(se.moment_matrix(fam, N, ctx).bordered(N)))
    cfg = orc.OracleConfig(depth=args.depth)
    if args.oracle:
        if N > cfg.max_particles:
            raise SpecError(f"the oracle handles at most {cfg.max_particles} particles")
        values["oracle"] = orc.brute_partition(fam, N, cfg, ctx)
    errors = {f"{a}|{b}": _rel(values[a], values[b]) for a, b in itertools.combinations(values, 2)}
    tol = ctx.cmp_tol
    passed = all(e <= tol for e in errors.values())
    extra = {"oracle_depth": cfg.depth_for(N)} if args.oracle else None
    payload = {"header": _header(args, ctx, env, fam, extra), "status": "ok" if passed else "route_mismatch",
               "result": {"particles": N, "values": values, "relative_errors": errors, "tolerance": tol},
               "rows": [{"route": k, "value": v} for k, v in values.items()]}
    return payload, passed


def cmd_sop(args):
    fam = _family(args)
    ctx, env = _context(args)
    size = 2 * args.n
    if not 1 <= args.n <= 6:
        raise SpecError("--n must be in 1..6")
    closed = se.sop_closed(fam, size, ctx)
    numeric = se.sop_numeric(fam, size, ctx)
    disc = se.sop_discrepancy(numeric, closed)
    rows = []
    for i in range(size):
        rows.append({"index": i, "closed": closed.polys[i].array(i + 1).tolist(),
                     "numeric": numeric.polys[i].array(i + 1).tolist(),
                     "discrepancy": float(np.max(np.abs(closed.polys[i].array(size) - numeric.polys[i].array(size))))})
    result = {"u": list(map(float, closed.u)), "u_numeric": list(map(float, numeric.u)),
              "gamma": [fm.gamma_closed(fam, j, ctx) for j in range(size)], "max_discrepancy": disc}
    passed = disc <= ctx.cmp_tol
    if args.limit_check:
        if fam.tag != fm.Q_LAGUERRE:
            raise SpecError("--limit-check applies to the q-laguerre family")
        rep = se.laguerre_limit_check(fam.params[0], args.limit_n)
        rep["ratio"] = rep["coefficient"] / rep["target"]
        rep["tolerance"] = 0.02
        rep["passed"] = rep["relative_error"] <= 0.02
        result["limit_check"] = rep
        passed = passed and rep["passed"]
    payload = {"header": _header(args, ctx, env, fam), "status": "ok" if passed else "route_mismatch",
               "result": result, "rows": rows}
    return payload, passed


def cmd_kernel(args):
    fam = _family(args)
    ctx, env = _context(args)
    if not 1 <= args.n <= 12:
        raise SpecError("--n must be in 1..12")
    pts = _grid(args, fam, ctx)
    tables = kn.kernel_set(fam, args.n, ctx) if pts else None
    rows = []
    for x, y in itertools.product(pts, repeat=2):
        b = tables.block(x, y)
        rows.append({"x": _point(x, ctx.q), "y": _point(y, ctx.q), "K": b.K, "J_xy": b.J_xy, "J_yx": b.J_yx,
                     "I": b.I})
    return {"header": _header(args, ctx, env, fam), "status": "ok", "result": {"particles": args.n},
            "rows": rows}, True


def cmd_correlation(args):
    fam = _family(args)
    ctx, env = _context(args)
    N, k = args.n, args.k
    if not 1 <= N <= 12 or not 1 <= k <= N:
        raise SpecError("need 1 <= --k <= --n <= 12")
    pts = _grid(args, fam, ctx)
    cfg = orc.OracleConfig(depth=args.depth)
    if args.oracle and N > cfg.max_particles:
        raise SpecError(f"the oracle handles at most {cfg.max_particles} particles")
    tau = orc.brute_partition(fam, N, cfg, ctx) if args.oracle and pts else None
    tables = kn.kernel_set(fam, N, ctx) if pts else None
    lat = fm.build_lattice(fam, ctx)
    rows = []
    passed = True
    for tup in itertools.combinations(pts, k):
        rho = kn.correlation_rho(fam, N, k, list(tup), ctx)
        row = {"points": [_point(p, ctx.q) for p in tup], "rho": rho}
        if k == 1:
            i = lat.index(tup[0])
            row["omega"] = float(lat.omega[i])
            row["J_diag"] = float(tables.J[i, i])
            row["weight"] = float(lat.w[i])
        if args.oracle:
            row["oracle"] = orc.brute_correlation(fam, N, k, list(tup), cfg, ctx, tau=tau)
            row["relative_error"] = abs(rho - row["oracle"]) / max(abs(row["oracle"]), 1e-300)
        rows.append(row)
    if args.oracle and rows:
        # tuples with an exact zero density are measured against the largest one
        floor = 1e-6 * max(abs(r["oracle"]) for r in rows)
        for r in rows:
            r["relative_error"] = abs(r["rho"] - r["oracle"]) / max(abs(r["oracle"]), floor, 1e-300)
        passed = all(r["relative_error"] <= 1e-6 for r in rows)
    return {"header": _header(args, ctx, env, fam), "status": "ok" if passed else "route_mismatch",
            "result": {"particles": N, "k": k, "count": len(rows)}, "rows": rows}, passed


def cmd_tabulate(args):
    fam = _family(args)
    ctx, env = _context(args)
    lat = fm.build_lattice(fam, ctx)
    pts = _grid(args, fam, ctx)
    Fv = se.F_values(fam, ctx)
    dens = kn.one_point_density(fam, args.n, ctx) if args.n and pts else None
    rows = []
    for pt in pts:
        i = lat.index(pt)
        row = {"point": _point(pt, ctx.q), "weight": float(lat.w[i]), "rho": float(lat.rho[i]),
               "omega": float(lat.omega[i]), "F": float(Fv[i])}
        if dens is not None:
            row["density"] = float(dens[i])
        rows.append(row)
    return {"header": _header(args, ctx, env, fam), "status": "ok",
            "result": {"lattice_size": lat.size, "anchors": list(lat.anchors)}, "rows": rows}, True


def cmd_verify(args):
    fam = _family(args, required=False)
    names = args.suite or ["all"]
    for n in names:
        if n != "all" and n not in suites.SUITES:
            raise SpecError(f"unknown suite {n!r}; choose from {', '.join(suites.SUITES)}")
    q = args.q if args.q is not None else 0.25
    ctx, env = _context(args, q=q)
    overrides = {k: getattr(ctx, k) for k in ("trunc_depth", "tail_tol", "cmp_tol")
                 if k in env or getattr(args, k) is not None}
    fams = None if fam is None else ((fam, ctx.q),)
    records = suites.run_suites(names, fams, overrides)
    passed = all(r["passed"] for r in records)
    header = _header(args, ctx, env, fam)
    if fam is None:
        header["config"]["q"] = None
    header["config"]["suites"] = names
    payload = {"header": header, "status": "ok" if passed else "verification_failed",
               "result": {"checks": len(records), "failed": sum(not r["passed"] for r in records)},
               "rows": records}
    return payload, passed


COMMANDS = {"partition": cmd_partition, "sop": cmd_sop, "kernel": cmd_kernel, "correlation": cmd_correlation,
            "tabulate": cmd_tabulate, "verify": cmd_verify}


# ------------------------------------------------------------ output


def _flatten(row, prefix=""):
    out = {}
    for key, val in row.items():
        name = f"{prefix}{key}"
        if isinstance(val, dict):
            out.update(_flatten(val, name + "."))
        elif isinstance(val, list) and val and isinstance(val[0], dict):
            for i, item in enumerate(val):
                out.update(_flatten(item, f"{name}{i}."))
        elif isinstance(val, list):
            out[name] = " ".join(repr(v) for v in val)
        else:
            out[name] = val
    return out


def render(payload, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(payload, indent=2)
    flat = [_flatten(r) for r in payload["rows"]]
    fields = list(dict.fromkeys(k for r in flat for k in r))
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        writer.writerows(flat)
        return buf.getvalue().rstrip("\n")
    lines = [f"# {k}: {json.dumps(v)}" for k, v in payload["header"].items()]
    lines.append(f"# status: {payload['status']}")
    for k, v in payload["result"].items():
        lines.append(f"{k}: {json.dumps(v)}")
    if flat:
        cells = [[_fmt(r.get(f, "")) for f in fields] for r in flat]
        widths = [max(len(f), *(len(c[i]) for c in cells)) for i, f in enumerate(fields)]
        lines.append("  ".join(f.ljust(w) for f, w in zip(fields, widths)))
        lines.extend("  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in cells)
    return "\n".join(lines)


def _fmt(v):
    return f"{v:.12g}" if isinstance(v, float) else str(v)


# ------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--family", choices=sorted(FAMILY_PARAMS), help="weight family")
    for name in ("alpha", "beta", "a", "b", "c"):
        common.add_argument(f"--{name}", type=float, help=f"family parameter {name}")
    common.add_argument("--q", type=float, help="deformation parameter in (0, 1)")
    common.add_argument("--trunc-depth", type=int, help="maximum lattice steps per direction")
    common.add_argument("--tail-tol", type=float, help="relative tail bound for truncated sums")
    common.add_argument("--cmp-tol", type=float, help="relative tolerance for route checks")
    common.add_argument("--format", choices=("json", "csv", "pretty"), default="json")

    parser = _Parser(prog="qensemble", description="Discrete q-orthogonal ensembles on exponential lattices.")
    parser.add_argument("--version", action="version", version=f"qensemble {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("partition", parents=[common], help="partition function by every route")
    p.add_argument("--n", type=int, required=True, help="number of particles")
    p.add_argument("--oracle", action="store_true", help="add the brute-force nested sum")
    p.add_argument("--depth", type=int, help="oracle depth per nested variable")

    p = sub.add_parser("sop", parents=[common], help="skew-orthogonal polynomial tables")
    p.add_argument("--n", type=int, required=True, help="tabulate Q_0 .. Q_{2n-1}")
    p.add_argument("--limit-check", action="store_true", help="q-Laguerre coefficient near q = 1")
    p.add_argument("--limit-n", type=int, default=1, help="index used by --limit-check")

    for name, helptext in (("kernel", "kernel entries K, J, I on a grid"),
                           ("correlation", "correlation functions on a grid"),
                           ("tabulate", "lattice weights and one-point density")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--n", type=int, required=name != "tabulate", help="number of particles")
        p.add_argument("--grid", default="0:4", help="lattice exponents kmin:kmax, inclusive (use --grid=-3:3 for negatives)")
        p.add_argument("--anchor", type=int, default=0, help="anchor index for grid points")
        if name == "correlation":
            p.add_argument("--k", type=int, default=1, help="correlation order")
            p.add_argument("--oracle", action="store_true", help="add the brute-force column")
            p.add_argument("--depth", type=int, help="oracle depth per nested variable")

    p = sub.add_parser("verify", parents=[common], help="run identity and oracle suites")
    p.add_argument("--suite", action="append", help=f"suite name ({', '.join(suites.SUITES)}); repeatable")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        payload, passed = COMMANDS[args.command](args)
    except SpecError as exc:
        print(f"qensemble: error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except (NonConvergent, TermBudgetExceeded) as exc:
        print(f"qensemble: non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENT
    except RouteMismatch as exc:
        print(f"qensemble: verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except DomainError as exc:
        print(f"qensemble: error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except QEnsembleError as exc:
        print(f"qensemble: verification failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    print(render(payload, args.format))
    return EXIT_OK if passed else EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
