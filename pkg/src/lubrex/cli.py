"""Command-line interface: ``lubrex <subcommand> ...``.

Exit codes: 0 ok, 2 usage error, 3 domain error, 4 validation failure.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import json
import math
import os
import sys
import warnings
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .errors import BoundViolation, LubrexError, ValidityWarning

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_VALIDATION = 0, 2, 3, 4


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- helpers

def _config_line(args: argparse.Namespace) -> str:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    return "# lubrex " + __version__ + " config: " + json.dumps(cfg, sort_keys=True)


@contextlib.contextmanager
def _sink(path: Optional[str]):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _write_csv(args, header: Sequence[str], rows, footer: Sequence[str] = ()):
    with _sink(getattr(args, "out", None)) as fh:
        fh.write(_config_line(args) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(r)
        for line in footer:
            fh.write(line + "\n")


def _write_json(args, payload):
    payload = {"config": {k: v for k, v in sorted(vars(args).items()) if k != "func"}, **payload}
    with _sink(getattr(args, "out", None)) as fh:
        json.dump(payload, fh, indent=1, sort_keys=False, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)}")


def _fmt(v) -> str:
    return repr(float(v))


def _even_order(v: str) -> int:
    try:
        o = int(v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"order must be an integer, got {v!r}")
    if o < 0 or o % 2:
        raise argparse.ArgumentTypeError("order must be a nonnegative even integer 2k")
    return o


def _orders(v: str) -> List[int]:
    return [_even_order(t) for t in v.split(",") if t.strip()]


def _grid(v: str):
    try:
        nx, ny = (int(t) for t in v.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like NXxNY, got {v!r}")
    if nx < 1 or ny < 2:
        raise argparse.ArgumentTypeError("grid needs NX >= 1 and NY >= 2")
    return nx, ny


def _eps_range(v: str):
    try:
        lo, hi, n = v.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise argparse.ArgumentTypeError(f"eps range must look like lo:hi:count, got {v!r}")
    if not (0 < lo <= hi) or n < 1:
        raise argparse.ArgumentTypeError("eps range needs 0 < lo <= hi and count >= 1")
    return lo, hi, n


def eps_grid(lo: float, hi: float, n: int) -> np.ndarray:
    """Geometric spacing, the natural choice for log-log slope fits."""
    return np.geomspace(lo, hi, n) if n > 1 else np.array([lo])


def _boundary(args):
    from .fields import BoundaryData
    return BoundaryData(V0=args.V0, V1=args.V1)


# ---------------------------------------------------------------- commands

def cmd_basis(args):
    from .basis import get_basis
    b = get_basis(args.k)
    with _sink(args.out) as fh:
        for row in b.exponents.tolist():
            fh.write(",".join(str(v) for v in row) + "\n")


def cmd_constants(args):
    from .constants import universal_constants
    prec = args.precision
    if prec == "auto":
        prec = "exact" if args.max_order <= 10 else "float"
    tab = universal_constants(args.max_order, prec)
    records = []
    kap = tab.kappa
    for k in range(tab.k_max + 1):
        records.append(("kappa", "before", k, kap.before0[k], kap.before1[k], kap.kappa2[k]))
        records.append(("kappa", "after", k, kap.after0[k], kap.after1[k], kap.kappa2[k]))
    K = tab.K
    for k in range(tab.k_max + 1):
        records.append(("K", "before", k, K.K0_before[k], K.K1_before[k], K.K2[k]))
        records.append(("K", "after", k, K.K0_after[k], K.K1_after[k], K.K2[k]))
    for k in range(tab.k_max + 1):
        records.append(("Ktilde", "before", k, K.Kt0_before[k], K.Kt1_before[k], K.Kt2[k]))
        records.append(("Ktilde", "after", k, K.Kt0_after[k], K.Kt1_after[k], K.Kt2[k]))
    uc = tab.universal
    for k in range(tab.k_max + 1):
        records.append(("rho", "final", k, uc.rho[k], "", ""))
        records.append(("theta", "final", k, uc.theta[k], "", ""))
    cols = ("table", "stage", "k", "c0", "c1", "c2")
    if args.format == "csv":
        rows = [r[:3] + tuple(_fmt(v) if v != "" else "" for v in r[3:]) for r in records]
        _write_csv(args, cols, rows)
    else:
        out = {}
        for r in records:
            vals = [float(v) for v in r[3:] if v != ""]
            out.setdefault(r[0], []).append({"stage": r[1], "k": r[2], "values": vals})
        out["argmax"] = list(uc.argmax)
        _write_json(args, {"precision": prec, "tables": out})


def cmd_expand(args):
    from .matrices import KINDS, expansion_stack, to_float, to_jsonable
    k = args.order // 2
    stack = expansion_stack(k, exact=(args.precision == "exact"))
    orders = []
    for m in stack:
        entry = {"order": m.order}
        for kind in KINDS:
            M = m.raw(kind)
            entry[kind] = to_jsonable(M) if args.precision == "exact" else to_float(M).tolist()
        orders.append(entry)
    _write_json(args, {"orders": orders})


def cmd_moments(args):
    from .geometry import moments, parse_shape
    shape = parse_shape(args.h)
    k = args.max_order // 2
    mom = moments(shape, k, args.N)
    payload = {
        "I1": mom.I1, "I2": mom.I2, "I3": mom.I3, "h0": mom.h0,
        "r": [None if math.isinf(v) else float(v) for v in mom.r],
        "E": {str(o): {str(m): v.tolist() for m, v in d.items()} for o, d in mom.E.items()},
        "Etilde": {str(o): {str(m): v.tolist() for m, v in d.items()} for o, d in mom.Et.items()},
    }
    _write_json(args, payload)


def cmd_eval(args):
    from .fields import EvalContext, truncated_fields
    from .geometry import parse_shape
    shape = parse_shape(args.h)
    fields = [f.strip() for f in args.fields.split(",") if f.strip()]
    bad = set(fields) - {"psi", "u", "v", "omega", "p"}
    if bad:
        raise UsageError(f"unknown fields: {sorted(bad)}")
    k = args.order // 2
    nx, ny = args.grid
    x = np.arange(nx) / nx
    eta = np.linspace(0.0, 1.0, ny)
    ctx = EvalContext(shape, k, eps=args.eps, boundary=_boundary(args), N=args.N)
    fg = truncated_fields(ctx, k, x, eta, fields=fields, eps=args.eps)
    header = ["x", "y"]
    for f in fields:
        header += [f"{f}_{2 * l}" for l in range(k + 1)] + [f"{f}_approx"]
    rows = []
    for i in range(nx):
        for j in range(ny):
            r = [_fmt(x[i]), _fmt(fg.y[i, j])]
            for f in fields:
                r += [_fmt(v[i, j]) for v in fg.per_order[f]] + [_fmt(fg.approx[f][i, j])]
            rows.append(r)
    _write_csv(args, header, rows)


def cmd_bound(args):
    from .bounds import star_bound
    from .constants import universal_constants
    from .geometry import moments, parse_shape
    shape = parse_shape(args.h)
    k = args.order // 2
    mom = moments(shape, k, args.N)
    tab = universal_constants(k, "exact" if k <= 10 else "float")
    b = star_bound(mom, tab, _boundary(args), k, args.eps)
    d = {key: (None if isinstance(v, float) and math.isinf(v) else v)
         for key, v in b.as_dict().items()}
    _write_json(args, {"budget": d})


def cmd_validate(args):
    from .constants import universal_constants
    from .geometry import parse_shape
    from .solver import convergence_study
    shape = parse_shape(args.h)
    eps = eps_grid(*args.eps_range)
    tab = universal_constants(max(args.orders) // 2, "exact")
    res = convergence_study(shape, _boundary(args), args.orders, eps, Nx=args.nx, Ny=args.ny,
                            tables=tab)
    cols = ("eps", "order", "norm_psi", "norm_uv", "norm_omega", "norm_p", "q_err",
            "bound_star", "bound_p", "ratio")
    rows = [[_fmt(r["eps"]), r["order"]] + [_fmt(r[c]) for c in cols[2:]] for r in res.rows]
    footer = []
    for o in sorted(res.slopes):
        sl = res.slopes[o]
        footer.append(f"# slope order={o} expected={o + 2} "
                      + " ".join(f"{k}={v:.4f}" for k, v in sl.items()))
    violations = [r for r in res.rows if r["valid"] and r["ratio"] < 1]
    footer.append(f"# bound_violations={len(violations)}")
    _write_csv(args, cols, rows, footer)
    if violations:
        raise BoundViolation(f"{len(violations)} rows with error above the bound")


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lubrex", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common_bc(sp):
        sp.add_argument("--V0", type=float, default=-0.5, help="lower wall velocity")
        sp.add_argument("--V1", type=float, default=1.0, help="upper wall velocity")

    sp = sub.add_parser("basis", help="list the basis of degree k")
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_basis)

    sp = sub.add_parser("constants", help="universal constant tables up to k")
    sp.add_argument("--max-order", type=int, required=True, help="largest table index k")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.add_argument("--precision", choices=("auto", "exact", "float"), default="auto")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_constants)

    sp = sub.add_parser("expand", help="expansion matrices up to order 2k as JSON")
    sp.add_argument("--order", type=_even_order, required=True)
    sp.add_argument("--precision", choices=("exact", "float"), default="exact")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_expand)

    sp = sub.add_parser("moments", help="geometry moments as JSON")
    sp.add_argument("--h", required=True, help="shape spec, e.g. sine:a=0.2")
    sp.add_argument("--max-order", type=_even_order, required=True)
    sp.add_argument("--N", type=int, default=1024, help="trapezoid nodes")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_moments)

    sp = sub.add_parser("eval", help="evaluate truncated fields on a grid")
    sp.add_argument("--h", required=True)
    sp.add_argument("--order", type=_even_order, required=True)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--grid", type=_grid, default=(32, 9))
    sp.add_argument("--fields", default="psi,u,v,omega,p")
    sp.add_argument("--N", type=int, default=1024)
    common_bc(sp)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("bound", help="a priori error budget as JSON")
    sp.add_argument("--h", required=True)
    sp.add_argument("--order", type=_even_order, required=True)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--N", type=int, default=1024)
    common_bc(sp)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_bound)

    sp = sub.add_parser("validate", help="convergence study against the reference solver")
    sp.add_argument("--h", required=True)
    sp.add_argument("--orders", type=_orders, default=[0, 2, 4])
    sp.add_argument("--eps-range", type=_eps_range, default=(0.06, 0.2, 8))
    sp.add_argument("--nx", type=int, default=48)
    sp.add_argument("--ny", type=int, default=18)
    common_bc(sp)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_validate)
    return p


def _thread_limit():
    n = os.environ.get("LUBREX_THREADS")
    if not n:
        return contextlib.nullcontext()
    try:
        n = int(n)
    except ValueError:
        raise UsageError(f"LUBREX_THREADS must be an integer, got {n!r}")
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return contextlib.nullcontext()
    return threadpool_limits(limits=n)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        with _thread_limit(), warnings.catch_warnings():
            warnings.simplefilter("always", ValidityWarning)
            warnings.showwarning = lambda m, *a, **k: print(f"warning: {m}", file=sys.stderr)
            args.func(args)
    except UsageError as exc:
        print(f"lubrex: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BoundViolation as exc:
        print(f"lubrex: validation failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except LubrexError as exc:
        print(f"lubrex: {type(exc).__name__} in {args.command}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except BrokenPipeError:
        # downstream closed early (e.g. piped into head)
        devnull = os.open(os.devnull, os.O_WRONLY)
        os.dup2(devnull, sys.stdout.fileno())
        return EXIT_OK
    except (ValueError, OSError) as exc:
        print(f"lubrex: error in {args.command}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
