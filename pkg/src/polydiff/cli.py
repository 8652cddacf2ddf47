"""Command-line interface.

Exit codes: 0 ok, 2 parse or usage error, 3 not admissible, 4 verification
failed, 5 I/O error.  Errors are printed to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from fractions import Fraction

from . import catalog
from .admissibility import solve_metrics
from .errors import (
    EmptySolution,
    NotAdmissible,
    ParamOutOfRange,
    ParseError,
    PolydiffError,
    UnknownName,
)
from .operator import SCHEMA, dumps, from_descriptor
from .polyring import Poly

EXIT_OK, EXIT_PARSE, EXIT_NOT_ADMISSIBLE, EXIT_VERIFY, EXIT_IO = 0, 2, 3, 4, 5


class UsageError(ParseError):
    code = "USAGE"


def default_seed():
    v = os.environ.get("POLYDIFF_SEED")
    if v is None:
        return 0
    try:
        return int(v)
    except ValueError:
        raise UsageError(f"POLYDIFF_SEED must be an integer, got {v!r}") from None


def _emit(obj, out):
    out.write(json.dumps(obj, indent=2, default=_json_default) + "\n")


def _json_default(v):
    if isinstance(v, Fraction):
        return str(v)
    if hasattr(v, "tolist"):
        return v.tolist()
    if isinstance(v, tuple):
        return list(v)
    raise TypeError(type(v))


def _params(pairs, extra):
    """Model parameters from --param k=v and from leftover --k v options."""
    out = {}
    for p in pairs or []:
        if "=" not in p:
            raise UsageError(f"--param expects key=value, got {p!r}")
        k, v = p.split("=", 1)
        out[k.strip()] = v.strip()
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--"):
            raise UsageError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            k, v = key.split("=", 1)
            out[k] = v
            i += 1
            continue
        if i + 1 >= len(extra):
            raise UsageError(f"option {tok} needs a value")
        out[key] = extra[i + 1]
        i += 2
    return out


def _weights(text, d=None):
    if text is None:
        return None
    try:
        w = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"bad weights {text!r}") from None
    if d is not None and len(w) != d:
        raise UsageError(f"{len(w)} weights for {d} variables")
    return w


def _point(text):
    if text is None:
        return None
    try:
        return tuple(Fraction(v) for v in text.split(","))
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"bad point {text!r}") from None


def _infer_variables(text):
    names = set(re.findall(r"[A-Za-z_][A-Za-z0-9_]*", text))
    letters = sorted({c for n in names for c in n if c.isalpha()})
    if not letters:
        return ("x", "y")
    return tuple(letters)


def _read(path):
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as e:
        raise IOError(f"cannot read {path}: {e.strerror}") from None


def load_target(ref, params=None, variables=None):
    """A catalog name, a model descriptor file, or a polynomial file.

    Returns (model or None, Q, weights, interior point, factors).
    """
    if not os.path.exists(ref):
        if os.sep in ref or "." in ref:
            raise IOError(f"no such file: {ref}")
        try:
            m = catalog.get_model(ref, params or {})
        except UnknownName:
            raise UnknownName(f"{ref!r} is neither a file nor a catalog entry") from None
        return m, m.boundary.Q if m.boundary else None, m.weights.a, m.interior_point, \
            (m.boundary.factors if m.boundary else None)
    text = _read(ref)
    stripped = text.strip()
    if stripped.startswith("{"):
        try:
            data = json.loads(stripped)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON in {ref}: {e}") from None
        if "metric" in data:
            m = from_descriptor(data)
            if m.boundary is None:
                raise ParseError(f"descriptor {ref} has no boundary")
            return m, m.boundary.Q, m.weights.a, m.interior_point, m.boundary.factors
        if data.get("schema") != SCHEMA:
            raise ParseError(f"unsupported schema {data.get('schema')!r}, expected {SCHEMA}")
        vs = tuple(data.get("variables") or _infer_variables(data["Q"]))
        Q = Poly.parse(data["Q"], vs)
        facs = tuple(Poly.parse(f, vs) for f in data["factors"]) if data.get("factors") else None
        ip = data.get("interior_point")
        return None, Q, data.get("weights"), None if ip is None else tuple(Fraction(v) for v in ip), facs
    vs = tuple(variables) if variables else _infer_variables(stripped)
    return None, Poly.parse(stripped, vs), None, None, None


# ---------------------------------------------------------------------------
# commands


def cmd_catalog(args, extra, out):
    if args.action == "list":
        _emit({"schema": SCHEMA, "entries": catalog.list_entries()}, out)
        return EXIT_OK
    if not args.name:
        raise UsageError("catalog show needs a name")
    m = catalog.get_model(args.name, _params(args.param, extra))
    out.write(dumps(m) + "\n")
    return EXIT_OK


def _solve(Q, w, point, factors, seed):
    sol = solve_metrics(Q, w, point, seed=seed, factors=factors, allow_empty=True)
    rep = sol.report()
    rep["interior_point"] = None if point is None else [str(v) for v in point]
    return sol, rep


def cmd_check(args, extra, out):
    vs = args.vars.split(",") if args.vars else None
    m, Q, w, point, factors = load_target(args.target, _params(args.param, extra), vs)
    if Q is None:
        raise ParseError(f"{args.target} has no boundary polynomial")
    w = _weights(args.weights, Q.dimension) or w
    point = _point(args.point) or point
    sol, rep = _solve(Q, w, point, factors, args.seed)
    _emit(rep, out)
    if point is None:
        return EXIT_OK if sol.dimension else EXIT_NOT_ADMISSIBLE
    return EXIT_OK if sol.has_positive else EXIT_NOT_ADMISSIBLE


def cmd_solve(args, extra, out):
    return cmd_check(args, extra, out)


def cmd_spectrum(args, extra, out):
    from .spectra import eigen_blocks, spectrum_report

    m = catalog.get_model(args.name, _params(args.param, extra))
    block = eigen_blocks(m, args.degree)
    rep = spectrum_report(block)
    rep["model"] = args.name
    _emit(rep, out)
    return EXIT_OK


def cmd_moments(args, extra, out):
    from .measure import model_moments

    m = catalog.get_model(args.name, _params(args.param, extra))
    method = "mc" if args.mc else "exact" if args.exact else "auto"
    table = model_moments(m, args.degree, method, N=args.samples, seed=args.seed)
    data = table.to_json()
    data["model"] = args.name
    if table.acceptance_rate is not None:
        data["acceptance_rate"] = table.acceptance_rate
    _emit(data, out)
    return EXIT_OK


def cmd_simulate(args, extra, out):
    from .measure import model_moments
    from .simulate import PathConfig, dump_trajectory, eigen_decay_check, invariant_check, simulate

    cfg_data = {}
    if args.config:
        try:
            cfg_data = json.loads(_read(args.config))
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid config JSON: {e}") from None
        if cfg_data.get("schema", SCHEMA) != SCHEMA:
            raise ParseError(f"unsupported schema {cfg_data.get('schema')!r}")
    params = dict(cfg_data.get("params", {}))
    params.update(_params(args.param, extra))
    m = catalog.get_model(args.name, params)
    seed = cfg_data.get("seed", args.seed)
    x0 = cfg_data.get("x0")
    cfg = PathConfig(
        dt=float(cfg_data.get("dt", 1e-3)), T=float(cfg_data.get("T", 1.0)),
        burn_in=float(cfg_data.get("burn_in", 0.0)), seed=int(seed),
        x0=None if x0 is None else tuple(float(v) for v in x0),
        n_paths=int(cfg_data.get("n_paths", 1000)),
    )
    check = cfg_data.get("check", "invariant")
    if check == "invariant":
        mons = [tuple(e) for e in cfg_data.get("monomials", [[1] + [0] * (m.dimension - 1)])]
        moments = model_moments(m, max(sum(e) for e in mons), N=2**18, seed=int(seed))
        rep = invariant_check(m, cfg, mons, moments)
        result = {
            "check": "invariant", "passed": rep.passed, "escapes": rep.escapes,
            "overshoots": rep.overshoots, "steps": rep.steps,
            "verdicts": [vars(v) for v in rep.verdicts],
        }
        ok = rep.passed
    elif check == "decay":
        P = m.poly(cfg_data["P"])
        rep = eigen_decay_check(m, float(cfg_data["eigenvalue"]), P, cfg)
        result = {
            "check": "decay", "passed": rep.passed, "rate": rep.rate, "rate_stderr": rep.rate_stderr,
            "eigenvalue": rep.eigenvalue, "times": rep.times, "means": rep.means,
            "stderrs": rep.stderrs, "expected": rep.expected, "escapes": rep.escapes,
        }
        ok = rep.passed
    elif check == "paths":
        res = simulate(m, cfg, checkpoints=cfg_data.get("checkpoints", [cfg.T]))
        if cfg_data.get("dump"):
            try:
                dump_trajectory(res.states, cfg_data["dump"], binary=bool(cfg_data.get("binary")))
            except OSError as e:
                raise IOError(str(e)) from None
        result = {"check": "paths", "passed": True, "escapes": res.escapes, "steps": res.steps,
                  "checkpoints": res.checkpoints}
        ok = True
    else:
        raise ParseError(f"unknown simulation check {check!r}")
    result["model"] = args.name
    _emit(result, out)
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_render(args, extra, out):
    from .render import default_box, render_svg

    vs = args.vars.split(",") if args.vars else None
    m, Q, _, _, _ = load_target(args.target, _params(args.param, extra), vs)
    if Q is None:
        raise ParseError(f"{args.target} has no boundary polynomial")
    if args.box:
        try:
            x0, y0, x1, y1 = (float(v) for v in args.box.split(","))
        except ValueError:
            raise UsageError("--box expects x0,y0,x1,y1") from None
        box = ((x0, y0), (x1, y1))
    else:
        box = default_box(m)
    svg, meta = render_svg(Q, box, grid=args.grid, title=args.target)
    if args.out in (None, "-"):
        out.write(svg)
    else:
        try:
            with open(args.out, "w") as fh:
                fh.write(svg)
        except OSError as e:
            raise IOError(f"cannot write {args.out}: {e.strerror}") from None
        meta.pop("polylines")
        _emit({"written": args.out, **meta}, out)
    return EXIT_OK


def cmd_verify(args, extra, out):
    from .verify import verify, verify_all

    if args.name == "all":
        reports = verify_all()
    else:
        reports = [verify(args.name, _params(args.param, extra))]
    width = max(len(r.name) for r in reports)
    any_fail = False
    for r in reports:
        for res in r.results:
            line = f"{r.name:<{width}}  {res.status():<5}  {res.fact}"
            if res.detail and not res.passed:
                line += f"  ({res.detail})"
            out.write(line + "\n")
        any_fail |= not r.passed
    total = sum(len(r.results) for r in reports)
    passed = sum(x.passed for r in reports for x in r.results)
    known = sum((not x.passed) and x.known_discrepancy for r in reports for x in r.results)
    out.write(f"{passed}/{total} facts pass, {known} known discrepancies (FAIL*)\n")
    return EXIT_VERIFY if any_fail else EXIT_OK


# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="polydiff", description="polynomial diffusion models")
    p.add_argument("--seed", type=int, default=None, help="default: $POLYDIFF_SEED or 0")
    sub = p.add_subparsers(dest="command", required=True)

    def model_opts(sp):
        sp.add_argument("--param", action="append", metavar="K=V", help="model parameter")

    c = sub.add_parser("catalog", help="list entries or show a model descriptor")
    c.add_argument("action", choices=["list", "show"])
    c.add_argument("name", nargs="?")
    model_opts(c)
    c.set_defaults(func=cmd_catalog)

    for name, fn in (("check", cmd_check), ("solve", cmd_solve)):
        s = sub.add_parser(name, help="solve the boundary admissibility equation")
        s.add_argument("target", help="catalog name, model descriptor, or polynomial file")
        s.add_argument("--weights")
        s.add_argument("--point", help="interior point, comma separated")
        s.add_argument("--vars", help="variable names for a polynomial file")
        model_opts(s)
        s.set_defaults(func=fn)

    s = sub.add_parser("spectrum", help="eigenvalues of L on P_n")
    s.add_argument("name")
    s.add_argument("--degree", type=int, required=True)
    model_opts(s)
    s.set_defaults(func=cmd_spectrum)

    s = sub.add_parser("moments", help="moment table of the reversible measure")
    s.add_argument("name")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--exact", action="store_true")
    g.add_argument("--mc", action="store_true")
    s.add_argument("--degree", type=int, default=4)
    s.add_argument("--samples", type=int, default=2**20)
    model_opts(s)
    s.set_defaults(func=cmd_moments)

    s = sub.add_parser("simulate", help="Euler-Maruyama checks")
    s.add_argument("name")
    s.add_argument("--config")
    model_opts(s)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("render", help="SVG of the boundary curve")
    s.add_argument("target")
    s.add_argument("--out")
    s.add_argument("--grid", type=int, default=512)
    s.add_argument("--box", help="x0,y0,x1,y1")
    s.add_argument("--vars")
    model_opts(s)
    s.set_defaults(func=cmd_render)

    s = sub.add_parser("verify", help="check expected facts")
    s.add_argument("name", help="entry name or 'all'")
    model_opts(s)
    s.set_defaults(func=cmd_verify)
    return p


EXIT_FOR = {
    NotAdmissible: EXIT_NOT_ADMISSIBLE,
    EmptySolution: EXIT_NOT_ADMISSIBLE,
    ParseError: EXIT_PARSE,
    UnknownName: EXIT_PARSE,
    ParamOutOfRange: EXIT_PARSE,
}


def run(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(argv)
    except SystemExit as e:
        return EXIT_PARSE if e.code else EXIT_OK
    try:
        if args.seed is None:
            args.seed = default_seed()
        if extra and args.command in ("catalog",) and args.action == "list":
            raise UsageError(f"unexpected arguments {extra}")
        return args.func(args, extra, out)
    except PolydiffError as e:
        code = next((c for t, c in EXIT_FOR.items() if isinstance(e, t)), EXIT_VERIFY)
        err.write(json.dumps({"error": e.code, "message": str(e)}) + "\n")
        return code
    except OSError as e:
        err.write(json.dumps({"error": "IO", "message": str(e)}) + "\n")
        return EXIT_IO


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
