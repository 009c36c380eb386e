"""Command-line entry point: ``hdx <command> ...``.

Exit codes: 0 ok / property holds, 1 property fails, 2 usage, 3 parse error,
4 budget exhausted.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction

import numpy as np

from . import __version__
from . import cochain as cc
from .complex import (
    Complex,
    ParseError,
    design_of_complex,
    dumps_complex,
    is_design,
    is_steiner,
    link,
    loads_complex,
    loads_design,
    max_degree,
    steiner_admissible,
)
from .spectral import Graph, skeleton_graph, spectrum

OK, FAIL, USAGE, PARSE, BUDGET = 0, 1, 2, 3, 4
SCHEMA = "hdx.v1"


class UsageError(Exception):
    pass


class BudgetError(Exception):
    pass


# -- output ------------------------------------------------------------------

def _plain(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (list, tuple)):
        return " ".join(str(_plain(v)) for v in x)
    if isinstance(x, bool):
        return "true" if x else "false"
    if x is None:
        return ""
    return x


def emit(payload: dict, fmt: str, out=None) -> None:
    out = out or sys.stdout
    if fmt == "json":
        out.write(json.dumps(payload, sort_keys=True, indent=1) + "\n")
        return
    scalars = {k: v for k, v in sorted(payload.items()) if not isinstance(v, dict)}
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "value"])
        for k, v in scalars.items():
            w.writerow([k, _plain(v)])
        out.write(buf.getvalue())
    else:
        for k, v in scalars.items():
            out.write(f"{k}: {_plain(v)}\n")


def _seed(args) -> int:
    if args.seed is None:
        args.seed = int(np.random.SeedSequence().generate_state(1, np.uint64)[0] >> 1)
        print(f"seed={args.seed}", file=sys.stderr)
    return args.seed


def _read(path: str) -> str:
    try:
        if path == "-":
            return sys.stdin.read()
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _load(path: str):
    """A complex, a design or a graph, chosen by the first line."""
    text = _read(path)
    head = text.split("\n", 1)[0].split()
    if head[:1] == ["hdx"]:
        return loads_complex(text)
    if head[:1] == ["design"]:
        return loads_design(text)
    return Graph.loads(text)


def _load_complex(path: str) -> Complex:
    obj = _load(path)
    if isinstance(obj, Graph):
        from .spectral import graph_complex

        return graph_complex(obj)
    if not isinstance(obj, Complex):
        raise UsageError("expected a complex or graph file")
    return obj


def _rho(text: str | None):
    if not text:
        return ()
    try:
        return tuple(sorted(int(v) for v in text.replace(",", " ").split()))
    except ValueError:
        raise UsageError(f"bad cell {text!r}") from None


def _write(path: str, text: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(text)


# -- commands ------------------------------------------------------------------

def cmd_generate(args) -> int:
    from .steiner import StopRule, sample_model

    seed = _seed(args)
    try:
        stop = StopRule.parse(args.stop)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if not args.n > args.d >= 1 or args.k < 1:
        raise UsageError("need n > d >= 1 and k >= 1")
    complete = args.complete == "on"
    if complete and not steiner_admissible(args.n, args.d):
        raise UsageError(f"no ({args.n},{args.d})-Steiner system exists: n fails the divisibility conditions")
    sample = sample_model(args.n, args.d, args.k, seed, complete, stop, time_budget=args.time_budget)
    prefix = args.out or f"x_n{args.n}_d{args.d}_k{args.k}_s{seed}"
    _write(prefix + ".hdx", sample.dumps())
    _write(prefix + ".json", sample.sidecar_json())
    emit({
        "schema": SCHEMA,
        "n": args.n, "d": args.d, "k": args.k, "seed": seed,
        "stop": str(stop), "completion": complete,
        "complete_systems": sum(s.complete for s in sample.systems),
        "top_cells": sample.complex.size(args.d),
        "complex_file": prefix + ".hdx", "sidecar_file": prefix + ".json",
    }, args.format)
    if complete and not sample.all_complete:
        print("completion budget exhausted; partial systems written", file=sys.stderr)
        return BUDGET
    return OK


def cmd_verify(args) -> int:
    obj = _load(args.file)
    if args.mode in ("design", "steiner"):
        if isinstance(obj, Complex):
            D = design_of_complex(obj)
        elif isinstance(obj, Graph):
            raise UsageError("a graph file is not a design")
        else:
            D = obj
        if args.mode == "design":
            holds, witness = is_design(D)
        else:
            n = D.n if args.n is None else args.n
            d = D.q - 1 if args.d is None else args.d
            try:
                holds, witness = is_steiner(D, n, d)
            except ValueError as exc:
                holds, witness = False, None
                print(str(exc), file=sys.stderr)
        payload = {"schema": SCHEMA, "mode": args.mode, "n": D.n, "q": D.q, "r": D.r, "lambda": D.lam,
                   "blocks": len(D.blocks), "holds": holds}
        if witness:
            payload["witness"] = list(witness[0])
            payload["witness_count"] = witness[1]
        emit(payload, args.format)
        return OK if holds else FAIL
    X = _load_complex(args.file)
    if args.k is None or args.eps is None:
        raise UsageError("expander mode needs -k and --eps")
    j = X.d if args.j is None else args.j
    eps = Fraction(args.eps)
    deg = max_degree(X, j - 1) if j >= 0 else 0
    seed = 0 if cc.enumerable(X, j - 1, args.budget) else _seed(args)
    rep = cc.expansion_constant(X, j - 1, args.budget, seed=seed)
    if not rep.exact:
        emit({"schema": SCHEMA, "mode": "expander", "holds": None, "h_upper": rep.h}, args.format)
        return BUDGET
    holds = deg <= args.k and rep.h is not None and rep.h >= eps
    payload = {"schema": SCHEMA, "mode": "expander", "j": j, "k": args.k, "eps": str(eps),
               "max_degree": deg, "h": str(rep.h) if rep.h is not None else None, "holds": holds}
    if rep.argmin is not None:
        payload["witness"] = rep.argmin.to_hex()
    emit(payload, args.format)
    return OK if holds else FAIL


def cmd_expand(args) -> int:
    X = _load_complex(args.file)
    if not -1 <= args.j < X.d:
        raise UsageError(f"j must satisfy -1 <= j < d = {X.d}")
    seed = 0 if cc.enumerable(X, args.j, args.budget) else _seed(args)
    rep = cc.expansion_constant(X, args.j, args.budget, seed=seed)
    payload = rep.to_dict()
    if not rep.exact:
        payload["seed"] = seed
    emit(payload, args.format)
    return OK


def cmd_link(args) -> int:
    X = _load_complex(args.file)
    rho = _rho(args.rho)
    if rho not in X:
        raise UsageError(f"cell {list(rho)} is not in the complex")
    L, relabel = link(X, rho)
    text = dumps_complex(L)
    if args.out:
        _write(args.out, text)
        emit({"schema": SCHEMA, "rho": list(rho), "relabel": list(relabel), "file": args.out}, args.format)
    else:
        sys.stdout.write(text)
    return OK


def cmd_spectrum(args) -> int:
    obj = _load(args.file)
    rho = _rho(args.rho)
    if isinstance(obj, Graph):
        if rho:
            raise UsageError("--rho needs a complex file")
        G = obj
    elif isinstance(obj, Complex):
        if rho not in obj:
            raise UsageError(f"cell {list(rho)} is not in the complex")
        G = skeleton_graph(link(obj, rho)[0]) if rho else skeleton_graph(obj)
    else:
        raise UsageError("expected a complex or graph file")
    if G.m == 0:
        raise UsageError("empty spectrum")
    rep = spectrum(G, method=args.method)
    emit(rep.to_dict(), args.format)
    return OK


def cmd_experiment(args) -> int:
    from . import lab

    configs = lab.load_configs(args.config)
    if args.seed is not None:
        configs = [lab.ExperimentConfig(c.name, c.grid, c.trials, args.seed, c.budget, c.output) for c in configs]
    if args.budget_given:
        configs = [lab.ExperimentConfig(c.name, c.grid, c.trials, c.seed, args.budget, c.output) for c in configs]
    records = []
    for cfg in configs:
        records += lab.run_experiment(cfg, threads=args.threads)
    rep = lab.report(records)
    outdir = args.out or (configs[0].output if configs else "results")
    paths = lab.write_outputs(rep, outdir, figures=not args.no_figures)
    if args.format == "csv":
        sys.stdout.write(rep.csv())
    else:
        summary = rep.summary()
        summary["files"] = paths
        emit(summary, args.format)
    return OK if rep.ok else FAIL


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="master seed (generated and printed when omitted)")
    common.add_argument("--format", choices=("json", "csv", "text"), default="json")
    common.add_argument("--budget", type=int, default=cc.DEFAULT_BUDGET,
                        help="maximum number of classes for exact enumeration")
    common.add_argument("--threads", type=int, default=None, help="worker processes (default: all cores)")

    p = argparse.ArgumentParser(prog="hdx", description="Coboundary expansion toolkit for random Steiner complexes.")
    p.add_argument("--version", action="version", version=f"hdx {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="sample X_{n,k}")
    g.add_argument("-n", type=int, required=True)
    g.add_argument("-d", type=int, required=True)
    g.add_argument("-k", type=int, default=1)
    g.add_argument("--stop", default="maximal", help="maximal | steps=T | uncovered=m")
    g.add_argument("--complete", choices=("on", "off"), default="off")
    g.add_argument("--time-budget", type=float, default=10.0, help="seconds per completion")
    g.add_argument("-o", "--out", help="output prefix for <prefix>.hdx and <prefix>.json")
    g.set_defaults(func=cmd_generate)

    v = sub.add_parser("verify", parents=[common], help="check a design, Steiner or expander property")
    v.add_argument("file")
    v.add_argument("--mode", choices=("design", "steiner", "expander"), default="steiner")
    v.add_argument("-n", type=int)
    v.add_argument("-d", type=int)
    v.add_argument("-j", type=int, help="expander mode: dimension j (degrees of (j-1)-cells, h_{j-1})")
    v.add_argument("-k", type=int)
    v.add_argument("--eps")
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("expand", parents=[common], help="coboundary expansion constant h_j")
    e.add_argument("file")
    e.add_argument("-j", type=int, required=True)
    e.set_defaults(func=cmd_expand)

    lk = sub.add_parser("link", parents=[common], help="write the link of a cell")
    lk.add_argument("file")
    lk.add_argument("--rho", default="", help="vertices of the cell, e.g. '0 3'")
    lk.add_argument("-o", "--out")
    lk.set_defaults(func=cmd_link)

    s = sub.add_parser("spectrum", parents=[common], help="normalized adjacency spectrum of a (link) graph")
    s.add_argument("file")
    s.add_argument("--rho", default="")
    s.add_argument("--method", choices=("jacobi", "lapack"), default="jacobi")
    s.set_defaults(func=cmd_spectrum)

    x = sub.add_parser("experiment", parents=[common], help="run a TOML experiment file")
    x.add_argument("config")
    x.add_argument("-o", "--out", help="output directory (default: config's output)")
    x.add_argument("--no-figures", action="store_true")
    x.set_defaults(func=cmd_experiment)
    return p


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    args = parser.parse_args(argv)
    args.budget_given = "--budget" in argv or any(a.startswith("--budget=") for a in argv)
    if args.threads is not None and args.threads < 1:
        parser.error("--threads must be positive")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"hdx: {exc}", file=sys.stderr)
        return USAGE
    except ParseError as exc:
        print(f"hdx: parse error: {exc}", file=sys.stderr)
        return PARSE
    except (OverflowError, BudgetError) as exc:
        print(f"hdx: budget exhausted: {exc}", file=sys.stderr)
        return BUDGET
    except (ValueError, KeyError) as exc:
        print(f"hdx: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
