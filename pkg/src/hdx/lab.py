"""Experiment harness: configured parameter grids, per-trial records, aggregation.

Every trial is a pure function of ``(experiment, params, seed)``.  Trials that
check a theorem set ``passed`` to a bool; statistical trials leave it None and
feed the trend tables instead.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Iterable

import numpy as np
import tomli

from . import cochain as cc
from .complex import Complex, as_cell, complete_complex, link
from .spectral import Graph, spectrum
from .steiner import StopRule, counter_window_stats, derive_seed, greedy_packing, instrument, sample_model

SCHEMA = "hdx.v1"


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    grid: dict[str, tuple]
    trials: int = 1
    seed: int = 0
    budget: int = cc.DEFAULT_BUDGET
    output: str = "results"

    def cells(self) -> list[dict[str, Any]]:
        keys = sorted(self.grid)
        return [dict(zip(keys, vals)) for vals in itertools.product(*(self.grid[k] for k in keys))]


def load_configs(path: str) -> list[ExperimentConfig]:
    """Read a TOML file with top-level defaults and ``[[experiment]]`` tables."""
    with open(path, "rb") as fh:
        raw = tomli.load(fh)
    return configs_from_dict(raw)


def configs_from_dict(raw: dict) -> list[ExperimentConfig]:
    seed = int(raw.get("seed", 0))
    budget = int(raw.get("budget", cc.DEFAULT_BUDGET))
    output = str(raw.get("output", "results"))
    out = []
    for table in raw.get("experiment", []):
        table = dict(table)
        name = table.pop("name", None)
        if name not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}")
        trials = int(table.pop("trials", 1))
        exp_seed = int(table.pop("seed", seed))
        grid = {k: tuple(v) if isinstance(v, list) else (v,) for k, v in table.items()}
        out.append(ExperimentConfig(name, grid, trials, exp_seed, budget, output))
    return out


def trial_seed(master: int, name: str, params: dict, trial: int) -> int:
    tag = zlib.crc32(json.dumps([name, params], sort_keys=True).encode())
    return derive_seed(derive_seed(master, tag), trial)


@dataclass(frozen=True)
class TrialRecord:
    experiment: str
    params: dict[str, Any]
    seed: int
    values: dict[str, Any]
    passed: bool | None = None
    flags: tuple[str, ...] = ()
    wall: float = 0.0

    def sort_key(self):
        return (self.experiment, json.dumps(self.params, sort_keys=True), self.seed)


def _num(x) -> float | None:
    if isinstance(x, bool) or x is None:
        return None
    if isinstance(x, (int, float, Fraction, np.integer, np.floating)):
        return float(x)
    return None


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".12g")
    return str(x)


# -- experiments -------------------------------------------------------------

def codim2_links(n: int, d: int, block_sets: Iterable[Iterable[tuple[int, ...]]]) -> dict[tuple, list[tuple[int, int]]]:
    """Edges of the link of every (d-2)-cell, read straight off the top cells."""
    links: dict[tuple, list[tuple[int, int]]] = {}
    for blocks in block_sets:
        for tau in blocks:
            for pair in itertools.combinations(tau, 2):
                rho = tuple(v for v in tau if v not in pair)
                links.setdefault(rho, []).append(pair)
    return links


def link_lambda_trial(params: dict, seed: int, budget: int) -> TrialRecord:
    n, d, k = params["n"], params["d"], params["k"]
    sample = sample_model(n, d, k, seed, completion=bool(params.get("complete", False)))
    links = codim2_links(n, d, (s.blocks for s in sample.systems))
    rhos = list(itertools.combinations(range(n), d - 1))
    limit = params.get("rho_sample")
    if limit and limit < len(rhos):
        pick = np.random.default_rng(seed).choice(len(rhos), limit, replace=False)
        rhos = [rhos[i] for i in sorted(pick)]
    lams, empty, disconnected = [], 0, 0
    for rho in rhos:
        edges = links.get(rho)
        if not edges:
            empty += 1
            lams.append(1.0)
            continue
        rep = spectrum(Graph.from_edges(n, set(edges)), method="lapack")
        disconnected += not rep.connected
        lams.append(rep.lam)
    flags = ("empty_link",) if empty else ()
    values = {
        "max_lambda": max(lams),
        "median_lambda": float(np.median(lams)),
        "min_lambda": min(lams),
        "links": len(rhos),
        "empty_links": empty,
        "disconnected_links": disconnected,
        "complete_systems": sum(s.complete for s in sample.systems),
    }
    return TrialRecord("link_lambda", params, seed, values, None, flags)


def _min_ratio_exhaustive(L: Complex, j: int, c: Fraction) -> tuple[Fraction | None, int]:
    table = cc.weights(L)
    den_lo, scale = table.denominator(j), Fraction(table.denominator(j), table.denominator(j + 1))
    best, tested = None, 0
    for block in cc.scan_classes(L, j):
        keep = block.class_num * c.denominator > c.numerator * den_lo
        tested += int(keep.sum())
        if not keep.any():
            continue
        sub = cc.ClassBlock(block.reps[keep], block.delta_num[keep], block.class_num[keep])
        cand = cc._best_ratio(sub, scale)
        if cand and (best is None or cand[0] < best):
            best = cand[0]
    return best, tested


def link_expansion_trial(params: dict, seed: int, budget: int) -> TrialRecord:
    """Minimum ||delta_rho A|| / ||[A]|| over A with ||[A]|| > c in one sampled link."""
    n, d, k, j = params["n"], params["d"], params["k"], params["rho_dim"]
    c = Fraction(str(params.get("c", 0)))
    samples = int(params.get("samples", 200))
    if not -1 <= j <= d - 3:
        raise ValueError(f"rho_dim must lie in [-1, d-3], got {j}")
    rng = np.random.default_rng(seed)
    if k == 0:
        X = complete_complex(n, d)
    else:
        X = sample_model(n, d, k, seed, completion=bool(params.get("complete", False))).complex
    rho = () if j == -1 else X.cells(j)[int(rng.integers(X.size(j)))]
    L, _ = link(X, rho)
    cdim = L.d - 1
    values: dict[str, Any] = {"rho": " ".join(map(str, rho)), "link_cells": L.size(cdim)}
    if c >= 1:
        values.update(method="vacuous", min_ratio=None, tested=0)
        return TrialRecord("link_expansion", params, seed, values, None, ("vacuous",))
    basis = cc.coboundary_basis(L, cdim)
    if cc.enumerable(L, cdim, budget):
        best, tested = _min_ratio_exhaustive(L, cdim, c)
        values.update(method="exhaustive", tested=tested, class_norm_exact=True)
        flags: tuple[str, ...] = ()
    else:
        best, tested, tries, exact_all = None, 0, 0, True
        N = L.size(cdim)
        while tested < samples and tries < 50 * samples:
            tries += 1
            bits = int.from_bytes(rng.bytes((N + 7) // 8), "little") & ((1 << N) - 1)
            A = cc.Cochain(cdim, bits, N)
            cn, exact = cc.class_norm(L, A, basis, seed=int(rng.integers(1 << 31)))
            if cn <= c:
                continue
            exact_all &= exact
            tested += 1
            r = cc.norm(L, cc.coboundary(L, A)) / cn
            best = r if best is None else min(best, r)
        values.update(method="sampled", tested=tested, class_norm_exact=exact_all)
        flags = () if tested >= samples else ("partial",)
    values["min_ratio"] = best
    return TrialRecord("link_expansion", params, seed, values, None, flags)


def complete_expansion_certificate(n: int, d: int, budget: int = cc.DEFAULT_BUDGET) -> tuple[bool, Fraction, Fraction | None]:
    """Check |delta A| >= ||[A]|| * C(n, d+1) for every (d-1)-cochain of K_n^d.

    Returns ``(holds, min slack over all cochains, min slack over nontrivial
    classes)``.  Slack is constant on classes, so one representative each suffices.
    """
    X = complete_complex(n, d)
    j = d - 1
    if cc.transversal_size(X, j) > budget:
        raise OverflowError(f"certificate needs {cc.transversal_size(X, j)} classes, budget {budget}")
    top, mid = math.comb(n, d + 1), math.comb(n, d)
    # every (d-1)-cell has the same weight 1/C(n,d), so ||[A]|| C(n,d+1) = |[A]| C(n,d+1)/C(n,d)
    best = best_nontrivial = None
    for block in cc.scan_classes(X, j, counting=True):
        slack = block.delta_num * mid - block.class_num * top
        lo = int(slack.min())
        best = lo if best is None else min(best, lo)
        nz = slack[block.class_num > 0]
        if len(nz):
            m = int(nz.min())
            best_nontrivial = m if best_nontrivial is None else min(best_nontrivial, m)
    return (
        best >= 0,
        Fraction(best, mid),
        None if best_nontrivial is None else Fraction(best_nontrivial, mid),
    )


def certificate_trial(params: dict, seed: int, budget: int) -> TrialRecord:
    holds, slack, slack_nt = complete_expansion_certificate(params["n"], params["d"], budget)
    values = {"min_slack": slack, "min_slack_nontrivial": slack_nt}
    return TrialRecord("certificate", params, seed, values, holds)


def intersection_trial(params: dict, seed: int, budget: int) -> TrialRecord:
    """Split delta^{K_rho} A over the systems and check the H_i bookkeeping."""
    n, d, k, r = params["n"], params["d"], params["k"], params.get("rho_size", 0)
    c = Fraction(str(params.get("c", "0.1")))
    if not 0 <= r <= d - 2:
        raise ValueError("need 0 <= rho_size <= d - 2")
    rng = np.random.default_rng(seed)
    sample = sample_model(n, d, k, seed, completion=bool(params.get("complete", False)))
    rho = tuple(sorted(int(v) for v in rng.choice(n, r, replace=False)))
    L, relabel = link(sample.complex, rho)
    new_id = {old: new for new, old in enumerate(relabel)}
    K = complete_complex(n - r, d - r)
    j = d - r - 1
    basis = cc.coboundary_basis(K, j)
    N = K.size(j)
    for _ in range(1000):
        A = cc.Cochain(j, int.from_bytes(rng.bytes((N + 7) // 8), "little") & ((1 << N) - 1), N)
        cn, exact = cc.class_norm(K, A, basis)
        if cn >= c:
            break
    else:
        return TrialRecord("intersection", params, seed, {"rho": list(rho)}, None, ("no_sample",))
    F = set(cc.coboundary(K, A).cells(K))
    rset = set(rho)
    Y = [
        {tuple(new_id[v] for v in b if v not in rset) for b in s.blocks if rset.issubset(b)}
        for s in sample.systems
    ]
    H, seen = [], set()
    for Yi in Y:
        H.append((F & Yi) - seen)
        seen |= Yi
    union_h = set().union(*H)
    delta_rho = set(cc.coboundary(L, cc.Cochain(j, A.bits, N)).cells(L))
    disjoint = sum(len(h) for h in H) == len(union_h)
    inside = union_h <= delta_rho
    equal = (F & set().union(*Y)) == union_h
    denom = c * k * cn * n ** (d - r)
    values = {
        "rho": " ".join(map(str, rho)),
        "class_norm": cn,
        "class_norm_exact": exact,
        "delta_size": len(F),
        "union_h": len(union_h),
        "h_sizes": " ".join(str(len(h)) for h in H),
        "ratio": float(Fraction(len(union_h)) / denom) if denom else None,
    }
    return TrialRecord("intersection", params, seed, values, disjoint and inside and equal)


def forbidden_bound_trial(params: dict, seed: int, budget: int) -> TrialRecord:
    n, d, r = params["n"], params["d"], params.get("rho_size", 0)
    stop = StopRule.parse(params.get("stop", "maximal"))
    state = greedy_packing(n, d, seed, stop)
    rng = np.random.default_rng(seed ^ 0x9E3779B97F4A7C15)
    rho = tuple(sorted(int(v) for v in rng.choice(n, r, replace=False)))
    rec = instrument(state, rho)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rec.bound > 0, rec.forbidden / np.maximum(rec.bound, 1), 0.0)
    values = {
        "rho": " ".join(map(str, rho)),
        "steps": state.step,
        "uncovered": state.uncovered,
        "max_ratio": float(ratio.max()) if len(ratio) else 0.0,
        "violations": len(rec.violations),
    }
    return TrialRecord("forbidden_bound", params, seed, values, rec.holds)


def counter_window_trial(params: dict, seed: int, budget: int) -> TrialRecord:
    row = counter_window_stats(int(params.get("runs", 20)), params["n"], params["d"], params.get("rho_size", 0),
                        float(params["alpha"]), seed)
    values = {
        "window_lo": row.window[0],
        "window_hi": row.window[1],
        "freq_both": row.freq_both,
        "freq_top": row.freq_top,
        "freq_below": row.freq_below,
    }
    flags = ("empty_window",) if row.freq_both is None else ()
    return TrialRecord("counter_window", params, seed, values, None, flags)


def complete_h_trial(params: dict, seed: int, budget: int) -> TrialRecord:
    n, d = params["n"], params["d"]
    j = params.get("j", d - 1)
    rep = cc.expansion_constant(complete_complex(n, d), j, budget, seed=seed)
    values = {"h": rep.h, "exact": rep.exact, "classes": rep.classes_examined}
    return TrialRecord("complete_h", params, seed, values, None, () if rep.exact else ("upper_bound",))


EXPERIMENTS: dict[str, Callable[[dict, int, int], TrialRecord]] = {
    "link_lambda": link_lambda_trial,
    "link_expansion": link_expansion_trial,
    "certificate": certificate_trial,
    "intersection": intersection_trial,
    "forbidden_bound": forbidden_bound_trial,
    "counter_window": counter_window_trial,
    "complete_h": complete_h_trial,
}


def run_trial(name: str, params: dict, seed: int, budget: int = cc.DEFAULT_BUDGET) -> TrialRecord:
    t0 = time.perf_counter()
    rec = EXPERIMENTS[name](params, seed, budget)
    return TrialRecord(rec.experiment, rec.params, rec.seed, rec.values, rec.passed, rec.flags,
                       time.perf_counter() - t0)


def _run_item(item):
    return run_trial(*item)


def run_experiment(config: ExperimentConfig, threads: int | None = None) -> list[TrialRecord]:
    items = [
        (config.name, params, trial_seed(config.seed, config.name, params, t), config.budget)
        for params in config.cells()
        for t in range(config.trials)
    ]
    threads = threads or os.cpu_count() or 1
    if threads > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(_run_item, items))
    else:
        records = [_run_item(it) for it in items]
    return sorted(records, key=TrialRecord.sort_key)


# -- aggregation -------------------------------------------------------------

QUANTILES = (("min", 0.0), ("q25", 0.25), ("median", 0.5), ("q75", 0.75), ("max", 1.0))


@dataclass
class Report:
    records: list[TrialRecord]
    cells: list[dict] = field(default_factory=list)
    trends: list[dict] = field(default_factory=list)
    plots: dict[str, dict[str, list[tuple[float, float, float]]]] = field(default_factory=dict)

    @property
    def failures(self) -> list[TrialRecord]:
        return [r for r in self.records if r.passed is False]

    @property
    def hard_checks(self) -> int:
        return sum(r.passed is not None for r in self.records)

    @property
    def ok(self) -> bool:
        return not self.failures

    def csv(self) -> str:
        return records_csv(self.records)

    def summary(self) -> dict:
        return {
            "schema": SCHEMA,
            "records": len(self.records),
            "hard_assertions": {
                "checked": self.hard_checks,
                "failed": len(self.failures),
                "failures": [{"experiment": r.experiment, "params": r.params, "seed": r.seed} for r in self.failures],
            },
            "cells": self.cells,
            "trends": self.trends,
            "plots": {k: {s: [list(t) for t in pts] for s, pts in v.items()} for k, v in self.plots.items()},
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True, indent=1) + "\n"


def records_csv(records: Iterable[TrialRecord]) -> str:
    """One row per record, sorted; timing is left out so reruns compare equal."""
    records = sorted(records, key=TrialRecord.sort_key)
    pkeys = sorted({k for r in records for k in r.params})
    vkeys = sorted({k for r in records for k in r.values})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["experiment", "seed", "passed", "flags"] + pkeys + vkeys)
    for r in records:
        w.writerow(
            [r.experiment, r.seed, _fmt(r.passed), ";".join(r.flags)]
            + [_fmt(r.params.get(k)) for k in pkeys]
            + [_fmt(r.values.get(k)) for k in vkeys]
        )
    return buf.getvalue()


def _quantiles(xs: list[float]) -> dict[str, float]:
    arr = np.asarray(xs, dtype=float)
    return {name: round(float(np.quantile(arr, q)), 12) for name, q in QUANTILES}


def report(records: Iterable[TrialRecord]) -> Report:
    """Quantile tables per parameter cell, trend tables and plot series."""
    records = sorted(records, key=TrialRecord.sort_key)
    groups: dict[tuple, list[TrialRecord]] = {}
    for r in records:
        groups.setdefault((r.experiment, json.dumps(r.params, sort_keys=True)), []).append(r)
    cells = []
    for (name, pjson), recs in groups.items():
        metrics = {}
        for key in sorted({k for r in recs for k in r.values}):
            xs = [v for v in (_num(r.values.get(key)) for r in recs) if v is not None]
            if xs:
                metrics[key] = _quantiles(xs)
        cells.append({
            "experiment": name,
            "params": json.loads(pjson),
            "trials": len(recs),
            "passed": sum(r.passed is True for r in recs),
            "failed": sum(r.passed is False for r in recs),
            "metrics": metrics,
        })
    out = Report(records, cells)
    _trend(out, "link_lambda", "k", "max_lambda", "non_increasing", "lambda_vs_k")
    _trend(out, "complete_h", "n", "h", None, "h_vs_n")
    _trend(out, "counter_window", "n", "freq_both", "non_decreasing", None)
    return out


def _trend(out: Report, name: str, x: str, metric: str, direction: str | None, plot: str | None) -> None:
    series: dict[str, list[tuple[float, float, float]]] = {}
    for cell in out.cells:
        if cell["experiment"] != name or metric not in cell["metrics"] or x not in cell["params"]:
            continue
        rest = {k: v for k, v in cell["params"].items() if k != x}
        label = ",".join(f"{k}={v}" for k, v in sorted(rest.items()))
        q = cell["metrics"][metric]
        series.setdefault(label, []).append(
            (float(cell["params"][x]), q["median"], round((q["q75"] - q["q25"]) / 2, 12))
        )
    for label in series:
        series[label].sort()
    if plot and series:
        out.plots[plot] = series
    if direction:
        for label, pts in sorted(series.items()):
            ys = [p[1] for p in pts]
            ok = all(b <= a for a, b in zip(ys, ys[1:])) if direction == "non_increasing" else \
                all(b >= a for a, b in zip(ys, ys[1:]))
            out.trends.append({
                "experiment": name, "series": label, "x": x, "metric": f"median {metric}",
                "points": [[p[0], p[1]] for p in pts], "direction": direction, "holds": ok,
            })


def write_outputs(rep: Report, outdir: str, figures: bool = True) -> list[str]:
    os.makedirs(outdir, exist_ok=True)
    paths = []
    for fname, text in (("records.csv", rep.csv()), ("summary.json", rep.summary_json())):
        p = os.path.join(outdir, fname)
        with open(p, "w", newline="") as fh:
            fh.write(text)
        paths.append(p)
    if figures:
        from .plotting import plot_series

        labels = {"lambda_vs_k": ("k", "median max link lambda"), "h_vs_n": ("n", "median h")}
        for key, series in sorted(rep.plots.items()):
            p = os.path.join(outdir, f"{key}.png")
            plot_series(series, *labels.get(key, ("x", "y")), p)
            paths.append(p)
    return paths
