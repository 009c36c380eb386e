"""Acceptance gate: one test per criterion, each at its stated tolerance.

The terminal summary prints a PASS/FAIL line per criterion (see conftest).
"""

import subprocess
import sys
import time
from fractions import Fraction
from itertools import combinations
from math import ceil, comb, sqrt

import numpy as np
import pytest

import oracles
from hdx import cochain as cc
from hdx import lab
from hdx.cli import main
from hdx.complex import ComplexBuilder, Design, complete_complex, is_steiner, loads_complex
from hdx.spectral import Graph, cheeger_floor, graph_complex, mixing_check, spectrum


def random_corpus(count, seed):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        d = int(rng.integers(1, 4))
        n = int(rng.integers(d + 1, 13))
        pool = list(combinations(range(n), d + 1))
        m = int(rng.integers(1, min(len(pool), 40) + 1))
        top = [pool[i] for i in rng.choice(len(pool), m, replace=False)]
        skel = int(rng.integers(-1, d))
        yield ComplexBuilder(n, d).complete_skeleton(skel).add_all(top).finalize(), rng


@pytest.mark.criterion("1 delta o delta = 0 on 1000 random complexes, < 10 s")
def test_criterion_1_cochain_complex_law():
    t0 = time.perf_counter()
    failures = checked = 0
    for X, rng in random_corpus(1000, 1):
        for j in range(-1, X.d - 1):
            N = X.size(j)
            A = cc.Cochain(j, int.from_bytes(rng.bytes((N + 7) // 8), "little") & ((1 << N) - 1), N)
            failures += bool(cc.coboundary(X, cc.coboundary(X, A)))
            checked += 1
    elapsed = time.perf_counter() - t0
    print(f"criterion 1: {checked} checks, {failures} failures, {elapsed:.2f} s")
    assert failures == 0 and checked > 1000
    assert elapsed < 10


@pytest.mark.criterion("2 weights sum to 1 exactly per dimension")
def test_criterion_2_norm_normalization():
    failures = 0
    for X, _ in random_corpus(1000, 1):
        table = cc.weights(X)
        for j in range(-1, X.d + 1):
            total = Fraction(sum(table.numerators(j)), table.denominator(j))
            failures += total != 1
    assert failures == 0


@pytest.mark.criterion("3 h0(K_n) = 2 ceil(n/2)/(n-1), n = 3..8, oracle for n <= 5, < 30 s")
def test_criterion_3_complete_graph_closed_form():
    t0 = time.perf_counter()
    for n in range(3, 9):
        rep = cc.expansion_constant(complete_complex(n, 1), 0)
        assert rep.exact and rep.method == "exhaustive"
        assert rep.h == Fraction(2 * ceil(n / 2), n - 1)
        if n <= 5:
            assert oracles.graph_h0(n, list(combinations(range(n), 2))) == rep.h
    assert time.perf_counter() - t0 < 30


def all_cochain_slack(n):
    """min over every 1-cochain A of K_n^2 of |delta A| C(n,2) - min|A + B^1| C(n,3).

    Straight numpy enumeration of all 2^C(n,2) cochains; shares no code with the package.
    """
    edges = list(combinations(range(n), 2))
    eid = {e: i for i, e in enumerate(edges)}
    tris = list(combinations(range(n), 3))
    A = np.arange(1 << len(edges), dtype=np.int64)
    bit = lambda i: (A >> i) & 1  # noqa: E731
    delta = sum((bit(eid[(a, b)]) ^ bit(eid[(a, c)]) ^ bit(eid[(b, c)])) for a, b, c in tris)
    B = set()
    for S in range(1 << n):
        B.add(sum(1 << eid[(a, b)] for a, b in edges if ((S >> a) ^ (S >> b)) & 1))
    pop = lambda v: np.array([int(x).bit_count() for x in v])  # noqa: E731
    table = np.array([bin(i).count("1") for i in range(1 << 16)], dtype=np.int64)
    cls = None
    for b in B:
        x = A ^ b
        w = table[x & 0xFFFF] + table[(x >> 16) & 0xFFFF]
        cls = w if cls is None else np.minimum(cls, w)
    slack = delta * comb(n, 2) - cls * comb(n, 3)
    return int(slack.min()), len(A)


@pytest.mark.criterion("4 |delta A| >= ||[A]|| C(n,3) on K_n^2, n in {5,6}, exhaustive, < 2 min")
def test_criterion_4_complete_complex_certificate():
    t0 = time.perf_counter()
    for n in (5, 6):
        holds, slack, _ = lab.complete_expansion_certificate(n, 2)
        direct, count = all_cochain_slack(n)
        assert count == 2 ** comb(n, 2)
        print(f"criterion 4: n={n} min slack {slack} (direct {Fraction(direct, comb(n, 2))} over {count} cochains)")
        assert holds and slack >= 0
        assert Fraction(direct, comb(n, 2)) == slack
    assert time.perf_counter() - t0 < 120


@pytest.mark.criterion("5 generate --complete on, (7,2),(9,2),(13,2): >= 95% of 20 seeds within 10 s")
def test_criterion_5_steiner_generation(tmp_path, capsys):
    for n in (7, 9, 13):
        ok = 0
        for seed in range(20):
            prefix = tmp_path / f"s{n}_{seed}"
            t0 = time.perf_counter()
            code = main(["generate", "-n", str(n), "-d", "2", "-k", "1", "--complete", "on",
                         "--seed", str(seed), "--time-budget", "10", "-o", str(prefix)])
            elapsed = time.perf_counter() - t0
            capsys.readouterr()
            if code != 0 or elapsed > 10:
                continue
            X = loads_complex((tmp_path / f"s{n}_{seed}.hdx").read_text())
            ok += is_steiner(Design(n, 3, 2, 1, X.top_cells), n, 2)[0]
        print(f"criterion 5: n={n} {ok}/20")
        assert ok >= 19


@pytest.mark.criterion("6 |Forbidden(t)| bound at every step of 100 greedy runs")
def test_criterion_6_forbidden_bound():
    rng = np.random.default_rng(6)
    failures = runs = steps = 0
    for i in range(100):
        d = 2 if i % 2 == 0 else 3
        n = int(rng.integers(d + 4, 31))
        r = int(rng.integers(0, d - 1))
        rec = lab.run_trial("forbidden_bound", {"n": n, "d": d, "rho_size": r}, int(rng.integers(2**62)))
        failures += rec.passed is not True
        runs += 1
        steps += rec.values["steps"] + 1
    print(f"criterion 6: {runs} runs, {steps} steps checked, {failures} failures")
    assert failures == 0


@pytest.mark.criterion("7 lambda(K_n) = 1/(n-1) for n = 3..50, matchings lambda = 1, sqrt(deg) residual <= 1e-9")
def test_criterion_7_spectral():
    for n in range(3, 51):
        rep = spectrum(Graph.from_edges(n, combinations(range(n), 2)))
        assert abs(rep.lam - 1 / (n - 1)) <= 1e-9
        assert rep.sqrt_deg_residual <= 1e-9 and rep.residual <= 1e-8
    for m in (1, 2, 5, 20):
        rep = spectrum(Graph.from_edges(2 * m, [(2 * i, 2 * i + 1) for i in range(m)]))
        assert abs(rep.lam - 1) <= 1e-9 and rep.sqrt_deg_residual <= 1e-9


@pytest.mark.criterion("8 mixing lemma with own lambda on 50 matching unions x 200 pairs")
def test_criterion_8_mixing():
    rng = np.random.default_rng(8)
    failures = 0
    for _ in range(50):
        n = 2 * int(rng.integers(3, 41))
        k = int(rng.integers(1, 6))
        edges = set()
        for _ in range(k):
            p = rng.permutation(n)
            edges.update(tuple(sorted((int(p[2 * i]), int(p[2 * i + 1])))) for i in range(n // 2))
        G = Graph.from_edges(n, edges)
        lam = spectrum(G).lam
        for _ in range(200):
            A = np.flatnonzero(rng.random(n) < rng.random()).tolist()
            B = np.flatnonzero(rng.random(n) < rng.random()).tolist()
            failures += not mixing_check(G, A, B, lam)[0]
    assert failures == 0


@pytest.mark.criterion("9 median max-link lambda non-increasing in k; k=10 median <= 2 sqrt(k-1)/k + 0.15; < 10 min")
def test_criterion_9_lambda_vs_k():
    t0 = time.perf_counter()
    cfg = lab.ExperimentConfig("link_lambda", {"n": (100,), "d": (2,), "k": (3, 5, 10, 20)}, trials=50, seed=9)
    rep = lab.report(lab.run_experiment(cfg, threads=1))
    elapsed = time.perf_counter() - t0
    med = {c["params"]["k"]: c["metrics"]["max_lambda"]["median"] for c in rep.cells}
    print(f"criterion 9: medians {med}, {elapsed:.0f} s")
    ks = sorted(med)
    assert all(med[b] <= med[a] for a, b in zip(ks, ks[1:]))
    assert med[10] <= 2 * sqrt(9) / 10 + 0.15
    assert elapsed < 600


@pytest.mark.criterion("10 exact h0 >= (1 - lambda)/2 on 100 connected graphs, n <= 10")
def test_criterion_10_cheeger():
    rng = np.random.default_rng(10)
    done = 0
    while done < 100:
        n = int(rng.integers(2, 11))
        p = rng.uniform(0.2, 0.9)
        edges = [e for e in combinations(range(n), 2) if rng.random() < p]
        G = Graph.from_edges(n, edges)
        if not edges or len(G.components()) != 1 or G.degrees.min() == 0:
            continue
        h = cc.expansion_constant(graph_complex(G), 0).h
        assert h is not None and h >= Fraction(cheeger_floor(spectrum(G).lam)) - Fraction(1, 10**12)
        done += 1


def _cli(*args, cwd):
    return subprocess.run([sys.executable, "-m", "hdx.cli", *map(str, args)], cwd=cwd,
                          capture_output=True, check=False)


@pytest.mark.criterion("11 byte-identical regeneration across two processes")
def test_criterion_11_determinism(tmp_path):
    for i, params in enumerate([
        ("-n", 13, "-d", 2, "-k", 3, "--complete", "on", "--seed", 123),
        ("-n", 40, "-d", 2, "-k", 4, "--seed", 77),
        ("-n", 14, "-d", 3, "-k", 2, "--stop", "steps=20", "--seed", 5),
    ]):
        outs = []
        for run in range(2):
            d = tmp_path / f"{i}_{run}"
            d.mkdir()
            res = _cli("generate", *params, "-o", "m", cwd=d)
            assert res.returncode == 0, res.stderr
            outs.append(((d / "m.hdx").read_bytes(), (d / "m.json").read_bytes(), res.stdout))
        assert outs[0] == outs[1]
    (tmp_path / "k.hdx").write_text("hdx v1 n=6 d=2 skeleton=2\nend\n")
    a = _cli("expand", "k.hdx", "-j", 1, cwd=tmp_path)
    b = _cli("expand", "k.hdx", "-j", 1, cwd=tmp_path)
    assert a.returncode == 0 and a.stdout == b.stdout and b'"exact": true' in a.stdout
