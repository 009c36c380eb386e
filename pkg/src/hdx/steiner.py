"""Random greedy packings of d-cells, Steiner-system completion, and X_{n,k}.

The greedy stage picks a uniformly random legal d-cell at every step, a cell
being legal when none of its facets is already covered.  Legality is
monotone (a forbidden cell stays forbidden), so scanning a uniformly random
ordering of all d-cells and keeping each cell that is still legal produces
exactly that process.  ``greedy_packing`` does the scan in numpy blocks.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Iterable

import numpy as np

from .complex import (
    Cell,
    Complex,
    ComplexBuilder,
    as_cell,
    boundary,
    colex_rank,
    dumps_complex,
    steiner_admissible,
)

SCHEMA = "hdx.v1"


def derive_seed(master: int, index: int) -> int:
    """64-bit seed for stream ``index`` under ``master``."""
    lo, hi = np.random.SeedSequence([int(master), int(index)]).generate_state(2, np.uint32)
    return (int(hi) << 32) | int(lo)


@dataclass(frozen=True)
class StopRule:
    kind: str = "maximal"   # "maximal" | "steps" | "uncovered"
    value: int = 0

    def __post_init__(self):
        if self.kind not in ("maximal", "steps", "uncovered") or self.value < 0:
            raise ValueError(f"bad stop rule {self.kind}={self.value}")

    @classmethod
    def parse(cls, text: str) -> "StopRule":
        text = text.strip()
        if text == "maximal":
            return cls()
        key, sep, val = text.partition("=")
        if sep and key in ("steps", "uncovered"):
            try:
                return cls(key, int(val))
            except ValueError:
                pass
        raise ValueError(f"stop rule must be maximal, steps=T or uncovered=m, got {text!r}")

    def __str__(self) -> str:
        return "maximal" if self.kind == "maximal" else f"{self.kind}={self.value}"


@lru_cache(maxsize=8)
def _binom_table(n: int, k: int) -> np.ndarray:
    t = np.zeros((n + 1, k + 2), dtype=np.int64)
    for v in range(n + 1):
        for i in range(k + 2):
            t[v, i] = math.comb(v, i)
    return t


def facet_ranks(cells: np.ndarray, n: int) -> np.ndarray:
    """Colex ranks of the facets of each row of ``cells`` (shape (M, q)) -> (M, q)."""
    M, q = cells.shape
    B = _binom_table(n, q)
    out = np.empty((M, q), dtype=np.int64)
    for drop in range(q):
        keep = [i for i in range(q) if i != drop]
        sub = cells[:, keep]
        out[:, drop] = sum(B[sub[:, i], i + 1] for i in range(q - 1)) if q > 1 else 0
    return out


@lru_cache(maxsize=4)
def _universe(n: int, d: int) -> tuple[np.ndarray, np.ndarray]:
    """All d-cells of range(n) (lexicographic) and their facet ranks."""
    cells = np.array(list(combinations(range(n), d + 1)), dtype=np.int64).reshape(-1, d + 1)
    return cells, facet_ranks(cells, n)


@dataclass
class PackingState:
    """Trajectory of one greedy run: ``chosen[t-1]`` is the cell picked at step t."""

    n: int
    d: int
    seed: int
    stop: StopRule = field(default_factory=StopRule)
    chosen: list[Cell] = field(default_factory=list)
    covered: set[Cell] = field(default_factory=set)
    exhausted: bool = False   # every d-cell was examined: the packing is maximal

    @property
    def step(self) -> int:
        return len(self.chosen)

    @property
    def uncovered(self) -> int:
        return math.comb(self.n, self.d) - len(self.covered)

    def add(self, tau: Cell) -> None:
        facets = boundary(tau)
        if any(f in self.covered for f in facets):
            raise ValueError(f"{tau} is not legal")
        self.chosen.append(tau)
        self.covered.update(facets)


def is_legal(tau: Iterable[int], state: PackingState) -> bool:
    """No facet of ``tau`` lies in the boundary of an already chosen cell."""
    return not any(f in state.covered for f in boundary(as_cell(tau)))


def greedy_packing(n: int, d: int, seed: int, stop: StopRule | None = None) -> PackingState:
    """Random greedy packing of d-cells on ``range(n)``."""
    if not n > d >= 1:
        raise ValueError(f"need n > d >= 1, got n={n}, d={d}")
    stop = stop or StopRule()
    state = PackingState(n, d, seed, stop)
    cells, facets = _universe(n, d)
    total_facets = math.comb(n, d)
    limit = stop.value if stop.kind == "steps" else None

    def done() -> bool:
        if limit is not None and state.step >= limit:
            return True
        return stop.kind == "uncovered" and total_facets - (d + 1) * state.step <= stop.value

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(cells))
    cov = np.zeros(total_facets, dtype=bool)
    pos, block = 0, 32
    stopped = done()
    while pos < len(order) and not stopped:
        idx = order[pos: pos + block]
        pos += len(idx)
        block = min(2 * block, 4096)
        live = idx[~cov[facets[idx]].any(axis=1)]
        for c, fs in zip(live.tolist(), facets[live].tolist()):
            if cov[fs].any():
                continue
            cov[fs] = True
            state.add(tuple(cells[c].tolist()))
            if done():
                stopped = True
                break
    state.exhausted = not stopped
    return state


# -- instrumentation ---------------------------------------------------------

@dataclass
class Instrumentation:
    """Per-step forbidden-set sizes and intersection counters for a fixed rho.

    ``forbidden[t-1]`` is |Forbidden(t)| for t = 1..T+1, ``counts[j][t]`` is
    N_j(t) for t = 0..T, and ``bound[t-1]`` is the right-hand side
    (d+1) n N_{|rho|}(t-1) + (d+1) N_{|rho|-1}(t-1).
    """

    rho: Cell
    forbidden: np.ndarray
    counts: dict[int, np.ndarray]
    bound: np.ndarray
    contributions: list[tuple[int, int, int]]   # (|tau' & rho|, cells added, allowed)

    @property
    def holds(self) -> bool:
        return bool(np.all(self.forbidden <= self.bound)) and all(c <= lim for _, c, lim in self.contributions)

    @property
    def violations(self) -> list[int]:
        return [int(t) + 1 for t in np.flatnonzero(self.forbidden > self.bound)]


def link_frame(n: int, d: int, rho: Cell) -> tuple[np.ndarray, np.ndarray]:
    """All (d-|rho|)-cells tau of the complete complex on range(n) minus rho,
    with the facet ranks of ``tau | rho``."""
    rest = [v for v in range(n) if v not in set(rho)]
    size = d + 1 - len(rho)
    taus = np.array(list(combinations(rest, size)), dtype=np.int64).reshape(-1, size)
    full = np.sort(np.concatenate([taus, np.tile(np.array(rho, dtype=np.int64), (len(taus), 1))], axis=1), axis=1)
    return taus, facet_ranks(full, n)


def instrument(state: PackingState, rho: Iterable[int]) -> Instrumentation:
    """Exact |Forbidden(t)| by enumeration of the link frame, plus N_j(t)."""
    rho = as_cell(rho)
    n, d, r = state.n, state.d, len(rho)
    if r > d - 2:
        raise ValueError(f"|rho| = {r} too large for d = {d} (need |rho| <= d - 2)")
    if rho and rho[-1] >= n:
        raise ValueError("rho outside the vertex range")
    T = state.step
    _, frame_facets = link_frame(n, d, rho)

    cover_time = np.full(math.comb(n, d), T + 10, dtype=np.int64)
    chosen_arr = np.array(state.chosen, dtype=np.int64).reshape(-1, d + 1)
    if T:
        chosen_facets = facet_ranks(chosen_arr, n)
        for t in range(T):
            cover_time[chosen_facets[t]] = t + 1
    first = cover_time[frame_facets].min(axis=1) if len(frame_facets) else np.zeros(0, np.int64)
    # tau is in Forbidden(t) iff some facet of tau | rho was covered by step t - 1
    hist = np.bincount(np.minimum(first, T + 2), minlength=T + 3)
    cum = np.cumsum(hist)
    forbidden = np.array([cum[t - 1] for t in range(1, T + 2)], dtype=np.int64)

    rset = set(rho)
    inter = np.array([len(rset.intersection(c)) for c in state.chosen], dtype=np.int64)
    counts = {}
    for j in range(r + 1):
        counts[j] = np.concatenate([[0], np.cumsum(inter == j)]).astype(np.int64)
    n_top = counts[r]
    n_below = counts[r - 1] if r >= 1 else np.zeros(T + 1, dtype=np.int64)
    bound = np.array([(d + 1) * n * n_top[t - 1] + (d + 1) * n_below[t - 1] for t in range(1, T + 2)], dtype=np.int64)

    # per-cell contributions, for the case analysis behind the bound
    by_facet: dict[int, list[int]] = {}
    for i, fs in enumerate(frame_facets.tolist()):
        for f in fs:
            by_facet.setdefault(f, []).append(i)
    contributions = []
    if T:
        for c, fs in zip(inter.tolist(), chosen_facets.tolist()):
            hit = set()
            for f in fs:
                hit.update(by_facet.get(f, ()))
            allowed = (d + 1) * n if c == r else (d + 1 if c == r - 1 else 0)
            contributions.append((c, len(hit), allowed))
    return Instrumentation(rho, forbidden, counts, bound, contributions)


@dataclass(frozen=True)
class CounterWindowRow:
    n: int
    d: int
    rho_size: int
    alpha: float
    runs: int
    window: tuple[int, int]
    freq_both: float | None      # None when the window holds no integer step
    freq_top: float | None
    freq_below: float | None


def counter_window_stats(runs: int, n: int, d: int, rho_size: int, alpha: float, seed: int = 0) -> CounterWindowRow:
    """Empirical frequency of the counter bounds over the window alpha/2 n^d <= t <= alpha n^d.

        N_{|rho|}(t)   <= 4 (d+1)^(d+1) t / n^|rho|
        N_{|rho|-1}(t) <= 4 (d+1)^(d+2) t / n^(|rho|-1)
    """
    if not 0 < alpha < 1 / (2 * (d + 1) ** (d + 2)):
        raise ValueError(f"alpha must lie in (0, 1/(2(d+1)^(d+2))), got {alpha}")
    if not 0 <= rho_size <= d - 2:
        raise ValueError("need 0 <= |rho| <= d - 2")
    lo = max(1, math.ceil(alpha / 2 * n ** d))
    hi = math.floor(alpha * n ** d)
    if hi < lo:
        return CounterWindowRow(n, d, rho_size, alpha, runs, (lo, hi), None, None, None)
    rho = set(range(rho_size))
    both = top = below = 0
    for run in range(runs):
        state = greedy_packing(n, d, derive_seed(seed, run), StopRule("steps", hi))
        inter = [len(rho.intersection(c)) for c in state.chosen]
        n_top = np.cumsum([x == rho_size for x in inter])
        n_below = np.cumsum([x == rho_size - 1 for x in inter])
        ts = np.arange(lo, min(hi, state.step) + 1)
        ok_top = all(n_top[t - 1] <= 4 * (d + 1) ** (d + 1) * t / n ** rho_size for t in ts)
        ok_below = all(n_below[t - 1] <= 4 * (d + 1) ** (d + 2) * t * n ** (1 - rho_size) for t in ts)
        top += ok_top
        below += ok_below
        both += ok_top and ok_below
    return CounterWindowRow(n, d, rho_size, alpha, runs, (lo, hi), both / runs, top / runs, below / runs)


# -- completion to a Steiner system -------------------------------------------

class _OutOfBudget(Exception):
    pass


@dataclass
class Completion:
    blocks: list[Cell]
    complete: bool
    attempts: int
    nodes: int
    from_scratch: bool


class _Search:
    def __init__(self, n: int, d: int, rng: np.random.Generator, node_limit: int, deadline: float):
        self.n, self.d = n, d
        self.rng = rng
        self.node_limit = node_limit
        self.deadline = deadline
        self.nodes = 0
        self.best: list[Cell] = []

    def candidates(self, sigma: Cell, uncovered: dict) -> list[Cell]:
        out = []
        for v in range(self.n):
            if v in sigma:
                continue
            tau = tuple(sorted(sigma + (v,)))
            if all(f in uncovered for f in boundary(tau)):
                out.append(tau)
        return out

    def run(self, uncovered: dict, blocks: list[Cell]) -> bool:
        if not uncovered:
            return True
        self.nodes += 1
        if self.nodes > self.node_limit or (self.nodes & 63 == 0 and time.monotonic() > self.deadline):
            raise _OutOfBudget
        choice = None
        for sigma in uncovered:
            cand = self.candidates(sigma, uncovered)
            if not cand:
                return False
            if choice is None or len(cand) < len(choice):
                choice = cand
                if len(cand) == 1:
                    break
        for i in self.rng.permutation(len(choice)).tolist():
            tau = choice[i]
            facets = boundary(tau)
            for f in facets:
                del uncovered[f]
            blocks.append(tau)
            if len(blocks) > len(self.best):
                self.best = list(blocks)
            if self.run(uncovered, blocks):
                return True
            blocks.pop()
            for f in facets:
                uncovered[f] = None
        return False


def complete_to_steiner(
    state: PackingState,
    time_budget: float = 10.0,
    *,
    node_limit: int = 20_000,
    max_attempts: int = 1000,
    require_complete: bool = False,
) -> Completion:
    """Extend a packing to an (n, d)-Steiner system by randomized backtracking.

    The first attempt keeps the given packing and searches over the cells
    still needed; every later attempt restarts from the empty packing and its
    result is relabelled by a uniformly random vertex permutation.  On budget
    exhaustion the largest packing seen is returned, tagged incomplete.
    """
    n, d = state.n, state.d
    if not steiner_admissible(n, d):
        if require_complete:
            raise ValueError(f"no ({n},{d})-Steiner system exists: n fails the divisibility conditions")
        return Completion(list(state.chosen), False, 0, 0, False)
    rng = np.random.default_rng(derive_seed(state.seed, 1 << 32))
    deadline = time.monotonic() + time_budget
    all_facets = list(combinations(range(n), d))
    best = list(state.chosen)
    nodes = 0
    for attempt in range(max_attempts):
        start = list(state.chosen) if attempt == 0 else []
        covered = {f for tau in start for f in boundary(tau)}
        uncovered = dict.fromkeys(f for f in all_facets if f not in covered)
        search = _Search(n, d, rng, node_limit, deadline)
        blocks = list(start)
        try:
            ok = search.run(uncovered, blocks)
        except _OutOfBudget:
            ok = False
        nodes += search.nodes
        if ok:
            if attempt:
                perm = rng.permutation(n)
                blocks = [tuple(sorted(int(perm[v]) for v in b)) for b in blocks]
            return Completion(sorted(blocks), True, attempt + 1, nodes, attempt > 0)
        if len(search.best) > len(best):
            best = search.best
        if time.monotonic() > deadline:
            return Completion(sorted(best), False, attempt + 1, nodes, attempt > 0)
    return Completion(sorted(best), False, max_attempts, nodes, True)


# -- the model X_{n,k} -----------------------------------------------------------

@dataclass(frozen=True)
class SystemRecord:
    index: int
    seed: int
    blocks: tuple[Cell, ...]
    complete: bool
    steps: int          # greedy-stage steps

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "seed": self.seed,
            "blocks": [list(b) for b in self.blocks],
            "complete": self.complete,
            "steps": self.steps,
        }


@dataclass(frozen=True)
class ModelSample:
    n: int
    d: int
    k: int
    seed: int
    stop: StopRule
    completion: bool
    systems: tuple[SystemRecord, ...]
    complex: Complex

    @property
    def all_complete(self) -> bool:
        return all(s.complete for s in self.systems)

    def sidecar(self, instrumentation: dict | None = None) -> dict:
        out = {
            "schema": SCHEMA,
            "n": self.n,
            "d": self.d,
            "k": self.k,
            "seed": self.seed,
            "stop": str(self.stop),
            "completion": self.completion,
            "per_system": [s.to_dict() for s in self.systems],
        }
        if instrumentation is not None:
            out["instrumentation"] = instrumentation
        return out

    def dumps(self) -> str:
        return dumps_complex(self.complex)

    def sidecar_json(self, instrumentation: dict | None = None) -> str:
        return json.dumps(self.sidecar(instrumentation), sort_keys=True, indent=1) + "\n"


def assemble(n: int, d: int, block_sets: Iterable[Iterable[Cell]]) -> Complex:
    """Complete (d-1)-skeleton on range(n) plus every block."""
    builder = ComplexBuilder(n, d).complete_skeleton(d - 1)
    for blocks in block_sets:
        builder.add_all(blocks)
    return builder.finalize()


def sample_model(
    n: int,
    d: int,
    k: int,
    seed: int,
    completion: bool = False,
    stop: StopRule | None = None,
    *,
    time_budget: float = 10.0,
    require_complete: bool = False,
) -> ModelSample:
    """Sample X_{n,k}: k independent packings (optionally completed) over K_n^{d-1}."""
    if k < 1:
        raise ValueError("need k >= 1")
    stop = stop or StopRule()
    if completion and require_complete and not steiner_admissible(n, d):
        raise ValueError(f"no ({n},{d})-Steiner system exists: n fails the divisibility conditions")
    systems = []
    for i in range(k):
        s = derive_seed(seed, i)
        state = greedy_packing(n, d, s, stop)
        if completion:
            done = complete_to_steiner(state, time_budget, require_complete=require_complete)
            blocks, complete = done.blocks, done.complete
        else:
            blocks = sorted(state.chosen)
            complete = steiner_admissible(n, d) and state.uncovered == 0
        systems.append(SystemRecord(i, s, tuple(blocks), bool(complete), state.step))
    X = assemble(n, d, (s.blocks for s in systems))
    return ModelSample(n, d, k, seed, stop, completion, tuple(systems), X)


def link_matchings(sample: ModelSample, rho: Iterable[int]) -> list[list[tuple[int, int]]]:
    """Per system, the edges that system contributes to the link of a (d-2)-cell."""
    rho = as_cell(rho)
    if len(rho) != sample.d - 1:
        raise ValueError("rho must be a (d-2)-cell")
    rset = set(rho)
    out = []
    for s in sample.systems:
        edges = [tuple(v for v in b if v not in rset) for b in s.blocks if rset.issubset(b)]
        out.append(sorted(edges))
    return out
