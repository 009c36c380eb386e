"""Simplicial complexes on the vertex set ``range(n)``.

Cells are plain tuples of strictly increasing vertex ids.  Within each
dimension, cells are kept in colexicographic order and every cochain bit
position refers to that rank.  The empty cell ``()`` is always present.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from math import comb
from typing import Iterable, Iterator, Sequence

Cell = tuple[int, ...]

EMPTY: Cell = ()


class ParseError(ValueError):
    """Malformed complex, design, or cochain file."""


def as_cell(vertices: Iterable[int]) -> Cell:
    """Normalize an iterable of vertex ids into a sorted cell.

    Raises ``ValueError`` on repeated or negative vertices.
    """
    cell = tuple(sorted(int(v) for v in vertices))
    for a, b in zip(cell, cell[1:]):
        if a == b:
            raise ValueError(f"repeated vertex {a} in cell")
    if cell and cell[0] < 0:
        raise ValueError("vertex ids must be non-negative")
    return cell


def dim(cell: Cell) -> int:
    return len(cell) - 1


def colex_key(cell: Cell) -> Cell:
    return cell[::-1]


def colex_rank(cell: Cell) -> int:
    """Rank of ``cell`` among all cells of the same size in colex order."""
    return sum(comb(v, i + 1) for i, v in enumerate(cell))


def colex_unrank(rank: int, size: int) -> Cell:
    out = []
    for i in range(size, 0, -1):
        v = i - 1
        while comb(v + 1, i) <= rank:
            v += 1
        out.append(v)
        rank -= comb(v, i)
    return tuple(reversed(out))


def colex_combinations(n: int, size: int) -> Iterator[Cell]:
    """All ``size``-subsets of ``range(n)`` in colex order."""
    if size == 0:
        yield EMPTY
        return
    for top in range(size - 1, n):
        for rest in colex_combinations(top, size - 1):
            yield rest + (top,)


def boundary(tau: Cell) -> list[Cell]:
    """Facets of ``tau``, one per deleted vertex."""
    if not tau:
        raise ValueError("no boundary of empty cell")
    return [tau[:i] + tau[i + 1:] for i in range(len(tau))]


class Complex:
    """An immutable simplicial complex.  Build with :class:`ComplexBuilder`."""

    def __init__(self, n: int, d: int, cells: Sequence[Sequence[Cell]]):
        if len(cells) != d + 2:
            raise ValueError("need one cell list per dimension -1..d")
        self._n = n
        self._d = d
        self._cells = tuple(tuple(c) for c in cells)
        self._derived: dict = {}
        skel = -1
        for j in range(d + 1):
            if len(self._cells[j + 1]) != comb(n, j + 1):
                break
            skel = j
        self._skeleton = skel

    @property
    def n(self) -> int:
        return self._n

    @property
    def d(self) -> int:
        return self._d

    @property
    def complete_skeleton_dim(self) -> int:
        return self._skeleton

    def cells(self, j: int) -> tuple[Cell, ...]:
        if j < -1 or j > self._d:
            return ()
        return self._cells[j + 1]

    def size(self, j: int) -> int:
        return len(self.cells(j))

    @cached_property
    def _index(self) -> tuple[dict[Cell, int], ...]:
        return tuple({c: i for i, c in enumerate(cs)} for cs in self._cells)

    def index(self, j: int) -> dict[Cell, int]:
        return self._index[j + 1]

    def rank(self, cell: Cell) -> int:
        try:
            return self._index[len(cell)][cell]
        except (KeyError, IndexError):
            raise KeyError(f"cell not in complex: {cell}") from None

    def __contains__(self, cell) -> bool:
        cell = tuple(cell)
        return 0 <= len(cell) <= self._d + 1 and cell in self._index[len(cell)]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Complex):
            return NotImplemented
        return (self._n, self._d, self._cells) == (other._n, other._d, other._cells)

    def __hash__(self) -> int:
        return hash((self._n, self._d, self._cells))

    def __repr__(self) -> str:
        sizes = ", ".join(str(len(c)) for c in self._cells[1:])
        return f"Complex(n={self._n}, d={self._d}, f=({sizes}))"

    def derived(self, key, factory):
        """Memoize data computed from this (immutable) complex."""
        try:
            return self._derived[key]
        except KeyError:
            value = self._derived[key] = factory()
            return value

    @property
    def top_cells(self) -> tuple[Cell, ...]:
        return self.cells(self._d)

    def maximal_cells(self) -> list[Cell]:
        """Cells not contained in any larger cell, ordered by (dim, colex)."""
        covered: set[Cell] = set()
        out = []
        for j in range(self._d, -2, -1):
            for c in self.cells(j):
                if c not in covered:
                    out.append(c)
            if j >= 0:
                covered = {f for c in self.cells(j) for f in boundary(c)}
        out.sort(key=lambda c: (len(c), colex_key(c)))
        return out

    def cofaces(self, j: int) -> tuple[tuple[int, ...], ...]:
        """For each j-cell, the ranks of the (j+1)-cells containing it."""
        return self._cofaces[j + 1]

    @cached_property
    def _cofaces(self) -> tuple[tuple[tuple[int, ...], ...], ...]:
        out = []
        for j in range(-1, self._d + 1):
            inc: list[list[int]] = [[] for _ in self.cells(j)]
            if j < self._d:
                idx = self.index(j)
                for t, tau in enumerate(self.cells(j + 1)):
                    for f in boundary(tau):
                        inc[idx[f]].append(t)
            out.append(tuple(tuple(x) for x in inc))
        return tuple(out)

    def audit(self) -> None:
        """Raise ``AssertionError`` unless the cell lists form a valid complex."""
        assert self._cells[0] == (EMPTY,), "empty cell missing"
        for j in range(self._d + 1):
            cs = self.cells(j)
            assert all(len(c) == j + 1 for c in cs)
            assert all(c[-1] < self._n for c in cs)
            assert list(cs) == sorted(cs, key=colex_key), "cells out of colex order"
            assert len(set(cs)) == len(cs)
            lower = self.index(j - 1)
            for c in cs:
                for f in boundary(c):
                    assert f in lower, f"facet {f} of {c} missing"


class ComplexBuilder:
    """Single-owner accumulator of cells; ``finalize`` closes under inclusion."""

    def __init__(self, n: int, d: int):
        if n < 0 or d < -1:
            raise ValueError("need n >= 0 and d >= -1")
        self.n = n
        self.d = d
        self._skeleton = -1
        self._extra: set[Cell] = set()

    def complete_skeleton(self, j: int) -> "ComplexBuilder":
        if j > self.d:
            raise ValueError("skeleton above top dimension")
        self._skeleton = max(self._skeleton, j)
        return self

    def add(self, cell: Iterable[int]) -> "ComplexBuilder":
        c = as_cell(cell)
        if len(c) - 1 > self.d:
            raise ValueError(f"cell {c} exceeds dimension {self.d}")
        if c and c[-1] >= self.n:
            raise ValueError(f"vertex {c[-1]} out of range for n={self.n}")
        if len(c) - 1 > self._skeleton:
            self._extra.add(c)
        return self

    def add_all(self, cells: Iterable[Iterable[int]]) -> "ComplexBuilder":
        for c in cells:
            self.add(c)
        return self

    def finalize(self) -> Complex:
        n, d, s = self.n, self.d, self._skeleton
        by_dim: list[set[Cell]] = [set() for _ in range(d + 2)]
        for c in self._extra:
            by_dim[len(c)].add(c)
        # close downward, one dimension at a time, stopping at the complete skeleton
        for size in range(d + 1, s + 2, -1):
            for c in by_dim[size]:
                by_dim[size - 1].update(boundary(c))
        cells: list[list[Cell]] = []
        for size in range(d + 2):
            if size - 1 <= s:
                cells.append(list(colex_combinations(n, size)))
            else:
                cells.append(sorted(by_dim[size], key=colex_key))
        if not cells[0]:
            cells[0] = [EMPTY]
        return Complex(n, d, cells)


def complete_complex(n: int, d: int) -> Complex:
    """All subsets of ``range(n)`` of size at most ``d + 1``."""
    if not 0 <= d < n:
        raise ValueError(f"complete complex needs 0 <= d < n, got n={n}, d={d}")
    return ComplexBuilder(n, d).complete_skeleton(d).finalize()


def from_top_cells(n: int, d: int, cells: Iterable[Iterable[int]], skeleton: int = -1) -> Complex:
    return ComplexBuilder(n, d).complete_skeleton(skeleton).add_all(cells).finalize()


def degree(X: Complex, sigma: Cell) -> int:
    """Number of (dim+1)-cells of ``X`` containing ``sigma`` (linear scan)."""
    sigma = tuple(sigma)
    if sigma not in X:
        raise KeyError(f"cell not in complex: {sigma}")
    s = set(sigma)
    return sum(1 for tau in X.cells(len(sigma)) if s.issubset(tau))


def degree_indexed(X: Complex, sigma: Cell) -> int:
    """Same as :func:`degree`, read off the incidence index."""
    return len(X.cofaces(len(sigma) - 1)[X.rank(tuple(sigma))])


def max_degree(X: Complex, j: int) -> int:
    return max((len(c) for c in X.cofaces(j)), default=0)


def link(X: Complex, rho: Iterable[int]) -> tuple[Complex, tuple[int, ...]]:
    """Link of ``rho`` in ``X``, relabelled onto ``range(n - |rho|)``.

    Returns the link and ``relabel`` with ``relabel[new] == old``.
    """
    rho = as_cell(rho)
    if rho not in X:
        raise KeyError(f"cell not in complex: {rho}")
    r = len(rho)
    rset = set(rho)
    relabel = tuple(v for v in range(X.n) if v not in rset)
    new_id = {old: new for new, old in enumerate(relabel)}
    builder = ComplexBuilder(X.n - r, X.d - r)
    skel = X.complete_skeleton_dim - r
    if skel >= -1:
        builder.complete_skeleton(skel)
    for j in range(max(r, skel + r + 1), X.d + 1):
        for tau in X.cells(j):
            if rset.issubset(tau):
                builder.add(new_id[v] for v in tau if v not in rset)
    return builder.finalize(), relabel


def relabel_complex(X: Complex, perm: Sequence[int]) -> Complex:
    """Image of ``X`` under the vertex map ``v -> perm[v]``."""
    builder = ComplexBuilder(X.n, X.d).complete_skeleton(X.complete_skeleton_dim)
    for j in range(X.complete_skeleton_dim + 1, X.d + 1):
        builder.add_all(tuple(perm[v] for v in c) for c in X.cells(j))
    return builder.finalize()


# -- designs -----------------------------------------------------------------

@dataclass(frozen=True)
class Design:
    n: int
    q: int
    r: int
    lam: int
    blocks: tuple[Cell, ...] = field(default=())

    def __post_init__(self):
        if self.lam < 1 or not 0 <= self.r <= self.q:
            raise ValueError("need lambda >= 1 and 0 <= r <= q")
        blocks = tuple(sorted({as_cell(b) for b in self.blocks}, key=colex_key))
        for b in blocks:
            if len(b) != self.q or (b and b[-1] >= self.n):
                raise ValueError(f"block {b} is not a {self.q}-subset of range({self.n})")
        object.__setattr__(self, "blocks", blocks)


def is_design(D: Design) -> tuple[bool, tuple[Cell, int] | None]:
    """Check that every r-subset lies in exactly ``lam`` blocks.

    On failure the witness is the first violating r-subset (colex order)
    together with its actual count.
    """
    counts: Counter[Cell] = Counter()
    for b in D.blocks:
        counts.update(combinations(b, D.r))
    for s in colex_combinations(D.n, D.r):
        if counts[s] != D.lam:
            return False, (s, counts[s])
    return True, None


def is_steiner(D: Design, n: int, d: int) -> tuple[bool, tuple[Cell, int] | None]:
    if (D.n, D.q, D.r, D.lam) != (n, d + 1, d, 1):
        raise ValueError(
            f"not a Steiner parameter set: design ({D.n},{D.q},{D.r},{D.lam}) vs (n={n}, d={d})"
        )
    return is_design(D)


def steiner_admissible(n: int, d: int) -> bool:
    """Divisibility conditions necessary for an (n, d)-Steiner system."""
    return n > d and all(comb(n - i, d - i) % (d + 1 - i) == 0 for i in range(d))


def design_of_complex(X: Complex) -> Design:
    """Top cells of ``X`` read as an (n, d+1, d, 1) block system."""
    return Design(X.n, X.d + 1, X.d, 1, X.top_cells)


# -- text formats ------------------------------------------------------------

def dumps_complex(X: Complex) -> str:
    lines = [f"hdx v1 n={X.n} d={X.d} skeleton={X.complete_skeleton_dim}"]
    for c in X.maximal_cells():
        if len(c) - 1 > X.complete_skeleton_dim:
            lines.append(" ".join(map(str, c)))
    lines.append("end")
    return "\n".join(lines) + "\n"


def _parse_header(line: str, magic: tuple[str, ...], keys: tuple[str, ...]) -> dict[str, int]:
    parts = line.split()
    if tuple(parts[: len(magic)]) != magic or len(parts) != len(magic) + len(keys):
        raise ParseError(f"bad header: {line!r}")
    out = {}
    for part, key in zip(parts[len(magic):], keys):
        k, sep, v = part.partition("=")
        if k != key or not sep:
            raise ParseError(f"bad header field {part!r}, expected {key}=")
        try:
            out[key] = int(v)
        except ValueError:
            raise ParseError(f"bad integer in header field {part!r}") from None
    return out


def _parse_cells(lines: Sequence[str], lineno0: int) -> list[Cell]:
    cells = []
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            c = tuple(int(x) for x in line.split())
        except ValueError:
            raise ParseError(f"line {lineno0 + i}: non-integer vertex") from None
        if any(a >= b for a, b in zip(c, c[1:])) or (c and c[0] < 0):
            raise ParseError(f"line {lineno0 + i}: vertices must be increasing and non-negative")
        cells.append(c)
    return cells


def _split_lines(text: str) -> list[str]:
    """Lines between the header and the closing ``end`` line (inclusive of the header)."""
    if not text.endswith("\n"):
        raise ParseError("file truncated (missing final newline)")
    lines = text[:-1].split("\n")
    if len(lines) < 2 or lines[-1].strip() != "end":
        raise ParseError("file truncated (missing 'end' line)")
    return lines[:-1]


def loads_complex(text: str) -> Complex:
    lines = _split_lines(text)
    hdr = _parse_header(lines[0], ("hdx", "v1"), ("n", "d", "skeleton"))
    n, d, s = hdr["n"], hdr["d"], hdr["skeleton"]
    if n < 0 or d < -1 or not -1 <= s <= d or s >= n:
        raise ParseError(f"inconsistent header values n={n} d={d} skeleton={s}")
    builder = ComplexBuilder(n, d).complete_skeleton(s)
    try:
        builder.add_all(_parse_cells(lines[1:], 2))
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    return builder.finalize()


def dumps_design(D: Design) -> str:
    lines = [f"design {D.n} {D.q} {D.r} {D.lam}"]
    lines += [" ".join(map(str, b)) for b in D.blocks]
    lines.append("end")
    return "\n".join(lines) + "\n"


def loads_design(text: str) -> Design:
    lines = _split_lines(text)
    parts = lines[0].split()
    if len(parts) != 5 or parts[0] != "design":
        raise ParseError(f"bad design header: {lines[0]!r}")
    try:
        n, q, r, lam = (int(x) for x in parts[1:])
    except ValueError:
        raise ParseError("bad integer in design header") from None
    try:
        return Design(n, q, r, lam, tuple(_parse_cells(lines[1:], 2)))
    except ValueError as exc:
        raise ParseError(str(exc)) from None
