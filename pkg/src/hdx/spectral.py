"""Normalized adjacency spectra, lambda(G), mixing-lemma and Cheeger checks."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .complex import Complex, ParseError, link

SCHEMA = "hdx.v1"
JACOBI_OFF_TOL = 1e-12
EIG_SLACK = 1e-9


@dataclass(frozen=True)
class Graph:
    n: int
    edges: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self):
        clean = set()
        for u, v in self.edges:
            if u == v:
                raise ValueError(f"self-loop at {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={self.n}")
            clean.add((min(u, v), max(u, v)))
        object.__setattr__(self, "edges", frozenset(clean))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        return cls(n, frozenset(edges))

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.n, self.n))
        for u, v in self.edges:
            A[u, v] = A[v, u] = 1.0
        return A

    def components(self) -> list[list[int]]:
        """Connected components that contain at least one edge."""
        parent = list(range(self.n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for u, v in self.edges:
            parent[find(u)] = find(v)
        groups: dict[int, list[int]] = {}
        for u in sorted({x for e in self.edges for x in e}):
            groups.setdefault(find(u), []).append(u)
        return list(groups.values())

    def is_bipartite(self) -> bool:
        adj: dict[int, list[int]] = {}
        for u, v in self.edges:
            adj.setdefault(u, []).append(v)
            adj.setdefault(v, []).append(u)
        color: dict[int, int] = {}
        for s in adj:
            if s in color:
                continue
            color[s] = 0
            stack = [s]
            while stack:
                x = stack.pop()
                for y in adj[x]:
                    if y not in color:
                        color[y] = 1 - color[x]
                        stack.append(y)
                    elif color[y] == color[x]:
                        return False
        return True

    def dumps(self) -> str:
        lines = [f"# n={self.n}"] + [f"{u} {v}" for u, v in sorted(self.edges)]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "Graph":
        n = None
        edges = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                if key.strip() == "n":
                    try:
                        n = int(val)
                    except ValueError:
                        raise ParseError(f"line {lineno}: bad vertex count") from None
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ParseError(f"line {lineno}: expected 'u v'")
            try:
                edges.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise ParseError(f"line {lineno}: non-integer vertex") from None
        if n is None:
            n = 1 + max((max(e) for e in edges), default=-1)
        try:
            return cls.from_edges(n, edges)
        except ValueError as exc:
            raise ParseError(str(exc)) from None


def skeleton_graph(X: Complex) -> Graph:
    """The 1-skeleton of a complex."""
    return Graph.from_edges(X.n, X.cells(1))


def link_graph(X: Complex, rho) -> tuple[Graph, tuple[int, ...]]:
    L, relabel = link(X, rho)
    return skeleton_graph(L), relabel


def normalized_adjacency(G: Graph) -> tuple[np.ndarray, np.ndarray]:
    """``D^{-1/2} A D^{-1/2}`` restricted to non-isolated vertices.

    Returns the matrix and the vertex ids it is indexed by.
    """
    deg = G.degrees
    keep = np.flatnonzero(deg > 0)
    A = G.adjacency()[np.ix_(keep, keep)]
    s = 1.0 / np.sqrt(deg[keep].astype(float))
    return A * s[:, None] * s[None, :], keep


def jacobi_eigh(M: np.ndarray, tol: float = JACOBI_OFF_TOL, max_sweeps: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigensolver for a dense symmetric matrix.

    Sweeps over all (p, q) pairs in row order until the off-diagonal
    Frobenius norm drops below ``tol`` times the matrix norm.  Returns
    ascending eigenvalues and the matching orthonormal eigenvectors (columns).
    """
    A = np.array(M, dtype=float, copy=True)
    m = A.shape[0]
    V = np.eye(m)
    scale = max(np.linalg.norm(A), 1e-300)
    for _ in range(max_sweeps):
        off = float(np.linalg.norm(A - np.diag(np.diag(A))))
        if off <= tol * scale:
            break
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                app, aqq = A[p, p], A[q, q]
                theta = (aqq - app) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                colp, colq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * colp - s * colq
                A[:, q] = s * colp + c * colq
                A[p, :] = A[:, p]
                A[q, :] = A[:, q]
                A[p, p] = app - t * apq
                A[q, q] = aqq + t * apq
                A[p, q] = A[q, p] = 0.0
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    else:
        raise ArithmeticError("Jacobi iteration did not converge")
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


@dataclass(frozen=True)
class SpectrumReport:
    n: int
    m: int
    eigenvalues: tuple[float, ...]   # descending, non-isolated part only
    lam: float
    residual: float                  # max ||A v - mu v|| over eigenpairs
    sqrt_deg_residual: float         # ||A sqrt(deg) - sqrt(deg)|| / ||sqrt(deg)||
    connected: bool
    bipartite: bool

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "n": self.n,
            "m": self.m,
            "eigenvalues": list(self.eigenvalues),
            "lambda": self.lam,
            "residual": self.residual,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def spectrum(G: Graph, tol: float = 1e-9, method: str = "jacobi") -> SpectrumReport:
    """Eigenvalues of the normalized adjacency matrix and lambda(G).

    ``method`` is ``"jacobi"`` (in-repo solver) or ``"lapack"`` (numpy).
    lambda is set to exactly 1 when the edge-bearing part is disconnected or
    bipartite, which forces an eigenvalue of modulus one besides the top one.
    """
    if G.m == 0:
        raise ValueError("empty spectrum")
    M, keep = normalized_adjacency(G)
    if method == "jacobi":
        w, V = jacobi_eigh(M)
    elif method == "lapack":
        w, V = np.linalg.eigh(M)
    else:
        raise ValueError(f"unknown eigensolver {method!r}")
    residual = float(np.max(np.linalg.norm(M @ V - V * w[None, :], axis=0)))
    sd = np.sqrt(G.degrees[keep].astype(float))
    sqrt_res = float(np.linalg.norm(M @ sd - sd) / np.linalg.norm(sd))
    if sqrt_res > tol:
        raise ArithmeticError(f"sqrt(deg) is not a unit eigenvector (residual {sqrt_res:.3g})")
    desc = w[::-1]
    if desc[0] > 1 + EIG_SLACK or desc[-1] < -1 - EIG_SLACK or abs(desc[0] - 1) > EIG_SLACK:
        raise ArithmeticError("normalized adjacency spectrum escaped [-1, 1]")
    connected = len(G.components()) == 1
    bipartite = G.is_bipartite()
    if not connected or bipartite:
        lam = 1.0
    else:
        lam = float(max(abs(desc[1]), abs(desc[-1]))) if len(desc) > 1 else 0.0
    return SpectrumReport(
        G.n, G.m, tuple(float(x) for x in desc), lam, residual, sqrt_res, connected, bipartite
    )


def volume(G: Graph, S: Iterable[int], deg: np.ndarray | None = None) -> int:
    deg = G.degrees if deg is None else deg
    return int(sum(deg[v] for v in set(S)))


def edge_count(G: Graph, A: Iterable[int], B: Iterable[int]) -> int:
    """Ordered pairs (a, b) with a in A, b in B and ab an edge.

    An edge with both ends in A and B counts twice; this is the count the
    mixing lemma bounds (``1_A^T Adj 1_B``).
    """
    A, B = set(A), set(B)
    return sum((u in A and v in B) + (v in A and u in B) for u, v in G.edges)


def edge_set(G: Graph, A: Iterable[int], B: Iterable[int]) -> int:
    """Number of edges with one end in A and the other in B (each edge once)."""
    A, B = set(A), set(B)
    return sum(1 for u, v in G.edges if (u in A and v in B) or (v in A and u in B))


def mixing_check(G: Graph, A: Iterable[int], B: Iterable[int], lam: float, tol: float = 1e-9) -> tuple[bool, float]:
    """Expander mixing lemma ``|E(A,B) - vol A vol B / 2|E|| <= lam sqrt(vol A vol B)``.

    Returns whether it holds (within ``tol``) and the slack ``rhs - lhs``.
    """
    A, B = set(A), set(B)
    deg = G.degrees
    va, vb = volume(G, A, deg), volume(G, B, deg)
    total = 2 * G.m
    lhs = abs(edge_count(G, A, B) - va * vb / total) if total else 0.0
    rhs = lam * math.sqrt(va * vb)
    slack = rhs - lhs
    return slack >= -tol * max(1.0, rhs), slack


@dataclass(frozen=True)
class NormalizedMixing:
    factor2_holds: bool     # ||E(A,B)|| <= 2(||A|| ||B|| + lam sqrt(||A|| ||B||))
    factor4_holds: bool     # ||E(A,B)|| <= 4(||A|| ||B|| + gamma sqrt(||A|| ||B||))
    edge_norm: float
    a_norm: float
    b_norm: float


def normalized_mixing_check(
    G: Graph, A: Iterable[int], B: Iterable[int], lam: float, gamma: float | None = None, tol: float = 1e-12
) -> NormalizedMixing:
    """Mixing inequalities in the weighted norm of G viewed as a 1-complex.

    Vertex weights are ``deg/2|E|`` and edge weights ``1/|E|``.  ``gamma``
    defaults to ``lam``.
    """
    if G.m == 0:
        raise ValueError("weighted norm needs at least one edge")
    gamma = lam if gamma is None else gamma
    deg = G.degrees
    total = 2 * G.m
    a = volume(G, A, deg) / total
    b = volume(G, B, deg) / total
    e = edge_set(G, A, B) / G.m
    root = math.sqrt(a * b)
    return NormalizedMixing(
        e <= 2 * (a * b + lam * root) + tol,
        e <= 4 * (a * b + gamma * root) + tol,
        e, a, b,
    )


def cheeger_floor(lam: float) -> float:
    """Lower bound ``(1 - lam) / 2`` on h_0 of a graph with lambda(G) = lam."""
    if not 0 <= lam <= 1:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    return (1 - lam) / 2


def graph_complex(G: Graph) -> Complex:
    """G as a 1-dimensional complex, for cochain computations."""
    from .complex import ComplexBuilder

    return ComplexBuilder(G.n, 1).complete_skeleton(0).add_all(G.edges).finalize()
