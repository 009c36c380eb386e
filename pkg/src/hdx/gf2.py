"""GF(2) linear algebra on Python-int bitsets, plus packed-word batch helpers.

A vector of length ``N`` is an ``int`` whose bit ``i`` is coordinate ``i``.
Batches of vectors are ``(M, W)`` arrays of little-endian ``uint64`` words.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np


def rref(rows: Sequence[int]) -> tuple[list[int], list[int]]:
    """Fully reduced row echelon form.

    Returns ``(basis, pivots)`` sorted by decreasing pivot, where the pivot of a
    row is its highest set bit and no other basis row has that bit set.
    """
    basis: list[int] = []
    pivots: list[int] = []
    for v in rows:
        for b, p in zip(basis, pivots):
            if (v >> p) & 1:
                v ^= b
        if not v:
            continue
        p = v.bit_length() - 1
        for i, b in enumerate(basis):
            if (b >> p) & 1:
                basis[i] = b ^ v
        basis.append(v)
        pivots.append(p)
    order = sorted(range(len(basis)), key=lambda i: -pivots[i])
    return [basis[i] for i in order], [pivots[i] for i in order]


def rank(rows: Sequence[int]) -> int:
    return len(rref(rows)[0])


def reduce(v: int, basis: Sequence[int], pivots: Sequence[int]) -> int:
    """Canonical representative of ``v`` modulo the row space: zero on every pivot."""
    for b, p in zip(basis, pivots):
        if (v >> p) & 1:
            v ^= b
    return v


def in_span(v: int, basis: Sequence[int], pivots: Sequence[int]) -> bool:
    return reduce(v, basis, pivots) == 0


def n_words(nbits: int) -> int:
    return max(1, (nbits + 63) // 64)


def to_words(v: int, width: int) -> np.ndarray:
    return np.frombuffer(v.to_bytes(8 * width, "little"), dtype="<u8").copy()


def from_words(words: np.ndarray) -> int:
    return int.from_bytes(np.ascontiguousarray(words, dtype="<u8").tobytes(), "little")


def pack(vectors: Sequence[int], width: int) -> np.ndarray:
    out = np.zeros((len(vectors), width), dtype="<u8")
    for i, v in enumerate(vectors):
        out[i] = to_words(v, width)
    return out


def span(rows: np.ndarray) -> np.ndarray:
    """All ``2**r`` combinations of the ``(r, W)`` rows; index bit i selects row i."""
    out = np.zeros((1, rows.shape[1]), dtype="<u8")
    for row in rows:
        out = np.concatenate([out, out ^ row])
    return out


class Weigher:
    """Sum of integer per-coordinate weights over the set bits of packed vectors."""

    def __init__(self, weights: Sequence[int]):
        w = np.asarray(weights, dtype=np.int64)
        self.nbits = len(w)
        self.width = n_words(self.nbits)
        nbytes = max(1, (self.nbits + 7) // 8)
        padded = np.zeros(nbytes * 8, dtype=np.int64)
        padded[: self.nbits] = w
        bits = (np.arange(256)[:, None] >> np.arange(8)[None, :]) & 1
        # table[k, b] = weight of byte value b sitting at byte position k
        self.table = padded.reshape(nbytes, 8) @ bits.T
        self.nbytes = nbytes
        self._rows = np.arange(nbytes)
        self.uniform = bool(self.nbits and (w == w[0]).all())
        self._unit = int(w[0]) if self.nbits else 0

    def __call__(self, words: np.ndarray) -> np.ndarray:
        words = np.ascontiguousarray(words, dtype="<u8")
        if self.uniform:
            return self._unit * np.bitwise_count(words).sum(axis=-1, dtype=np.int64)
        by = words.view(np.uint8).reshape(*words.shape[:-1], -1)[..., : self.nbytes]
        return self.table[self._rows, by].sum(axis=-1)

    def of_int(self, v: int) -> int:
        if self.uniform:
            return self._unit * v.bit_count()
        total = 0
        for k, byte in enumerate(v.to_bytes(self.nbytes, "little")):
            if byte:
                total += int(self.table[k, byte])
        return total
