"""Numba kernels on bit-packed binary-symplectic rows.

Row layout: a row of ``2 * W`` uint64 words, words ``[0, W)`` hold the x-bits
and words ``[W, 2W)`` the z-bits; qubit ``q`` lives in word ``q >> 6`` at bit
``q & 63``.  Column ``c`` of the symplectic matrix is the x-bit of qubit ``c``
for ``c < n`` and the z-bit of qubit ``c - n`` otherwise.
"""

from __future__ import annotations

import numpy as np
from numba import njit

U1 = np.uint64(1)
_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)


def n_words(n_qubits: int) -> int:
    return max(1, (n_qubits + 63) // 64)


@njit(cache=True, inline="always")
def popcount(v):
    v = v - ((v >> np.uint64(1)) & _M1)
    v = (v & _M2) + ((v >> np.uint64(2)) & _M2)
    v = (v + (v >> np.uint64(4))) & _M4
    return (v * _H01) >> np.uint64(56)


@njit(cache=True)
def phase_of_product(x1, z1, x2, z2):
    """Exponent k (mod 4) with P(x1,z1) P(x2,z2) = i^k P(x1^x2, z1^z2).

    Operands are unsigned Hermitian Paulis (bits (1,1) mean Y).
    """
    plus = 0
    minus = 0
    for w in range(x1.shape[0]):
        a, b, c, d = x1[w], z1[w], x2[w], z2[w]
        p = (a & b & d & ~c) | (a & ~b & d & c) | (~a & b & c & ~d)
        q = (a & b & c & ~d) | (a & ~b & d & ~c) | (~a & b & c & d)
        plus += popcount(p)
        minus += popcount(q)
    return (np.int64(plus) - np.int64(minus)) % 4


@njit(cache=True)
def row_phase(tab, r, s, W):
    """Phase exponent of row r times row s of a packed table."""
    return phase_of_product(tab[r, :W], tab[r, W:], tab[s, :W], tab[s, W:])


@njit(cache=True)
def symplectic_rows(a, b, W):
    """Symplectic product <a, b> of two packed rows."""
    acc = np.uint64(0)
    for w in range(W):
        acc ^= (a[w] & b[W + w]) ^ (a[W + w] & b[w])
    return popcount(acc) & U1


@njit(cache=True)
def gf2_rref(rows, n_cols_x, W, track):
    """In-place reduced row echelon form; returns the pivot column list.

    ``n_cols_x`` is the number of qubits; columns run over all x-bits first
    (ascending qubit) and then all z-bits.  ``track`` is a second packed
    table that receives the same row operations (pass shape (r, 0) to skip).
    """
    n_rows = rows.shape[0]
    pivots = np.empty(min(n_rows, 2 * n_cols_x), dtype=np.int64)
    rank = 0
    for c in range(2 * n_cols_x):
        if rank == n_rows:
            break
        if c < n_cols_x:
            word = c >> 6
            bit = U1 << np.uint64(c & 63)
        else:
            word = W + ((c - n_cols_x) >> 6)
            bit = U1 << np.uint64((c - n_cols_x) & 63)
        piv = -1
        for r in range(rank, n_rows):
            if rows[r, word] & bit:
                piv = r
                break
        if piv < 0:
            continue
        if piv != rank:
            for w in range(rows.shape[1]):
                tmp = rows[piv, w]
                rows[piv, w] = rows[rank, w]
                rows[rank, w] = tmp
            for w in range(track.shape[1]):
                tmp = track[piv, w]
                track[piv, w] = track[rank, w]
                track[rank, w] = tmp
        for r in range(n_rows):
            if r != rank and (rows[r, word] & bit):
                for w in range(word, rows.shape[1]):
                    rows[r, w] ^= rows[rank, w]
                for w in range(track.shape[1]):
                    track[r, w] ^= track[rank, w]
        pivots[rank] = c
        rank += 1
    return pivots[:rank]


@njit(cache=True)
def gf2_rank(rows, n_qubits, W):
    work = rows.copy()
    dummy = np.zeros((rows.shape[0], 0), dtype=np.uint64)
    return gf2_rref(work, n_qubits, W, dummy).shape[0]


@njit(cache=True)
def commutation_matrix(a, b, W):
    """Boolean matrix M[i, j] = <a_i, b_j>."""
    out = np.zeros((a.shape[0], b.shape[0]), dtype=np.uint8)
    for i in range(a.shape[0]):
        for j in range(b.shape[0]):
            out[i, j] = symplectic_rows(a[i], b[j], W)
    return out
