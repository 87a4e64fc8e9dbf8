"""Numba kernels for the mixed-state stabilizer tableau.

The tableau is a complete symplectic basis of ``n`` pairs stored as ``2n``
packed rows: row ``2j`` is ``A_j`` and row ``2j + 1`` is ``B_j``.  ``A_j`` and
``B_j`` anticommute; rows from different pairs commute.  For a stabilizer pair
``A_j`` is a signed state stabilizer and ``B_j`` its destabilizer; for a free
pair both rows are unsigned operators spanning the mixed part of the state.

``cols`` mirrors the table column-wise: ``cols[c]`` is a bitset over rows of
symplectic column ``c`` (x-bit of qubit ``c`` for ``c < n``, z-bit of qubit
``c - n`` otherwise).  With it the set of rows anticommuting with a sparse
Pauli is an XOR of a few columns.  ``stab`` is a row bitset with bit ``2j``
set when pair ``j`` is a stabilizer pair.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ._bits import U1, phase_of_product, popcount

RULE_MEMBER = 1
RULE_COMMUTING = 2
RULE_ANTICOMMUTING = 3

_EVEN = np.uint64(0x5555555555555555)


def row_words(n: int) -> int:
    return max(1, (2 * n + 63) // 64)


@njit(cache=True, inline="always")
def _lowest(word):
    """Index of the lowest set bit of a nonzero word."""
    return np.int64(popcount((word & (~word + U1)) - U1))


@njit(cache=True, inline="always")
def _has(mask, r):
    return (mask[r >> 6] >> np.uint64(r & 63)) & U1


@njit(cache=True, inline="always")
def _flip(mask, r):
    mask[r >> 6] ^= U1 << np.uint64(r & 63)


@njit(cache=True)
def build_columns(tab, n, W, cols):
    for c in range(cols.shape[0]):
        for w in range(cols.shape[1]):
            cols[c, w] = np.uint64(0)
    for r in range(2 * n):
        for q in range(n):
            word = q >> 6
            sh = np.uint64(q & 63)
            if (tab[r, word] >> sh) & U1:
                _flip(cols[q], r)
            if (tab[r, W + word] >> sh) & U1:
                _flip(cols[n + q], r)


@njit(cache=True)
def _anticommutation(cols, n, qubits, gx, gz, ac):
    for w in range(ac.shape[0]):
        ac[w] = np.uint64(0)
    for k in range(qubits.shape[0]):
        q = qubits[k]
        if gx[k]:
            for w in range(ac.shape[0]):
                ac[w] ^= cols[n + q, w]
        if gz[k]:
            for w in range(ac.shape[0]):
                ac[w] ^= cols[q, w]


@njit(cache=True)
def _anticommutation_dense(cols, n, W, row, ac):
    for w in range(ac.shape[0]):
        ac[w] = np.uint64(0)
    for half in range(2):
        for w in range(W):
            v = row[half * W + w]
            while v:
                b = _lowest(v)
                v &= v - U1
                q = w * 64 + b
                c = q if half == 1 else n + q  # x-bit of g pairs with the z-column
                for k in range(ac.shape[0]):
                    ac[k] ^= cols[c, k]


@njit(cache=True)
def _cols_xor_row(cols, tab, n, W, src, rows_mask):
    """Mirror of ``row r ^= row src`` for every r in ``rows_mask``."""
    for half in range(2):
        for w in range(W):
            v = tab[src, half * W + w]
            while v:
                b = _lowest(v)
                v &= v - U1
                c = half * n + w * 64 + b
                for k in range(rows_mask.shape[0]):
                    cols[c, k] ^= rows_mask[k]


@njit(cache=True)
def _cols_flip_diff(cols, n, W, old, new, r):
    """Mirror of row ``r`` changing from ``old`` to ``new``."""
    for half in range(2):
        for w in range(W):
            v = old[half * W + w] ^ new[half * W + w]
            while v:
                b = _lowest(v)
                v &= v - U1
                _flip(cols[half * n + w * 64 + b], r)


@njit(cache=True, inline="always")
def _xor_row(tab, dst, src):
    for w in range(tab.shape[1]):
        tab[dst, w] ^= tab[src, w]


@njit(cache=True)
def _mul_signed(tab, signs, dst, src, W):
    """Row dst <- row dst * row src for commuting signed rows."""
    k = phase_of_product(tab[dst, :W], tab[dst, W:], tab[src, :W], tab[src, W:])
    signs[dst] ^= signs[src] ^ np.uint8((k >> 1) & 1)
    _xor_row(tab, dst, src)


@njit(cache=True)
def _sparse_row(n, W, qubits, gx, gz, out):
    for w in range(out.shape[0]):
        out[w] = np.uint64(0)
    for k in range(qubits.shape[0]):
        q = qubits[k]
        word = q >> 6
        bit = U1 << np.uint64(q & 63)
        if gx[k]:
            out[word] |= bit
        if gz[k]:
            out[W + word] |= bit


@njit(cache=True)
def _member_sign(tab, signs, stab, W, ac, scratch):
    """Sign bit of the stabilizer-group element with the measured bits.

    Multiplies every stabilizer whose destabilizer anticommutes with g; the
    unsigned product is left in ``scratch``.
    """
    for w in range(scratch.shape[0]):
        scratch[w] = np.uint64(0)
    k = 0
    for w in range(ac.shape[0]):
        v = (ac[w] >> U1) & stab[w]  # bit 2j: B_j anticommutes and pair j is a stabilizer
        while v:
            b = _lowest(v)
            v &= v - U1
            r = w * 64 + b
            k += phase_of_product(scratch[:W], scratch[W:], tab[r, :W], tab[r, W:])
            k += 2 * np.int64(signs[r])
            for x in range(scratch.shape[0]):
                scratch[x] ^= tab[r, x]
    return (k >> 1) & 1


@njit(cache=True)
def _measure_ac(tab, signs, cols, stab, n, W, grow, gsign_bit, rand_bit, ac, scratch):
    """Apply the update rules given the anticommutation bitset ``ac`` of g."""
    RW = ac.shape[0]
    # rule 3: anticommutes with a stabilizer; lowest pair index is the pivot
    p = -1
    for w in range(RW):
        v = ac[w] & stab[w]
        if v:
            p = w * 64 + _lowest(v)
            break
    if p >= 0:
        _flip(ac, p)
        if _has(ac, p + 1):
            _flip(ac, p + 1)
        for w in range(RW):
            v = ac[w]
            while v:
                b = _lowest(v)
                v &= v - U1
                r = w * 64 + b
                if (r & 1) == 0 and _has(stab, r):
                    _mul_signed(tab, signs, r, p, W)
                else:
                    _xor_row(tab, r, p)
        _cols_xor_row(cols, tab, n, W, p, ac)
        _cols_flip_diff(cols, n, W, tab[p + 1], tab[p], p + 1)
        for w in range(tab.shape[1]):
            tab[p + 1, w] = tab[p, w]
        signs[p + 1] = 0
        _cols_flip_diff(cols, n, W, tab[p], grow, p)
        for w in range(tab.shape[1]):
            tab[p, w] = grow[w]
        signs[p] = np.uint8(rand_bit ^ gsign_bit)
        return rand_bit, RULE_ANTICOMMUTING
    # rule 2: commutes with the group but anticommutes with a free row
    a = -1
    for w in range(RW):
        v = (ac[w] | (ac[w] >> U1)) & _EVEN & ~stab[w]
        if v:
            a = w * 64 + _lowest(v)
            break
    if a >= 0:
        b = a + 1
        if not _has(ac, b):
            # swap rows a and b so that B anticommutes with g
            _cols_flip_diff(cols, n, W, tab[a], tab[b], a)
            _cols_flip_diff(cols, n, W, tab[a], tab[b], b)
            for w in range(tab.shape[1]):
                tmp = tab[a, w]
                tab[a, w] = tab[b, w]
                tab[b, w] = tmp
            _flip(ac, a)
            _flip(ac, b)
        _flip(ac, b)
        if _has(ac, a):
            _flip(ac, a)
        for w in range(RW):
            v = ac[w]
            while v:
                bb = _lowest(v)
                v &= v - U1
                _xor_row(tab, w * 64 + bb, b)
        _cols_xor_row(cols, tab, n, W, b, ac)
        _cols_flip_diff(cols, n, W, tab[a], grow, a)
        for w in range(tab.shape[1]):
            tab[a, w] = grow[w]
        signs[a] = np.uint8(rand_bit ^ gsign_bit)
        signs[b] = 0
        _flip(stab, a)
        return rand_bit, RULE_COMMUTING
    # rule 1: g is (up to sign) an element of the state stabilizer group
    sbit = _member_sign(tab, signs, stab, W, ac, scratch)
    return np.uint8(sbit) ^ np.uint8(gsign_bit), RULE_MEMBER


@njit(cache=True)
def measure(tab, signs, cols, stab, n, W, qubits, gx, gz, gsign_bit, rand_bit, ac, scratch, grow):
    """Projectively measure the sparse Pauli g = (-1)**gsign_bit * P(qubits, gx, gz).

    Returns ``(outcome_bit, rule)``; outcome eigenvalue is ``(-1)**outcome_bit``.
    A random outcome uses ``rand_bit``.
    """
    _anticommutation(cols, n, qubits, gx, gz, ac)
    _sparse_row(n, W, qubits, gx, gz, grow)
    return _measure_ac(tab, signs, cols, stab, n, W, grow, gsign_bit, rand_bit, ac, scratch)


@njit(cache=True)
def measure_dense(tab, signs, cols, stab, n, W, row, gsign_bit, rand_bit, ac, scratch, grow):
    """Same as ``measure`` for a Pauli given as a packed row."""
    _anticommutation_dense(cols, n, W, row, ac)
    for w in range(grow.shape[0]):
        grow[w] = row[w]
    return _measure_ac(tab, signs, cols, stab, n, W, grow, gsign_bit, rand_bit, ac, scratch)


@njit(cache=True)
def contains_dense(tab, signs, cols, stab, n, W, row, ac, scratch):
    """Membership of a packed Pauli row in +-S(rho); returns (member, sign_bit)."""
    _anticommutation_dense(cols, n, W, row, ac)
    for w in range(ac.shape[0]):
        free = _EVEN & ~stab[w]
        if (ac[w] & stab[w]) or (ac[w] & (free | (free << U1))):
            return False, 0
    sbit = _member_sign(tab, signs, stab, W, ac, scratch)
    return True, sbit


@njit(cache=True)
def _u01(word):
    return np.float64(word >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def run_events(
    tab,
    signs,
    cols,
    stab,
    n,
    W,
    n_events,
    raw,
    chk_ptr,
    chk_qubits,
    chk_x,
    chk_z,
    chk_sign,
    cls_ptr,
    cls_cum,
    p_single,
    log_ops,
    log_out,
    log_rule,
    ac,
    scratch,
    grow,
    stop_m,
):
    """Run measurement events; event ``e`` consumes ``raw[3e:3e+3]``.

    Checks are stored CSR-style (``chk_ptr``), classes are contiguous check
    ranges (``cls_ptr``) chosen with cumulative probabilities ``cls_cum``.
    With probability ``p_single`` a uniformly random single-qubit Pauli on a
    uniform site replaces the check draw; such events log op index
    ``-(1 + 3*site + pauli)`` with pauli 0/1/2 for X/Y/Z.  Logging is skipped
    if ``log_ops`` is empty.  Stops early (returning the number of events
    done) once the stabilizer count reaches ``stop_m`` (pass -1 to disable).
    """
    n_cls = cls_cum.shape[0]
    m = 0
    for w in range(stab.shape[0]):
        m += np.int64(popcount(stab[w]))
    sq = np.zeros(1, dtype=np.int64)
    sx = np.zeros(1, dtype=np.uint8)
    sz = np.zeros(1, dtype=np.uint8)
    do_log = log_ops.shape[0] > 0
    for e in range(n_events):
        if stop_m >= 0 and m >= stop_m:
            return e
        w0 = raw[3 * e]
        w1 = raw[3 * e + 1]
        w2 = raw[3 * e + 2]
        u = _u01(w0)
        rbit = np.uint8(w2 >> np.uint64(63))
        if p_single > 0.0 and u < p_single:
            site = np.int64(_u01(w1) * n)
            if site >= n:
                site = n - 1
            pa = np.int64(_u01(w2 << np.uint64(1)) * 3)
            if pa > 2:
                pa = 2
            sq[0] = site
            sx[0] = np.uint8(1 if pa <= 1 else 0)
            sz[0] = np.uint8(1 if pa >= 1 else 0)
            out, rule = measure(tab, signs, cols, stab, n, W, sq, sx, sz, 0, rbit, ac, scratch, grow)
            op = -(1 + 3 * site + pa)
        else:
            if p_single > 0.0:
                u = (u - p_single) / (1.0 - p_single)
            c = n_cls - 1
            for k in range(n_cls):
                if u < cls_cum[k]:
                    c = k
                    break
            lo = cls_ptr[c]
            size = cls_ptr[c + 1] - lo
            idx = np.int64(_u01(w1) * size)
            if idx >= size:
                idx = size - 1
            op = lo + idx
            a = chk_ptr[op]
            b = chk_ptr[op + 1]
            out, rule = measure(
                tab,
                signs,
                cols,
                stab,
                n,
                W,
                chk_qubits[a:b],
                chk_x[a:b],
                chk_z[a:b],
                chk_sign[op],
                rbit,
                ac,
                scratch,
                grow,
            )
        if rule == RULE_COMMUTING:
            m += 1
        if do_log:
            log_ops[e] = op
            log_out[e] = out
            log_rule[e] = rule
    return n_events
