"""Bit-packed binary-symplectic Pauli algebra and GF(2) linear algebra.

A Pauli on ``n`` qubits is stored as two packed bit vectors (x-part, z-part)
plus a sign.  ``Y_j`` has both bits of qubit ``j`` set and denotes the
Hermitian operator ``Y`` (not ``XZ``), so the represented operator is always
Hermitian and its overall phase is ``+1`` or ``-1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from . import _bits
from ._bits import n_words

__all__ = [
    "PauliOperator",
    "SymplecticMatrix",
    "Combination",
    "ContractViolation",
    "InvariantViolation",
    "commutes",
    "multiply",
    "multiply_with_phase",
    "rank_gf2",
    "solve_membership",
]


class ContractViolation(ValueError):
    """Raised when a caller passes arguments outside an operation's contract."""


class InvariantViolation(RuntimeError):
    """Raised when an internal invariant (e.g. a +-1 phase) fails to hold."""


_LABEL_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_BITS_LABEL = {v: k for k, v in _LABEL_BITS.items()}


def _pack(bits: np.ndarray) -> np.ndarray:
    """Pack a boolean vector into little-endian uint64 words."""
    n = bits.shape[-1]
    W = n_words(n)
    padded = np.zeros(bits.shape[:-1] + (W * 64,), dtype=np.uint8)
    padded[..., :n] = bits
    packed = np.packbits(padded, axis=-1, bitorder="little")
    return packed.view(np.uint64).reshape(bits.shape[:-1] + (W,)).copy()


def _unpack(words: np.ndarray, n: int) -> np.ndarray:
    as_bytes = np.ascontiguousarray(words).view(np.uint8)
    bits = np.unpackbits(as_bytes, axis=-1, bitorder="little")
    return bits[..., :n].astype(bool)


@dataclass(frozen=True, eq=False)
class PauliOperator:
    """Signed Hermitian Pauli operator on ``n_qubits`` qubits."""

    n_qubits: int
    x_bits: np.ndarray
    z_bits: np.ndarray
    sign: int = 1

    def __post_init__(self):
        W = n_words(self.n_qubits)
        for name in ("x_bits", "z_bits"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.uint64)
            if arr.shape != (W,):
                raise ContractViolation(f"{name} must have {W} words, got shape {arr.shape}")
            rem = self.n_qubits % 64
            if rem and int(arr[-1]) >> rem:
                raise ContractViolation(f"{name} has bits set beyond qubit {self.n_qubits - 1}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.sign not in (1, -1):
            raise ContractViolation(f"sign must be +1 or -1, got {self.sign}")

    # construction helpers

    @classmethod
    def identity(cls, n_qubits: int) -> "PauliOperator":
        W = n_words(n_qubits)
        return cls(n_qubits, np.zeros(W, np.uint64), np.zeros(W, np.uint64))

    @classmethod
    def from_label(cls, label: str) -> "PauliOperator":
        """Parse ``"+XIZY"`` style labels (qubit 0 first)."""
        sign = 1
        if label[:1] in "+-":
            sign = -1 if label[0] == "-" else 1
            label = label[1:]
        try:
            bits = np.array([_LABEL_BITS[c] for c in label.upper()], dtype=bool).reshape(-1, 2)
        except KeyError as exc:
            raise ContractViolation(f"bad Pauli label character {exc}") from None
        return cls(len(label), _pack(bits[:, 0]), _pack(bits[:, 1]), sign)

    @classmethod
    def from_sparse(cls, n_qubits: int, ops: Mapping[int, str], sign: int = 1) -> "PauliOperator":
        """Build from ``{qubit: "X"|"Y"|"Z"}``."""
        x = np.zeros(n_qubits, dtype=bool)
        z = np.zeros(n_qubits, dtype=bool)
        for q, p in ops.items():
            if not 0 <= q < n_qubits:
                raise ContractViolation(f"qubit {q} out of range for n={n_qubits}")
            bx, bz = _LABEL_BITS[p.upper()]
            x[q] ^= bool(bx)
            z[q] ^= bool(bz)
        return cls(n_qubits, _pack(x), _pack(z), sign)

    @classmethod
    def from_bits(cls, x: np.ndarray, z: np.ndarray, sign: int = 1) -> "PauliOperator":
        x = np.asarray(x, dtype=bool)
        z = np.asarray(z, dtype=bool)
        return cls(x.shape[0], _pack(x), _pack(z), sign)

    @classmethod
    def from_row(cls, n_qubits: int, row: np.ndarray, sign: int = 1) -> "PauliOperator":
        W = n_words(n_qubits)
        return cls(n_qubits, row[:W].copy(), row[W:].copy(), sign)

    # views

    @property
    def row(self) -> np.ndarray:
        """Packed ``[x-words | z-words]`` row."""
        return np.concatenate([self.x_bits, self.z_bits])

    def x_vector(self) -> np.ndarray:
        return _unpack(self.x_bits, self.n_qubits)

    def z_vector(self) -> np.ndarray:
        return _unpack(self.z_bits, self.n_qubits)

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.x_vector() | self.z_vector())

    @property
    def weight(self) -> int:
        return int(sum(int(w).bit_count() for w in (self.x_bits | self.z_bits)))

    def sparse(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(qubits, x-bit, z-bit) arrays over the support."""
        xv, zv = self.x_vector(), self.z_vector()
        q = np.flatnonzero(xv | zv)
        return q.astype(np.int64), xv[q].astype(np.uint8), zv[q].astype(np.uint8)

    def unsigned(self) -> "PauliOperator":
        return PauliOperator(self.n_qubits, self.x_bits, self.z_bits, 1)

    def __neg__(self) -> "PauliOperator":
        return PauliOperator(self.n_qubits, self.x_bits, self.z_bits, -self.sign)

    def same_bits(self, other: "PauliOperator") -> bool:
        return (
            self.n_qubits == other.n_qubits
            and np.array_equal(self.x_bits, other.x_bits)
            and np.array_equal(self.z_bits, other.z_bits)
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, PauliOperator):
            return NotImplemented
        return self.same_bits(other) and self.sign == other.sign

    def __hash__(self) -> int:
        return hash((self.n_qubits, self.x_bits.tobytes(), self.z_bits.tobytes(), self.sign))

    def label(self) -> str:
        xv, zv = self.x_vector(), self.z_vector()
        body = "".join(_BITS_LABEL[(int(a), int(b))] for a, b in zip(xv, zv))
        return ("+" if self.sign == 1 else "-") + body

    def __repr__(self) -> str:
        if self.n_qubits <= 48:
            return f"PauliOperator({self.label()!r})"
        return f"PauliOperator(n={self.n_qubits}, support={self.support().tolist()}, sign={self.sign})"

    def __mul__(self, other: "PauliOperator") -> "PauliOperator":
        return multiply(self, other)


def _check_sizes(a: PauliOperator, b: PauliOperator) -> None:
    if a.n_qubits != b.n_qubits:
        raise ContractViolation(f"size mismatch: {a.n_qubits} vs {b.n_qubits} qubits")


def commutes(a: PauliOperator, b: PauliOperator) -> bool:
    """True iff ``a`` and ``b`` commute (symplectic form vanishes)."""
    _check_sizes(a, b)
    acc = 0
    for w in range(a.x_bits.shape[0]):
        acc ^= int((a.x_bits[w] & b.z_bits[w]) ^ (a.z_bits[w] & b.x_bits[w]))
    return acc.bit_count() % 2 == 0


def multiply_with_phase(a: PauliOperator, b: PauliOperator) -> tuple[PauliOperator, int]:
    """Return ``(P, k)`` with ``a * b = i**k * P`` and ``P`` carrying sign +1.

    ``k`` absorbs the signs of both factors and lies in ``0..3``.
    """
    _check_sizes(a, b)
    k = int(_bits.phase_of_product(a.x_bits, a.z_bits, b.x_bits, b.z_bits))
    k = (k + (2 if a.sign < 0 else 0) + (2 if b.sign < 0 else 0)) % 4
    P = PauliOperator(a.n_qubits, a.x_bits ^ b.x_bits, a.z_bits ^ b.z_bits, 1)
    return P, k


def multiply(a: PauliOperator, b: PauliOperator) -> PauliOperator:
    """Signed product ``a * b``; the factors must commute so the result is Hermitian."""
    P, k = multiply_with_phase(a, b)
    if k % 2:
        raise InvariantViolation("product of anticommuting Paulis is not Hermitian")
    return P if k == 0 else -P


@dataclass
class SymplecticMatrix:
    """Stack of packed Pauli rows (x-words then z-words per row) with signs."""

    n_qubits: int
    data: np.ndarray
    signs: np.ndarray = field(default=None)
    pivots: np.ndarray | None = None

    def __post_init__(self):
        W = n_words(self.n_qubits)
        self.data = np.ascontiguousarray(self.data, dtype=np.uint64).reshape(-1, 2 * W)
        if self.signs is None:
            self.signs = np.ones(self.data.shape[0], dtype=np.int8)
        self.signs = np.asarray(self.signs, dtype=np.int8)

    @classmethod
    def from_paulis(cls, paulis: Sequence[PauliOperator], n_qubits: int | None = None) -> "SymplecticMatrix":
        if n_qubits is None:
            if not paulis:
                raise ContractViolation("n_qubits required for an empty matrix")
            n_qubits = paulis[0].n_qubits
        W = n_words(n_qubits)
        data = np.zeros((len(paulis), 2 * W), dtype=np.uint64)
        for i, p in enumerate(paulis):
            if p.n_qubits != n_qubits:
                raise ContractViolation("all rows must act on the same number of qubits")
            data[i] = p.row
        return cls(n_qubits, data, np.array([p.sign for p in paulis], dtype=np.int8))

    @classmethod
    def from_dense(cls, x: np.ndarray, z: np.ndarray) -> "SymplecticMatrix":
        x = np.atleast_2d(np.asarray(x, dtype=bool))
        z = np.atleast_2d(np.asarray(z, dtype=bool))
        return cls(x.shape[1], np.concatenate([_pack(x), _pack(z)], axis=1))

    @property
    def row_count(self) -> int:
        return self.data.shape[0]

    @property
    def words(self) -> int:
        return n_words(self.n_qubits)

    def __len__(self) -> int:
        return self.row_count

    def rows(self) -> list[PauliOperator]:
        return [PauliOperator.from_row(self.n_qubits, r, int(s)) for r, s in zip(self.data, self.signs)]

    def to_dense(self) -> np.ndarray:
        """Boolean ``(rows, 2n)`` matrix, x-columns first."""
        W = self.words
        return np.concatenate(
            [_unpack(self.data[:, :W], self.n_qubits), _unpack(self.data[:, W:], self.n_qubits)], axis=1
        )

    def canonicalize(self) -> "SymplecticMatrix":
        """Reduced row echelon form (signs dropped), zero rows removed, pivots recorded."""
        work = self.data.copy()
        dummy = np.zeros((work.shape[0], 0), dtype=np.uint64)
        piv = _bits.gf2_rref(work, self.n_qubits, self.words, dummy)
        return SymplecticMatrix(self.n_qubits, work[: piv.shape[0]].copy(), pivots=piv.copy())

    def restrict(self, qubit_mask: np.ndarray) -> "SymplecticMatrix":
        """Zero all columns of qubits outside ``qubit_mask``."""
        m = _pack(np.asarray(qubit_mask, dtype=bool))
        mask = np.concatenate([m, m])
        return SymplecticMatrix(self.n_qubits, self.data & mask, self.signs.copy())


def rank_gf2(m: SymplecticMatrix) -> int:
    """GF(2) rank of the rows; the input is not modified."""
    if m.row_count == 0:
        return 0
    return int(_bits.gf2_rank(m.data, m.n_qubits, m.words))


class Combination(NamedTuple):
    """Basis rows whose ordered product equals ``i**phase * target``."""

    indices: tuple[int, ...]
    phase: int

    @property
    def sign(self) -> int:
        """+1 if the product equals the target, -1 if it equals minus the target."""
        if self.phase % 2:
            raise InvariantViolation("combination differs from target by an imaginary phase")
        return 1 if self.phase == 0 else -1

    def mask(self, n_rows: int) -> np.ndarray:
        out = np.zeros(n_rows, dtype=bool)
        out[list(self.indices)] = True
        return out


def _tracked_rref(basis: SymplecticMatrix):
    r = basis.row_count
    work = basis.data.copy()
    tw = max(1, (r + 63) // 64)
    track = np.zeros((r, tw), dtype=np.uint64)
    for i in range(r):
        track[i, i >> 6] = np.uint64(1) << np.uint64(i & 63)
    piv = _bits.gf2_rref(work, basis.n_qubits, basis.words, track)
    return work, track, piv


def solve_membership(basis: SymplecticMatrix, target: PauliOperator) -> Combination | None:
    """Express ``target`` (up to phase) as a product of basis rows, or return None.

    Rows are multiplied in ascending index order; the returned phase is the
    exponent ``k`` with ``prod = i**k * target`` including all row signs.
    """
    if target.n_qubits != basis.n_qubits:
        raise ContractViolation("target and basis act on different numbers of qubits")
    if basis.row_count == 0:
        return None if target.weight else Combination((), 0 if target.sign == 1 else 2)
    work, track, piv = _tracked_rref(basis)
    if piv.shape[0] != basis.row_count:
        raise ContractViolation("basis rows must be independent")
    n, W = basis.n_qubits, basis.words
    vec = target.row.copy()
    comb = np.zeros(track.shape[1], dtype=np.uint64)
    for i, c in enumerate(piv):
        word = c >> 6 if c < n else W + ((c - n) >> 6)
        bit = np.uint64(1) << np.uint64((c if c < n else c - n) & 63)
        if vec[word] & bit:
            vec ^= work[i]
            comb ^= track[i]
    if vec.any():
        return None
    bools = _unpack(comb, basis.row_count)
    idx = tuple(int(i) for i in np.flatnonzero(bools))
    acc = PauliOperator.identity(n)
    k = 0
    for i in idx:
        acc, kk = multiply_with_phase(acc, PauliOperator.from_row(n, basis.data[i], int(basis.signs[i])))
        k += kk
    if not acc.same_bits(target):
        raise InvariantViolation("membership reconstruction mismatch")
    k = (k + (2 if target.sign < 0 else 0)) % 4
    return Combination(idx, k)


def paulis_matrix(paulis: Iterable[PauliOperator], n_qubits: int) -> SymplecticMatrix:
    return SymplecticMatrix.from_paulis(list(paulis), n_qubits)
