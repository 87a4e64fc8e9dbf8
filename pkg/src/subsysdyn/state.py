"""Mixed stabilizer states under projective Pauli measurements.

A state on ``n`` qubits with ``m`` independent commuting signed generators is
the maximally mixed state on their common +1 eigenspace, so its von Neumann
entropy is ``n - m`` bits.  Internally the generators are completed to a full
symplectic basis (see ``_tableau``), which makes each measurement cost
``O(n)`` row operations with no Gaussian elimination.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _bits, _tableau
from ._bits import n_words
from .pauli import ContractViolation, PauliOperator, SymplecticMatrix, _pack

__all__ = ["StabilizerState", "Region", "RandomBits"]


@dataclass(frozen=True)
class Region:
    """A subsystem A given by a boolean qubit mask."""

    qubit_mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.qubit_mask, dtype=bool).copy()
        mask.setflags(write=False)
        object.__setattr__(self, "qubit_mask", mask)

    @classmethod
    def from_qubits(cls, n_qubits: int, qubits: Iterable[int]) -> "Region":
        mask = np.zeros(n_qubits, dtype=bool)
        mask[list(qubits)] = True
        return cls(mask)

    @property
    def n_qubits(self) -> int:
        return self.qubit_mask.shape[0]

    @property
    def size(self) -> int:
        return int(self.qubit_mask.sum())

    def complement(self) -> "Region":
        return Region(~self.qubit_mask)

    def is_proper(self) -> bool:
        return 0 < self.size < self.n_qubits


class RandomBits:
    """Source of fair outcome bits drawn from a numpy Generator."""

    def __init__(self, rng: np.random.Generator | int | None = None):
        self._rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)

    def bit(self) -> int:
        return int(self._rng.integers(2))


class StabilizerState:
    """State stabilizer group S(rho) with the three measurement-update rules."""

    def __init__(self, n_qubits: int):
        if n_qubits < 1:
            raise ContractViolation("need at least one qubit")
        self.n_qubits = n_qubits
        self._W = n_words(n_qubits)
        W = self._W
        RW = _tableau.row_words(n_qubits)
        tab = np.zeros((2 * n_qubits, 2 * W), dtype=np.uint64)
        cols = np.zeros((2 * n_qubits, RW), dtype=np.uint64)
        for j in range(n_qubits):
            word, bit = j >> 6, np.uint64(1) << np.uint64(j & 63)
            tab[2 * j, W + word] = bit  # A_j = Z_j
            tab[2 * j + 1, word] = bit  # B_j = X_j
            cols[n_qubits + j, (2 * j) >> 6] |= np.uint64(1) << np.uint64((2 * j) & 63)
            cols[j, (2 * j + 1) >> 6] |= np.uint64(1) << np.uint64((2 * j + 1) & 63)
        self._tab = tab
        self._cols = cols
        self._signs = np.zeros(2 * n_qubits, dtype=np.uint8)
        self._stab = np.zeros(RW, dtype=np.uint64)
        self._ac = np.zeros(RW, dtype=np.uint64)
        self._scratch = np.zeros(2 * W, dtype=np.uint64)
        self._grow = np.zeros(2 * W, dtype=np.uint64)

    @property
    def _is_stab(self) -> np.ndarray:
        bits = np.unpackbits(self._stab.view(np.uint8), bitorder="little")[: 2 * self.n_qubits]
        return bits[0::2].astype(bool)

    # construction

    @classmethod
    def maximally_mixed(cls, n_qubits: int) -> "StabilizerState":
        return cls(n_qubits)

    @classmethod
    def from_generators(cls, generators: Sequence[PauliOperator], n_qubits: int | None = None) -> "StabilizerState":
        """State stabilized by the given independent commuting signed Paulis."""
        if n_qubits is None:
            if not generators:
                raise ContractViolation("n_qubits required without generators")
            n_qubits = generators[0].n_qubits
        st = cls(n_qubits)
        for g in generators:
            want = 0 if g.sign == 1 else 1
            _, rule = st._measure_row(g.unsigned(), forced_bit=want)
            if rule != _tableau.RULE_COMMUTING:
                raise ContractViolation(f"generator {g!r} is dependent on or anticommutes with earlier ones")
        return st

    def copy(self) -> "StabilizerState":
        out = object.__new__(StabilizerState)
        out.n_qubits = self.n_qubits
        out._W = self._W
        out._tab = self._tab.copy()
        out._cols = self._cols.copy()
        out._signs = self._signs.copy()
        out._stab = self._stab.copy()
        out._ac = np.zeros_like(self._ac)
        out._scratch = np.zeros_like(self._scratch)
        out._grow = np.zeros_like(self._grow)
        return out

    # queries

    @property
    def n_generators(self) -> int:
        return int(np.unpackbits(self._stab.view(np.uint8)).sum())

    @property
    def generators(self) -> list[PauliOperator]:
        """Signed generators in pair order (the pivot order of rule 3)."""
        out = []
        for j in np.flatnonzero(self._is_stab):
            r = 2 * j
            out.append(PauliOperator.from_row(self.n_qubits, self._tab[r], -1 if self._signs[r] else 1))
        return out

    def generator_matrix(self) -> SymplecticMatrix:
        rows = 2 * np.flatnonzero(self._is_stab)
        signs = np.where(self._signs[rows] == 1, -1, 1)
        return SymplecticMatrix(self.n_qubits, self._tab[rows].copy(), signs)

    def von_neumann_entropy(self) -> int:
        """``N - m`` in bits."""
        return self.n_qubits - self.n_generators

    def entanglement_entropy(self, region: Region) -> int:
        """Entropy of the reduced state on ``region`` in bits.

        ``S_A = |A| - dim(S_A)`` where ``S_A`` is the subgroup supported on A,
        and ``dim(S_A) = m - rank(generators restricted to the complement)``.
        Empty and full regions return 0.
        """
        mask = np.asarray(region.qubit_mask, dtype=bool)
        if mask.shape[0] != self.n_qubits:
            raise ContractViolation("region size does not match the state")
        size = int(mask.sum())
        if size == 0 or size == self.n_qubits:
            return 0
        rows = 2 * np.flatnonzero(self._is_stab)
        m = rows.shape[0]
        if m == 0:
            return size
        packed = _pack(~mask)
        restricted = self._tab[rows] & np.concatenate([packed, packed])
        r = int(_bits.gf2_rank(restricted, self.n_qubits, self._W))
        return size - (m - r)

    def contains(self, s: PauliOperator) -> tuple[bool, int | None]:
        """Whether ``+s`` or ``-s`` is in S(rho); returns ``(member, sign)``."""
        if s.n_qubits != self.n_qubits:
            raise ContractViolation("operator size does not match the state")
        member, sbit = _tableau.contains_dense(
            self._tab, self._signs, self._cols, self._stab, self.n_qubits, self._W, s.row, self._ac, self._scratch
        )
        if not member:
            return False, None
        return True, (-1 if sbit else 1) * s.sign

    def contains_code_stabilizer(self, s: PauliOperator) -> tuple[bool, int | None]:
        """Code-stabilizer membership; once true it stays true under check-only dynamics."""
        return self.contains(s)

    def check_invariants(self) -> None:
        """Verify the full symplectic pairing and generator independence (slow)."""
        n, W = self.n_qubits, self._W
        gram = _bits.commutation_matrix(self._tab, self._tab, W)
        expected = np.zeros((2 * n, 2 * n), dtype=np.uint8)
        for j in range(n):
            expected[2 * j, 2 * j + 1] = expected[2 * j + 1, 2 * j] = 1
        if not np.array_equal(gram, expected):
            raise AssertionError("tableau lost its symplectic pairing")
        if _bits.gf2_rank(self._tab, n, W) != 2 * n:
            raise AssertionError("tableau rows are dependent")
        cols = np.zeros_like(self._cols)
        _tableau.build_columns(self._tab, n, W, cols)
        if not np.array_equal(cols, self._cols):
            raise AssertionError("column mirror out of sync with the tableau")

    # measurement

    def _measure_row(self, g: PauliOperator, forced_bit: int):
        """Measure with a fixed outcome bit for the random cases."""
        q, gx, gz = g.sparse()
        return _tableau.measure(
            self._tab,
            self._signs,
            self._cols,
            self._stab,
            self.n_qubits,
            self._W,
            q,
            gx,
            gz,
            np.uint8(0 if g.sign == 1 else 1),
            np.uint8(forced_bit),
            self._ac,
            self._scratch,
            self._grow,
        )

    def measure(self, g: PauliOperator, rng: RandomBits | np.random.Generator | None = None, *, outcome: int | None = None):
        """Projectively measure ``g``; returns ``(outcome, rule)`` with outcome in {+1, -1}.

        Rule 1: ``+-g`` already in S(rho), outcome deterministic.  Rule 2: ``g``
        commutes with S(rho) and is appended.  Rule 3: ``g`` replaces the
        lowest-index anticommuting generator.  Random outcomes come from
        ``rng`` unless ``outcome`` forces them (used for replaying records).
        """
        if not isinstance(g, PauliOperator):
            raise ContractViolation("can only measure Hermitian PauliOperator instances")
        if g.n_qubits != self.n_qubits:
            raise ContractViolation("operator size does not match the state")
        if outcome is not None:
            bit = 0 if outcome == 1 else 1
        elif isinstance(rng, RandomBits):
            bit = rng.bit()
        else:
            bit = RandomBits(rng).bit() if not isinstance(rng, np.random.Generator) else int(rng.integers(2))
        obit, rule = self._measure_row(g, bit)
        return (1 if obit == 0 else -1), int(rule)

    def __repr__(self) -> str:
        return f"StabilizerState(n_qubits={self.n_qubits}, m={self.n_generators})"
