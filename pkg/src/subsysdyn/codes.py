"""Catalog of Pauli subsystem codes used as measurement-only circuits.

Site indexing is row-major with x fastest: ``site(x, y, z) = x + L*y + L*L*z``.

Yao-Kivelson lattice (decorated honeycomb, periodic ``L x L`` cells): cell
``(i, j)`` holds an A-triangle with sites ``a, b, c`` (offsets 0, 1, 2) and a
B-triangle (offsets 3, 4, 5); ``site = 6*(i + L*j) + offset``.  Internal bonds
are ``ab`` (ZZ), ``bc`` (XX), ``ca`` (YY) in both triangles, so the external
bond of ``a`` is X-colored, of ``b`` Y-colored and of ``c`` Z-colored.
External bonds: ``A.a(i,j)-B.a(i,j)`` (XX), ``A.b(i,j)-B.b(i-1,j)`` (YY),
``A.c(i,j)-B.c(i,j-1)`` (ZZ).  Faces are triangles and dodecagons.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import networkx as nx
import numpy as np

from . import _bits
from .pauli import (
    ContractViolation,
    PauliOperator,
    SymplecticMatrix,
    commutes,
    rank_gf2,
    solve_membership,
)
from .state import Region

__all__ = [
    "CheckClass",
    "CodeStabilizer",
    "Lattice",
    "CodeSpec",
    "CodeParameters",
    "CodeConstructionError",
    "build_ising_chain",
    "build_bacon_shor_2d",
    "build_bacon_shor_3d",
    "build_compass_3d",
    "build_plaquette_css",
    "build_plaquette_noncss",
    "build_yao_kivelson",
    "build_code",
    "CODE_BUILDERS",
    "compute_code_parameters",
    "frustration_graph",
    "is_bipartite",
    "site_coordinates",
    "half_cut",
]


class CodeConstructionError(ValueError):
    """A code spec violates a structural requirement."""


@dataclass(frozen=True)
class Lattice:
    dimension: int
    L: int
    boundary: str  # "open" | "periodic"

    def site(self, *coords: int) -> int:
        L = self.L
        idx = 0
        for c in reversed(coords):
            if self.boundary == "periodic":
                c %= L
            elif not 0 <= c < L:
                raise IndexError(f"site {coords} outside open lattice")
            idx = idx * L + c
        return idx


@dataclass(frozen=True)
class CheckClass:
    name: str
    rate_symbol: str
    checks: tuple[PauliOperator, ...]

    def __len__(self) -> int:
        return len(self.checks)


@dataclass(frozen=True)
class CodeStabilizer:
    """Code stabilizer generator with geometry metadata.

    ``delta`` is the dimension of its support (1 strings, 2 sheets, 0 local
    loops); ``measurable`` is False when no sequence of check measurements
    can place it in the state stabilizer group on its own.
    """

    operator: PauliOperator
    family: str
    delta: int
    axis: str | None = None
    label: str = ""
    measurable: bool = True


@dataclass
class CodeSpec:
    name: str
    n_qubits: int
    lattice: Lattice
    check_classes: dict[str, CheckClass]
    code_stabilizer_generators: list[CodeStabilizer]
    logical_representatives: list[tuple[PauliOperator, PauliOperator]] = field(default_factory=list)
    logical_candidates: list[PauliOperator] = field(default_factory=list)
    unpurifiable_dof: int = 0
    css: bool = False

    @property
    def checks(self) -> list[PauliOperator]:
        return [g for cls in self.check_classes.values() for g in cls.checks]

    def check_matrix(self) -> SymplecticMatrix:
        return SymplecticMatrix.from_paulis(self.checks, self.n_qubits)

    def default_rates(self) -> dict[str, float]:
        k = len(self.check_classes)
        return {name: 1.0 / k for name in self.check_classes}

    def stabilizer_families(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for s in self.code_stabilizer_generators:
            out[s.family] = out.get(s.family, 0) + 1
        return out

    def stabilizers_by_delta(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for s in self.code_stabilizer_generators:
            out[s.delta] = out.get(s.delta, 0) + 1
        return out


@dataclass(frozen=True)
class CodeParameters:
    N: int
    K: int
    R: int
    N_S: int
    distance_upper_bound: int | None = None

    def as_dict(self) -> dict:
        return {"N": self.N, "K": self.K, "R": self.R, "N_S": self.N_S, "distance_upper_bound": self.distance_upper_bound}


# linear-algebra helpers over the check group


def _independent_rows(m: SymplecticMatrix) -> SymplecticMatrix:
    return m.canonicalize()


def _gram(a: np.ndarray, b: np.ndarray, W: int) -> np.ndarray:
    return _bits.commutation_matrix(a, b, W).astype(bool)


def _nullspace_left(M: np.ndarray) -> np.ndarray:
    """Rows spanning {c : c^T M = 0} over GF(2) for a boolean matrix M."""
    r, c = M.shape
    if r == 0:
        return np.zeros((0, 0), dtype=bool)
    mat = SymplecticMatrix.from_dense(M, np.zeros_like(M))
    work = mat.data.copy()
    tw = (r + 63) // 64
    track = np.zeros((r, tw), dtype=np.uint64)
    for i in range(r):
        track[i, i >> 6] = np.uint64(1) << np.uint64(i & 63)
    piv = _bits.gf2_rref(work, c, mat.words, track)
    kernel = track[piv.shape[0] :]
    bits = np.unpackbits(np.ascontiguousarray(kernel).view(np.uint8), axis=1, bitorder="little")[:, :r]
    return bits.astype(bool)


def _combine(rows: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    out = np.zeros((coeffs.shape[0], rows.shape[1]), dtype=np.uint64)
    for i, c in enumerate(coeffs):
        sel = rows[np.flatnonzero(c)]
        if sel.shape[0]:
            out[i] = np.bitwise_xor.reduce(sel, axis=0)
    return out


def center_basis(checks: SymplecticMatrix) -> SymplecticMatrix:
    """Independent generators of the center of the check group (unsigned)."""
    H = _independent_rows(checks)
    M = _gram(H.data, H.data, H.words)
    coeffs = _nullspace_left(M)
    return SymplecticMatrix(H.n_qubits, _combine(H.data, coeffs))


def centralizer_basis(checks: SymplecticMatrix) -> SymplecticMatrix:
    """Independent Paulis commuting with every check."""
    H = _independent_rows(checks)
    n = H.n_qubits
    dense = H.to_dense()
    swapped = np.concatenate([dense[:, n:], dense[:, :n]], axis=1)  # v -> <row, v>
    null = _nullspace_left(swapped.T.copy())
    return SymplecticMatrix.from_dense(null[:, :n], null[:, n:])


def _in_span(basis: SymplecticMatrix, p: PauliOperator) -> bool:
    if basis.row_count == 0:
        return p.weight == 0
    both = SymplecticMatrix(basis.n_qubits, np.vstack([basis.data, p.row[None, :]]))
    return rank_gf2(both) == rank_gf2(basis)


def _select_independent(cands: Sequence[CodeStabilizer], n: int) -> list[CodeStabilizer]:
    chosen: list[CodeStabilizer] = []
    rows = np.zeros((0, 2 * _bits.n_words(n)), dtype=np.uint64)
    rank = 0
    for c in cands:
        trial = np.vstack([rows, c.operator.row[None, :]])
        r = int(_bits.gf2_rank(trial, n, _bits.n_words(n)))
        if r > rank:
            rows, rank = trial, r
            chosen.append(c)
    return chosen


def _pair_logicals(
    gauge: SymplecticMatrix, candidates: Sequence[PauliOperator], K: int, checks: SymplecticMatrix
) -> list[tuple[PauliOperator, PauliOperator]]:
    """Symplectic Gram-Schmidt of logical candidates modulo the gauge group."""
    n = gauge.n_qubits
    pool = [c.unsigned() for c in candidates]
    if len(pool) < 2 * K:
        pool += centralizer_basis(checks).rows()
    pairs: list[tuple[PauliOperator, PauliOperator]] = []
    span = SymplecticMatrix(n, gauge.data.copy())
    work = [p for p in pool if not _in_span(span, p)]
    while work and len(pairs) < K:
        a = work.pop(0)
        if _in_span(span, a):
            continue
        partner = next((i for i, b in enumerate(work) if not commutes(a, b)), None)
        if partner is None:
            continue
        b = work.pop(partner)
        fixed = []
        for c in work:
            if not commutes(c, b):
                c = PauliOperator(n, c.x_bits ^ a.x_bits, c.z_bits ^ a.z_bits)
            if not commutes(c, a):
                c = PauliOperator(n, c.x_bits ^ b.x_bits, c.z_bits ^ b.z_bits)
            fixed.append(c)
        pairs.append((a, b))
        span = SymplecticMatrix(n, np.vstack([span.data, a.row[None, :], b.row[None, :]]))
        work = [c for c in fixed if not _in_span(span, c)]
    return pairs


def _finalize(
    name: str,
    lattice: Lattice,
    classes: dict[str, CheckClass],
    stab_candidates: Sequence[CodeStabilizer],
    logical_candidates: Sequence[PauliOperator],
    *,
    unpurifiable_dof: int = 0,
    css: bool = False,
) -> CodeSpec:
    n = lattice.L ** lattice.dimension if name != "yao-kivelson" else 6 * lattice.L ** 2
    spec = CodeSpec(name, n, lattice, classes, [], [], [], unpurifiable_dof, css)
    checks = spec.check_matrix()
    W = checks.words
    for s in stab_candidates:
        if _gram(s.operator.row[None, :], checks.data, W).any():
            raise CodeConstructionError(f"{name}: stabilizer {s.label} anticommutes with a check")
    in_group = [s for s in stab_candidates if solve_membership(checks.canonicalize(), s.operator) is not None]
    gens = _select_independent(in_group, n)
    center = center_basis(checks)
    if len(gens) < center.row_count:
        extra = [CodeStabilizer(p, "other", -1, None, f"center-{i}") for i, p in enumerate(center.rows())]
        gens = _select_independent(gens + extra, n)
    spec.code_stabilizer_generators = gens
    gauge = checks.canonicalize()
    logicals = []
    for p in logical_candidates:
        if _gram(p.row[None, :], checks.data, W).any():
            raise CodeConstructionError(f"{name}: logical candidate {p!r} anticommutes with a check")
        if not _in_span(gauge, p):
            logicals.append(p.unsigned())
    spec.logical_candidates = logicals
    params = compute_code_parameters(spec)
    spec.logical_representatives = _pair_logicals(gauge, logicals, params.K, checks)
    return spec


# builders


def _op(n: int, ops: dict[int, str]) -> PauliOperator:
    return PauliOperator.from_sparse(n, ops)


def _product(n: int, ops: Iterable[PauliOperator]) -> PauliOperator:
    """Unsigned product of Paulis (phases dropped)."""
    acc = PauliOperator.identity(n)
    for p in ops:
        acc = PauliOperator(n, acc.x_bits ^ p.x_bits, acc.z_bits ^ p.z_bits)
    return acc


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ContractViolation(msg)


def build_ising_chain(L: int) -> CodeSpec:
    """Projective transverse-field Ising chain (periodic): checks X_i and Z_i Z_{i+1}."""
    _require(L >= 2, "Ising chain needs L >= 2")
    lat = Lattice(1, L, "periodic")
    xs = tuple(_op(L, {i: "X"}) for i in range(L))
    n_bonds = L if L > 2 else 1  # L = 2 would list the same bond twice
    zs = tuple(_op(L, {i: "Z", (i + 1) % L: "Z"}) for i in range(n_bonds))
    classes = {"X": CheckClass("X", "p_x", xs), "Z": CheckClass("Z", "p_z", zs)}
    stab = CodeStabilizer(_product(L, xs), "X", 1, "x", "X-string")
    return _finalize("ising", lat, classes, [stab], [], css=True)


def build_bacon_shor_2d(L: int, boundary: str = "open") -> CodeSpec:
    """2D Bacon-Shor: XX on x-bonds, ZZ on y-bonds; strips are column/row pairs."""
    _require(L >= 2, "2D Bacon-Shor needs L >= 2")
    lat = Lattice(2, L, boundary)
    n = L * L
    s = lat.site
    span = range(L) if boundary == "periodic" else range(L - 1)
    xchk = tuple(_op(n, {s(x, y): "X", s(x + 1, y): "X"}) for y in range(L) for x in span)
    zchk = tuple(_op(n, {s(x, y): "Z", s(x, y + 1): "Z"}) for y in span for x in range(L))
    classes = {"X": CheckClass("X", "p_x", xchk), "Z": CheckClass("Z", "p_z", zchk)}
    stabs = []
    for x in span:
        ops = {s(x, y): "X" for y in range(L)} | {s(x + 1, y): "X" for y in range(L)}
        stabs.append(CodeStabilizer(_op(n, ops), "X", 1, "y", f"X-strip x={x}"))
    for y in span:
        ops = {s(x, y): "Z" for x in range(L)} | {s(x, y + 1): "Z" for x in range(L)}
        stabs.append(CodeStabilizer(_op(n, ops), "Z", 1, "x", f"Z-strip y={y}"))
    logicals = [_op(n, {s(0, y): "X" for y in range(L)}), _op(n, {s(x, 0): "Z" for x in range(L)})]
    return _finalize("bsc2d", lat, classes, stabs, logicals, css=True)


def build_bacon_shor_3d(L: int, boundary: str = "open", allow_even: bool = False) -> CodeSpec:
    """3D Bacon-Shor: X checks on x/y bonds, Z checks on y/z bonds; nailbed stabilizers."""
    _require(L >= 3 or (allow_even and L >= 2), "3D Bacon-Shor needs L >= 3")
    if L % 2 == 0 and not allow_even:
        raise ContractViolation("3D Bacon-Shor with even L has no logical qubit; pass allow_even=True")
    lat = Lattice(3, L, boundary)
    n = L**3
    s = lat.site
    span = range(L) if boundary == "periodic" else range(L - 1)
    full = range(L)
    sites = list(itertools.product(full, full, full))

    def bonds(axis: int, pauli: str):
        out = []
        for r in sites:
            if r[axis] not in span:
                continue
            r2 = list(r)
            r2[axis] += 1
            out.append(_op(n, {s(*r): pauli, s(*r2): pauli}))
        return out

    xchk = tuple(bonds(0, "X") + bonds(1, "X"))
    zchk = tuple(bonds(1, "Z") + bonds(2, "Z"))
    classes = {"X": CheckClass("X", "p_x", xchk), "Z": CheckClass("Z", "p_z", zchk)}
    stabs = []
    for c in span:
        ops = {s(r[0], r[1], r[2]): "X" for r in sites if r[0] in (c, (c + 1) % L)}
        stabs.append(CodeStabilizer(_op(n, ops), "X", 2, "x", f"X-nailbed x={c}"))
    for c in span:
        ops = {s(*r): "Z" for r in sites if r[2] in (c, (c + 1) % L)}
        stabs.append(CodeStabilizer(_op(n, ops), "Z", 2, "z", f"Z-nailbed z={c}"))
    logicals = [_op(n, {s(*r): "X" for r in sites if r[0] == 0}), _op(n, {s(*r): "Z" for r in sites if r[2] == 0})]
    return _finalize("bsc3d", lat, classes, stabs, logicals, css=True)


def build_compass_3d(L: int, boundary: str = "open") -> CodeSpec:
    """3D 90-degree compass circuit: alpha-alpha checks on alpha-bonds, alpha in X, Y, Z."""
    _require(L >= 2, "3D compass needs L >= 2")
    lat = Lattice(3, L, boundary)
    n = L**3
    s = lat.site
    span = range(L) if boundary == "periodic" else range(L - 1)
    sites = list(itertools.product(range(L), repeat=3))
    classes = {}
    stabs = []
    logicals = []
    for axis, pauli in enumerate("XYZ"):
        chk = []
        for r in sites:
            if r[axis] not in span:
                continue
            r2 = list(r)
            r2[axis] += 1
            chk.append(_op(n, {s(*r): pauli, s(*r2): pauli}))
        classes[pauli] = CheckClass(pauli, f"p_{pauli.lower()}", tuple(chk))
        ax = "xyz"[axis]
        for c in span:
            ops = {s(*r): pauli for r in sites if r[axis] in (c, (c + 1) % L)}
            stabs.append(CodeStabilizer(_op(n, ops), pauli, 2, ax, f"{pauli}-plane-pair {ax}={c}"))
        logicals.append(_op(n, {s(*r): pauli for r in sites if r[axis] == 0}))
    return _finalize("compass3d", lat, classes, stabs, logicals)


_EX, _EY, _EZ = (1, 0, 0), (0, 1, 0), (0, 0, 1)


def _plaquette(lat: Lattice, r, d1, d2, paulis: str) -> PauliOperator:
    pts = [r, tuple(map(sum, zip(r, d1))), tuple(map(sum, zip(r, d2))), tuple(map(sum, zip(r, d1, d2)))]
    ops: dict[int, str] = {}
    for p, o in zip(pts, paulis):
        ops[lat.site(*p)] = o
    return PauliOperator.from_sparse(lat.L**3, ops)


def _plaquette_extras(lat: Lattice, families: Sequence[tuple[str, Sequence[PauliOperator], int]]):
    """Tube (string) products of same-orientation checks along their normal axis."""
    L = lat.L
    n = L**3
    stabs = []
    for fam, chk, axis, tube in families:
        if not tube:
            continue
        ax = "xyz"[axis]
        by_line: dict[tuple, list[PauliOperator]] = {}
        for r, g in chk:
            key = tuple(c for i, c in enumerate(r) if i != axis)
            by_line.setdefault(key, []).append(g)
        for key, gs in sorted(by_line.items()):
            stabs.append(CodeStabilizer(_product(n, gs), fam, 1, ax, f"{fam} along {ax} at {key}"))
    return stabs


def _sheets_and_lines(lat: Lattice, paulis: str):
    """Single-letter planes and straight lines, keyed by letter and geometry."""
    L = lat.L
    n = L**3
    sites = list(itertools.product(range(L), repeat=3))
    sheets = []
    for p in paulis:
        for axis in range(3):
            for c in range(L):
                sheets.append((p, axis, c, _op(n, {lat.site(*r): p for r in sites if r[axis] == c})))
    lines = {}
    for p in paulis:
        for axis in range(3):
            others = [i for i in range(3) if i != axis]
            for a, b in itertools.product(range(L), repeat=2):
                ops = {}
                for t in range(L):
                    r = [0, 0, 0]
                    r[axis], r[others[0]], r[others[1]] = t, a, b
                    ops[lat.site(*r)] = p
                lines[(p, axis, a, b)] = _op(n, ops)
    return sheets, lines


def _plaquette_code(
    name: str, L: int, layout: Sequence[tuple[str, str, tuple, tuple, str, int, bool]], css: bool
) -> CodeSpec:
    """Layout rows: (class, family, d1, d2, letters, normal axis, forms strings along the normal)."""
    _require(L >= 2, "plaquette codes need L >= 2")
    lat = Lattice(3, L, "periodic")
    sites = list(itertools.product(range(L), repeat=3))
    classes: dict[str, list] = {}
    families = []
    for cls_name, fam, d1, d2, paulis, normal, tube in layout:
        placed = [(r, _plaquette(lat, r, d1, d2, paulis)) for r in sites]
        classes.setdefault(cls_name, []).extend(g for _, g in placed)
        families.append((fam, placed, normal, tube))
    symbols = {name_: "p_" + name_[0].lower() for name_ in classes}
    check_classes = {k: CheckClass(k, symbols[k], tuple(v)) for k, v in classes.items()}
    strings = _plaquette_extras(lat, families)
    letters = "".join(sorted({c for row in layout for c in row[4]}))
    sheet_ops, line_ops = _sheets_and_lines(lat, letters)
    probe = SymplecticMatrix.from_paulis([g for v in classes.values() for g in v], L**3)
    W = probe.words

    def central(op: PauliOperator) -> bool:
        return not _gram(op.row[None, :], probe.data, W).any()

    sheet_stabs = []
    logical_cands = []
    for p, axis, c, op in sheet_ops:
        if central(op):
            sheet_stabs.append(CodeStabilizer(op, f"{p}-sheet", 2, "xyz"[axis], f"{p}-sheet {'xyz'[axis]}={c}"))
            logical_cands.append(op)
    # two parallel lines in a common plane: planar, lie in the check group when L is even
    pairs = []
    for (p, axis, a, b), op in line_ops.items():
        if not central(op):
            continue
        logical_cands.append(op)
        others = [i for i in range(3) if i != axis]
        for k, (da, db) in enumerate(((1, 0), (0, 1))):
            nb = line_ops.get((p, axis, (a + da) % L, (b + db) % L))
            if nb is None or not central(nb) or (da and a == L - 1) or (db and b == L - 1):
                continue
            plane = others[1 - k]
            pos = b if k == 0 else a
            pairs.append(
                CodeStabilizer(
                    _product(len(op.x_vector()), [op, nb]),
                    f"{p}-sheet",
                    2,
                    "xyz"[plane],
                    f"{p}-line-pair along {'xyz'[axis]} in {'xyz'[plane]}={pos}",
                )
            )
    return _finalize(name, lat, check_classes, strings + sheet_stabs + pairs, logical_cands, css=css)


def build_plaquette_css(L: int) -> CodeSpec:
    """CSS plaquette code: X plaquettes normal to x, y; Z plaquettes normal to z, y (periodic)."""
    layout = [
        ("X", "X-string", _EY, _EZ, "XXXX", 0, True),
        ("X", "X-y", _EX, _EZ, "XXXX", 1, False),
        ("Z", "Z-string", _EX, _EY, "ZZZZ", 2, True),
        ("Z", "Z-y", _EX, _EZ, "ZZZZ", 1, False),
    ]
    return _plaquette_code("plaquette-css", L, layout, css=True)


def build_plaquette_noncss(L: int) -> CodeSpec:
    """Non-CSS plaquette code: X, Y, Z four-body plaquettes normal to x, y, z (periodic).

    Uses an all-Y plaquette normal to y.
    """
    layout = [
        ("X", "X-string", _EY, _EZ, "XXXX", 0, True),
        ("Y", "Y-string", _EX, _EZ, "YYYY", 1, True),
        ("Z", "Z-string", _EX, _EY, "ZZZZ", 2, True),
    ]
    return _plaquette_code("plaquette-noncss", L, layout, css=False)


def _yk_site(L: int, i: int, j: int, off: int) -> int:
    return 6 * ((i % L) + L * (j % L)) + off


def yao_kivelson_bonds(L: int) -> list[tuple[int, int, str, str]]:
    """Bonds as ``(site1, site2, pauli, kind)`` with kind "triangle" or "link"."""
    bonds = []
    for j in range(L):
        for i in range(L):
            for base in (0, 3):
                a, b, c = (_yk_site(L, i, j, base + k) for k in range(3))
                bonds += [(a, b, "Z", "triangle"), (b, c, "X", "triangle"), (c, a, "Y", "triangle")]
            bonds.append((_yk_site(L, i, j, 0), _yk_site(L, i, j, 3), "X", "link"))
            bonds.append((_yk_site(L, i, j, 1), _yk_site(L, i - 1, j, 4), "Y", "link"))
            bonds.append((_yk_site(L, i, j, 2), _yk_site(L, i, j - 1, 5), "Z", "link"))
    return bonds


def build_yao_kivelson(L: int) -> CodeSpec:
    """Measurement-only Kitaev circuit on the decorated honeycomb (star) lattice."""
    _require(L >= 2, "Yao-Kivelson needs L >= 2")
    n = 6 * L * L
    lat = Lattice(2, L, "periodic")
    bonds = yao_kivelson_bonds(L)

    def chk(a, b, p):
        return _op(n, {a: p, b: p})

    classes = {
        p: CheckClass(p, f"p_{p.lower()}", tuple(chk(a, b, q) for a, b, q, _ in bonds if q == p)) for p in "XYZ"
    }
    stabs = []
    for j in range(L):
        for i in range(L):
            for base, sub in ((0, "A"), (3, "B")):
                a, b, c = (_yk_site(L, i, j, base + k) for k in range(3))
                tri = _op(n, {a: "X", b: "Y", c: "Z"})
                stabs.append(CodeStabilizer(tri, "triangle", 0, None, f"triangle {sub}({i},{j})", measurable=False))
    lookup = {}
    for a, b, p, _ in bonds:
        lookup[frozenset((a, b))] = chk(a, b, p)

    for j in range(L):
        for i in range(L):
            # A(i,j) -x- B(i,j) -y- A(i+1,j) -z- B(i+1,j-1) -x- A(i+1,j-1) -y- B(i,j-1) -z- A(i,j)
            verts = [
                ("A", i, j, "z", "x"),
                ("B", i, j, "x", "y"),
                ("A", i + 1, j, "y", "z"),
                ("B", i + 1, j - 1, "z", "x"),
                ("A", i + 1, j - 1, "x", "y"),
                ("B", i, j - 1, "y", "z"),
            ]
            stabs.append(
                CodeStabilizer(_yk_loop(L, n, verts, lookup), "dodecagon", 0, None, f"dodecagon ({i},{j})")
            )
    # non-contractible loops along i (x/y links) and along j (x/z links)
    row = []
    for i in range(L):
        row += [("A", i, 0, "y", "x"), ("B", i, 0, "x", "y")]
    col = []
    for j in range(L):
        col += [("A", 0, j, "z", "x"), ("B", 0, j, "x", "z")]
    stabs.append(CodeStabilizer(_yk_loop(L, n, row, lookup), "loop", 1, "i", "loop along i"))
    stabs.append(CodeStabilizer(_yk_loop(L, n, col, lookup), "loop", 1, "j", "loop along j"))
    return _finalize("yao-kivelson", lat, classes, stabs, [], unpurifiable_dof=1)


_OFF = {"x": 0, "y": 1, "z": 2}


def _yk_loop(L: int, n: int, verts, lookup) -> PauliOperator:
    """Product of checks along a closed path through triangles.

    Each vertex is ``(sublattice, i, j, color_in, color_out)``: the path enters
    the triangle at the site whose external bond has ``color_in`` and leaves at
    the ``color_out`` site, crossing one internal bond; consecutive vertices
    are joined by the external bond of ``color_out``.
    """
    ops = []
    for k, (sub, i, j, cin, cout) in enumerate(verts):
        base = 0 if sub == "A" else 3
        s_in = _yk_site(L, i, j, base + _OFF[cin])
        s_out = _yk_site(L, i, j, base + _OFF[cout])
        ops.append(lookup[frozenset((s_in, s_out))])
        nsub, ni, nj, ncin, _ = verts[(k + 1) % len(verts)]
        nbase = 0 if nsub == "A" else 3
        s_next = _yk_site(L, ni, nj, nbase + _OFF[ncin])
        if ncin != cout:
            raise CodeConstructionError("loop path colors do not match")
        ops.append(lookup[frozenset((s_out, s_next))])
    return _product(n, ops)


CODE_BUILDERS: dict[str, Callable[..., CodeSpec]] = {
    "ising": build_ising_chain,
    "bsc2d": build_bacon_shor_2d,
    "bsc3d": build_bacon_shor_3d,
    "compass3d": build_compass_3d,
    "plaquette-css": build_plaquette_css,
    "plaquette-noncss": build_plaquette_noncss,
    "yao-kivelson": build_yao_kivelson,
}


def build_code(name: str, L: int, **options) -> CodeSpec:
    try:
        builder = CODE_BUILDERS[name]
    except KeyError:
        raise ContractViolation(f"unknown code {name!r}; choose from {sorted(CODE_BUILDERS)}") from None
    return builder(L, **options)


def compute_code_parameters(spec: CodeSpec) -> CodeParameters:
    """(N, K, R, N_S) from the check group: r = rank, s = rank of its center.

    ``K = N - s - (r - s)/2``; the distance bound is the minimum weight of the
    logical candidates that lie outside the check group.
    """
    checks = spec.check_matrix()
    H = _independent_rows(checks)
    r = H.row_count
    M = _gram(H.data, H.data, H.words)
    s = r - rank_gf2(SymplecticMatrix.from_dense(M, np.zeros_like(M)))
    if (r - s) % 2:
        raise CodeConstructionError("odd number of gauge generators")
    R = (r - s) // 2
    K = spec.n_qubits - s - R
    for st in spec.code_stabilizer_generators:
        if _gram(st.operator.row[None, :], checks.data, checks.words).any():
            raise CodeConstructionError(f"declared stabilizer {st.label} is not in the center")
    weights = [p.weight for p in spec.logical_candidates]
    for a, b in spec.logical_representatives:
        weights += [a.weight, b.weight]
    return CodeParameters(spec.n_qubits, K, R, s, min(weights) if weights and K > 0 else None)


def frustration_graph(spec_or_checks: CodeSpec | Sequence[PauliOperator]) -> nx.Graph:
    """Graph with a node per check and an edge per anticommuting pair."""
    checks = spec_or_checks.checks if isinstance(spec_or_checks, CodeSpec) else list(spec_or_checks)
    G = nx.Graph()
    G.add_nodes_from(range(len(checks)))
    if not checks:
        return G
    m = SymplecticMatrix.from_paulis(checks)
    gram = _gram(m.data, m.data, m.words)
    ii, jj = np.nonzero(np.triu(gram, 1))
    G.add_edges_from(zip(ii.tolist(), jj.tolist()))
    return G


def is_bipartite(graph: nx.Graph) -> bool:
    """True when the anticommutation graph is two-colorable."""
    return nx.is_bipartite(graph)


def site_coordinates(spec: CodeSpec) -> np.ndarray:
    """Integer lattice coordinates, one row per qubit (unit cell for Yao-Kivelson)."""
    lat = spec.lattice
    idx = np.arange(spec.n_qubits)
    if spec.name == "yao-kivelson":
        idx = idx // 6
    return np.stack([(idx // lat.L**d) % lat.L for d in range(lat.dimension)], axis=1)


def half_cut(spec: CodeSpec, axis: int = 0) -> Region:
    """Qubits with coordinate below ``L/2`` along ``axis``."""
    coords = site_coordinates(spec)
    if not 0 <= axis < coords.shape[1]:
        raise ContractViolation(f"axis {axis} out of range for a {coords.shape[1]}D lattice")
    return Region(coords[:, axis] < spec.lattice.L // 2)
