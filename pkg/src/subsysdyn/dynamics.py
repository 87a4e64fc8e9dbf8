"""Stochastic measurement-only trajectories of a subsystem code's checks.

One time unit is ``N`` measurement events.  Each event draws a check class
with probability given by its rate, then a check uniformly inside the class;
with probability ``perturbation_rate`` the draw is instead replaced by a
uniform single-qubit Pauli on a uniform site.  All randomness comes from a
PCG64 stream seeded by ``SeedSequence([seed, trajectory_index])``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import _tableau
from .codes import CodeSpec, compute_code_parameters
from .pauli import ContractViolation, PauliOperator
from .state import Region, StabilizerState

__all__ = [
    "INITIAL_STATES",
    "MAX_QUBITS",
    "ResourceGuardError",
    "DynamicsConfig",
    "TrajectoryRecord",
    "EnsembleResult",
    "CompiledChecks",
    "geometric_schedule",
    "linear_schedule",
    "initial_state",
    "step",
    "run_trajectory",
    "run_ensemble",
    "default_workers",
    "WORKERS_ENV",
]

INITIAL_STATES = ("maximally_mixed", "random_product", "all_code_stabilizers_measured", "z_product")
MAX_QUBITS = 1 << 20
WORKERS_ENV = "SUBSYSDYN_WORKERS"
_CHUNK = 1 << 18  # events per kernel call


class ResourceGuardError(RuntimeError):
    """The requested system is too large to simulate."""


def geometric_schedule(t_max: float, n_qubits: int, per_decade: int = 20) -> np.ndarray:
    """``t = 0`` plus log-spaced times from one event up to ``t_max``."""
    t_min = 1.0 / n_qubits
    if t_max <= t_min:
        return np.array([0.0, float(t_max)])
    k = int(math.ceil(per_decade * math.log10(t_max / t_min)))
    ts = t_min * 10.0 ** (np.arange(k + 1) / per_decade)
    ts = np.minimum(ts, t_max)
    return np.concatenate([[0.0], ts])


def linear_schedule(t_max: float, n_points: int) -> np.ndarray:
    return np.linspace(0.0, t_max, n_points + 1)


@dataclass
class DynamicsConfig:
    code: CodeSpec
    rates: Mapping[str, float]
    t_max: float
    perturbation_rate: float = 0.0
    initial_state: str = "maximally_mixed"
    record_times: Sequence[float] | None = None
    cuts: Mapping[str, Region] = field(default_factory=dict)
    seed: int = 0
    n_trajectories: int = 1
    track_stabilizers: bool = True
    log_outcomes: bool = False
    early_stop: bool = True

    def __post_init__(self):
        unknown = set(self.rates) - set(self.code.check_classes)
        if unknown:
            raise ContractViolation(f"rates name unknown check classes {sorted(unknown)}")
        vals = np.array([float(self.rates.get(k, 0.0)) for k in self.code.check_classes])
        if (vals < 0).any() or not np.isclose(vals.sum(), 1.0, atol=1e-9):
            raise ContractViolation(f"rates must be nonnegative and sum to 1, got {dict(self.rates)}")
        if not 0.0 <= self.perturbation_rate < 1.0:
            raise ContractViolation("perturbation_rate must lie in [0, 1)")
        if self.initial_state not in INITIAL_STATES:
            raise ContractViolation(f"initial_state must be one of {INITIAL_STATES}")
        if self.t_max <= 0:
            raise ContractViolation("t_max must be positive")
        if self.n_trajectories < 1:
            raise ContractViolation("n_trajectories must be at least 1")
        if not 0 <= int(self.seed) < 1 << 64:
            raise ContractViolation("seed must be a 64-bit unsigned integer")
        n = self.code.n_qubits
        if self.record_times is None:
            self.record_times = geometric_schedule(self.t_max, n)
        times = np.asarray(self.record_times, dtype=float)
        if (times < 0).any() or (times > self.t_max + 1e-12).any():
            raise ContractViolation("record times must lie in [0, t_max]")
        for name, region in self.cuts.items():
            if region.n_qubits != n:
                raise ContractViolation(f"cut {name!r} has the wrong number of qubits")

    @property
    def n_qubits(self) -> int:
        return self.code.n_qubits

    def record_events(self) -> np.ndarray:
        """Event counts of the record points, snapped to multiples of ``1/N``."""
        ev = np.rint(np.asarray(self.record_times, dtype=float) * self.n_qubits).astype(np.int64)
        return np.unique(ev)

    def class_rates(self) -> np.ndarray:
        return np.array([float(self.rates.get(k, 0.0)) for k in self.code.check_classes])


@dataclass
class TrajectoryRecord:
    index: int
    times: np.ndarray
    S_N: np.ndarray
    S_A: dict[str, np.ndarray]
    code_stabilizers_measured: dict[str, np.ndarray]
    events_done: int
    stopped_early: bool = False
    log_ops: np.ndarray | None = None
    log_outcomes: np.ndarray | None = None
    log_rules: np.ndarray | None = None


@dataclass
class CompiledChecks:
    """Checks of a code flattened into CSR arrays for the event kernel."""

    chk_ptr: np.ndarray
    qubits: np.ndarray
    x: np.ndarray
    z: np.ndarray
    signs: np.ndarray
    cls_ptr: np.ndarray
    cls_cum: np.ndarray
    checks: list[PauliOperator]

    @classmethod
    def build(cls, code: CodeSpec, rates: np.ndarray) -> "CompiledChecks":
        checks: list[PauliOperator] = []
        cls_ptr = [0]
        for c in code.check_classes.values():
            checks.extend(c.checks)
            cls_ptr.append(len(checks))
        ptr = [0]
        qs, xs, zs = [], [], []
        for g in checks:
            q, x, z = g.sparse()
            qs.append(q)
            xs.append(x)
            zs.append(z)
            ptr.append(ptr[-1] + q.shape[0])
        # zero-rate classes can never be selected, also not by rounding at u -> 1
        weights = np.asarray(rates, dtype=float)
        cum = np.cumsum(weights / weights.sum())
        last = int(np.flatnonzero(weights > 0)[-1])
        cum[last:] = 2.0
        return cls(
            np.asarray(ptr, dtype=np.int64),
            np.concatenate(qs).astype(np.int64),
            np.concatenate(xs).astype(np.uint8),
            np.concatenate(zs).astype(np.uint8),
            np.array([0 if g.sign == 1 else 1 for g in checks], dtype=np.uint8),
            np.asarray(cls_ptr, dtype=np.int64),
            cum,
            checks,
        )


def _check_resources(n: int) -> None:
    if n > MAX_QUBITS:
        raise ResourceGuardError(f"N = {n} exceeds the supported maximum {MAX_QUBITS}")
    need = 2 * n * 2 * ((n + 63) // 64) * 8 * 2
    try:
        import psutil

        avail = psutil.virtual_memory().available
    except Exception:  # pragma: no cover - psutil is optional at runtime
        return
    if need > avail:
        raise ResourceGuardError(f"tableau for N = {n} needs ~{need / 2**30:.1f} GiB, {avail / 2**30:.1f} GiB available")


def _stream(seed: int, index: int) -> np.random.PCG64:
    return np.random.PCG64(np.random.SeedSequence([int(seed), int(index)]))


def initial_state(config: DynamicsConfig, rng: np.random.Generator | None = None) -> StabilizerState:
    """Starting state for a trajectory; random choices come from ``rng``."""
    n = config.n_qubits
    kind = config.initial_state
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    if kind == "maximally_mixed":
        return StabilizerState.maximally_mixed(n)
    if kind in ("random_product", "z_product"):
        paulis = rng.integers(3, size=n) if kind == "random_product" else np.full(n, 2)
        signs = rng.integers(2, size=n)
        gens = [PauliOperator.from_sparse(n, {j: "XYZ"[p]}, -1 if s else 1) for j, (p, s) in enumerate(zip(paulis, signs))]
        return StabilizerState.from_generators(gens, n)
    gens = [s.operator.unsigned() for s in config.code.code_stabilizer_generators]
    signs = rng.integers(2, size=len(gens))
    return StabilizerState.from_generators([-g if s else g for g, s in zip(gens, signs)], n)


def step(state: StabilizerState, config: DynamicsConfig, rng: np.random.Generator, compiled: CompiledChecks | None = None):
    """One measurement event; returns ``(op_index, outcome_bit, rule)``.

    Uses the same draw-to-event mapping as ``run_trajectory``.
    """
    compiled = compiled or CompiledChecks.build(config.code, config.class_rates())
    raw = rng.bit_generator.random_raw(3).astype(np.uint64)
    ops = np.zeros(1, dtype=np.int64)
    outs = np.zeros(1, dtype=np.uint8)
    rules = np.zeros(1, dtype=np.uint8)
    _run_kernel(state, compiled, config.perturbation_rate, raw, 1, ops, outs, rules, -1)
    return int(ops[0]), int(outs[0]), int(rules[0])


def _run_kernel(state, cc: CompiledChecks, p_single, raw, n_events, log_ops, log_out, log_rule, stop_m) -> int:
    return _tableau.run_events(
        state._tab,
        state._signs,
        state._cols,
        state._stab,
        state.n_qubits,
        state._W,
        n_events,
        raw,
        cc.chk_ptr,
        cc.qubits,
        cc.x,
        cc.z,
        cc.signs,
        cc.cls_ptr,
        cc.cls_cum,
        float(p_single),
        log_ops,
        log_out,
        log_rule,
        state._ac,
        state._scratch,
        state._grow,
        stop_m,
    )


def _stop_m(config: DynamicsConfig) -> int:
    """Stabilizer count after which nothing recorded can change, or -1."""
    if not config.early_stop or config.cuts:
        return -1
    n = config.n_qubits
    code = config.code
    # a pure state keeps S_N = 0, but stabilizer memberships still change
    tracked = config.track_stabilizers and bool(code.code_stabilizer_generators)
    if config.perturbation_rate > 0:
        return -1 if tracked else n
    K = compute_code_parameters(code).K
    if config.initial_state == "maximally_mixed":
        if tracked and code.unpurifiable_dof:
            return -1
        return n - K - code.unpurifiable_dof
    if config.initial_state == "all_code_stabilizers_measured":
        return n - K
    return -1 if tracked else n




def run_trajectory(config: DynamicsConfig, trajectory_index: int, *, _cache: dict | None = None) -> TrajectoryRecord:
    """Simulate one trajectory and record observables at the scheduled times."""
    n = config.n_qubits
    _check_resources(n)
    bitgen = _stream(config.seed, trajectory_index)
    gen = np.random.Generator(bitgen)
    state = initial_state(config, gen)
    cc = _cache["compiled"] if _cache else CompiledChecks.build(config.code, config.class_rates())
    stop_m = _cache["stop_m"] if _cache else _stop_m(config)
    events = config.record_events()
    total = int(events[-1])
    k_rec = events.shape[0]
    S_N = np.zeros(k_rec, dtype=np.int64)
    S_A = {name: np.zeros(k_rec, dtype=np.int64) for name in config.cuts}
    stabs = config.code.code_stabilizer_generators if config.track_stabilizers else []
    families = sorted({s.family for s in stabs})
    counts = {f: np.zeros(k_rec, dtype=np.int64) for f in families}
    found = np.zeros(len(stabs), dtype=bool)
    if config.log_outcomes:
        log_ops = np.zeros(total, dtype=np.int64)
        log_out = np.zeros(total, dtype=np.uint8)
        log_rule = np.zeros(total, dtype=np.uint8)
    else:
        log_ops = np.zeros(0, dtype=np.int64)
        log_out = np.zeros(0, dtype=np.uint8)
        log_rule = np.zeros(0, dtype=np.uint8)

    def record(k: int) -> None:
        S_N[k] = state.von_neumann_entropy()
        for name, region in config.cuts.items():
            S_A[name][k] = state.entanglement_entropy(region)
        for i, s in enumerate(stabs):
            if not found[i]:
                found[i] = state.contains(s.operator)[0]
        for f in families:
            counts[f][k] = sum(1 for i, s in enumerate(stabs) if found[i] and s.family == f)

    done = 0
    stopped = False
    for k, target in enumerate(events):
        while not stopped and done < target:
            chunk = int(min(_CHUNK, target - done))
            raw = bitgen.random_raw(3 * chunk).astype(np.uint64, copy=False)
            sl = slice(done, done + chunk)
            ran = _run_kernel(
                state,
                cc,
                config.perturbation_rate,
                raw,
                chunk,
                log_ops[sl] if config.log_outcomes else log_ops,
                log_out[sl] if config.log_outcomes else log_out,
                log_rule[sl] if config.log_outcomes else log_rule,
                stop_m,
            )
            done += ran
            if ran < chunk:
                stopped = True
        record(k)
    rec = TrajectoryRecord(
        trajectory_index,
        events / n,
        S_N,
        S_A,
        counts,
        done,
        stopped,
    )
    if config.log_outcomes:
        rec.log_ops, rec.log_outcomes, rec.log_rules = log_ops[:done], log_out[:done], log_rule[:done]
    return rec


@dataclass
class EnsembleResult:
    config: DynamicsConfig
    records: list[TrajectoryRecord]

    @property
    def times(self) -> np.ndarray:
        return self.records[0].times

    @property
    def n(self) -> int:
        return len(self.records)

    def _stack(self, key: str, sub: str | None = None) -> np.ndarray:
        rows = []
        for r in self.records:
            v = getattr(r, key)
            rows.append(v if sub is None else v[sub])
        return np.vstack(rows).astype(float)

    def matrix(self, observable: str = "S_N", sub: str | None = None) -> np.ndarray:
        """(n_trajectories, n_times) array ordered by trajectory index."""
        return self._stack(observable, sub)

    def mean(self, observable: str = "S_N", sub: str | None = None) -> np.ndarray:
        return self.matrix(observable, sub).mean(axis=0)

    def stderr(self, observable: str = "S_N", sub: str | None = None) -> np.ndarray:
        m = self.matrix(observable, sub)
        if m.shape[0] < 2:
            return np.zeros(m.shape[1])
        return m.std(axis=0, ddof=1) / math.sqrt(m.shape[0])

    def observables(self) -> list[tuple[str, str | None]]:
        out: list[tuple[str, str | None]] = [("S_N", None)]
        out += [("S_A", c) for c in self.config.cuts]
        out += [("code_stabilizers_measured", f) for f in sorted(self.records[0].code_stabilizers_measured)]
        return out


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            w = int(env)
        except ValueError:
            raise ContractViolation(f"{WORKERS_ENV} must be an integer") from None
        if w < 1:
            raise ContractViolation(f"{WORKERS_ENV} must be positive")
        return w
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def _worker(args):
    config, indices = args
    cache = {"compiled": CompiledChecks.build(config.code, config.class_rates()), "stop_m": _stop_m(config)}
    return [run_trajectory(config, i, _cache=cache) for i in indices]


def run_ensemble(config: DynamicsConfig, workers: int | None = None, start_index: int = 0) -> EnsembleResult:
    """Run ``n_trajectories`` independent trajectories; results sorted by index."""
    _check_resources(config.n_qubits)
    workers = workers or default_workers()
    indices = list(range(start_index, start_index + config.n_trajectories))
    if workers == 1 or len(indices) == 1:
        records = _worker((config, indices))
    else:
        batches = [indices[i::workers] for i in range(workers) if indices[i::workers]]
        with ProcessPoolExecutor(max_workers=len(batches)) as pool:
            records = [r for part in pool.map(_worker, [(config, b) for b in batches]) for r in part]
    records.sort(key=lambda r: r.index)
    return EnsembleResult(config, records)
