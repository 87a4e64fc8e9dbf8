from __future__ import annotations

import numpy as np
import pytest

from subsysdyn import dynamics
from subsysdyn.analysis import detect_plateaus, first_passage_times
from subsysdyn.codes import build_code, compute_code_parameters, half_cut
from subsysdyn.dynamics import (
    CompiledChecks,
    DynamicsConfig,
    ResourceGuardError,
    default_workers,
    geometric_schedule,
    initial_state,
    linear_schedule,
    run_ensemble,
    run_trajectory,
    step,
)
from subsysdyn.pauli import ContractViolation, PauliOperator
from subsysdyn.state import Region, StabilizerState

BSC3 = build_code("bsc2d", 3)
BSC4 = build_code("bsc2d", 4)


def cfg(code=BSC4, rates=None, **kw):
    rates = rates or {c: 1 / len(code.check_classes) for c in code.check_classes}
    kw.setdefault("t_max", 20.0)
    return DynamicsConfig(code, rates, **kw)


def decode(op: int, cc: CompiledChecks, n: int) -> PauliOperator:
    """Operator measured by a logged event."""
    if op >= 0:
        return cc.checks[op]
    site, pauli = divmod(-op - 1, 3)
    return PauliOperator.from_sparse(n, {site: "XYZ"[pauli]})


def replay(config: DynamicsConfig, rec) -> StabilizerState:
    """Re-apply a logged trajectory through the Python measurement API."""
    cc = CompiledChecks.build(config.code, config.class_rates())
    s = initial_state(config, np.random.Generator(dynamics._stream(config.seed, rec.index)))
    for op, out, rule in zip(rec.log_ops, rec.log_outcomes, rec.log_rules):
        got, r = s.measure(decode(int(op), cc, config.n_qubits), outcome=1 if out == 0 else -1)
        assert r == rule
    return s


class TestInitialStates:
    def test_maximally_mixed(self):
        s = initial_state(cfg(BSC3))
        assert s.von_neumann_entropy() == 9

    def test_random_product(self):
        c = cfg(BSC3, initial_state="random_product")
        s = initial_state(c, np.random.default_rng(2))
        assert s.von_neumann_entropy() == 0
        for axis in (0, 1):
            assert s.entanglement_entropy(half_cut(BSC3, axis)) == 0
        assert all(g.weight == 1 for g in s.generators)

    def test_random_product_is_uniform(self):
        c = cfg(BSC3, initial_state="random_product")
        counts = {"X": 0, "Y": 0, "Z": 0}
        signs = 0
        for seed in range(300):
            for g in initial_state(c, np.random.default_rng(seed)).generators:
                counts[g.label()[1:].replace("I", "")] += 1
                signs += g.sign == 1
        total = 300 * 9
        for v in counts.values():
            assert abs(v / total - 1 / 3) < 5 * np.sqrt(2 / 9 / total)
        assert abs(signs / total - 0.5) < 5 * np.sqrt(0.25 / total)

    def test_all_code_stabilizers_measured(self):
        c = cfg(BSC3, initial_state="all_code_stabilizers_measured")
        p = compute_code_parameters(BSC3)
        s = initial_state(c, np.random.default_rng(0))
        assert s.von_neumann_entropy() == p.N - p.N_S == 5
        for stab in BSC3.code_stabilizer_generators:
            assert s.contains(stab.operator)[0]
        seen = {tuple(initial_state(c, np.random.default_rng(k)).contains(BSC3.code_stabilizer_generators[0].operator)) for k in range(40)}
        assert seen == {(True, 1), (True, -1)}


class TestSchedules:
    def test_geometric(self):
        t = geometric_schedule(100.0, 16, per_decade=10)
        assert t[0] == 0 and t[-1] == 100.0 and t[1] == pytest.approx(1 / 16)
        assert np.all(np.diff(t) >= 0)
        assert t.size == 1 + int(np.ceil(10 * np.log10(1600))) + 1

    def test_linear_and_snapping(self):
        assert np.allclose(linear_schedule(2.0, 4), [0, 0.5, 1, 1.5, 2])
        c = cfg(BSC3, t_max=1.0, record_times=[0.0, 0.05, 0.06, 1 / 3, 1.0])
        # 0.05 * 9 and 0.06 * 9 both round to event 0 or 1; duplicates collapse
        ev = c.record_events()
        assert ev.tolist() == sorted(set(ev.tolist())) and ev[-1] == 9 and ev[0] == 0
        rec = run_trajectory(c, 0)
        assert rec.times.tolist() == (ev / 9).tolist() and rec.S_N.shape == ev.shape

    def test_times_beyond_t_max_rejected(self):
        with pytest.raises(ContractViolation):
            cfg(t_max=1.0, record_times=[0.5, 2.0])


class TestConfigValidation:
    @pytest.mark.parametrize(
        "kw",
        [
            {"rates": {"X": 0.7, "Z": 0.7}},
            {"rates": {"X": -0.5, "Z": 1.5}},
            {"rates": {"X": 0.5, "Y": 0.5}},
            {"perturbation_rate": 1.0},
            {"perturbation_rate": -0.1},
            {"initial_state": "ghz"},
            {"t_max": 0.0},
            {"seed": 2**64},
            {"n_trajectories": 0},
            {"cuts": {"bad": Region.from_qubits(3, [0])}},
        ],
    )
    def test_rejects(self, kw):
        with pytest.raises(ContractViolation):
            cfg(**kw)

    def test_missing_class_means_zero_rate(self):
        c = cfg(rates={"X": 1.0}, log_outcomes=True, t_max=5.0)
        rec = run_trajectory(c, 0)
        n_x = len(BSC4.check_classes["X"].checks)
        assert (rec.log_ops < n_x).all()


class TestDeterminism:
    def test_same_seed_same_record(self):
        c = cfg(seed=99, cuts={"x": half_cut(BSC4, 0)}, initial_state="random_product", t_max=30.0)
        a, b = run_trajectory(c, 3), run_trajectory(c, 3)
        assert np.array_equal(a.S_N, b.S_N) and np.array_equal(a.S_A["x"], b.S_A["x"])

    def test_ensemble_matches_individual_runs(self):
        c = cfg(seed=5, n_trajectories=5)
        ens = run_ensemble(c, workers=1, start_index=10)
        assert [r.index for r in ens.records] == list(range(10, 15))
        for r in ens.records:
            assert np.array_equal(r.S_N, run_trajectory(c, r.index).S_N)
        M = ens.matrix()
        assert np.allclose(ens.mean(), M.mean(axis=0))
        assert np.allclose(ens.stderr(), M.std(axis=0, ddof=1) / np.sqrt(5))

    def test_parallel_equals_serial(self):
        c = cfg(seed=8, n_trajectories=4, t_max=10.0)
        a, b = run_ensemble(c, workers=1), run_ensemble(c, workers=2)
        assert np.array_equal(a.matrix(), b.matrix())
        assert np.array_equal(a.mean(), b.mean())


class TestEventMapping:
    def test_step_reproduces_kernel_log(self):
        c = cfg(seed=4, log_outcomes=True, perturbation_rate=0.2, early_stop=False, t_max=4.0)
        rec = run_trajectory(c, 0)
        gen = np.random.Generator(dynamics._stream(4, 0))
        s = initial_state(c, gen)
        cc = CompiledChecks.build(c.code, c.class_rates())
        got = [step(s, c, gen, cc) for _ in range(rec.log_ops.size)]
        assert [g[0] for g in got] == rec.log_ops.tolist()
        assert [g[1] for g in got] == rec.log_outcomes.tolist()
        assert s.von_neumann_entropy() == rec.S_N[-1]

    @pytest.mark.parametrize("p_s", [0.0, 0.3])
    def test_replay_through_python_api(self, p_s):
        c = cfg(seed=12, log_outcomes=True, perturbation_rate=p_s, early_stop=False, t_max=6.0,
                cuts={"y": half_cut(BSC4, 1)})
        rec = run_trajectory(c, 2)
        s = replay(c, rec)
        assert s.von_neumann_entropy() == rec.S_N[-1]
        assert s.entanglement_entropy(c.cuts["y"]) == rec.S_A["y"][-1]
        s.check_invariants()

    def test_perturbation_ops_uniform(self):
        c = cfg(seed=1, log_outcomes=True, perturbation_rate=0.5, early_stop=False, t_max=400.0,
                record_times=[0.0, 400.0])
        ops = run_trajectory(c, 0).log_ops
        n_ev = ops.size
        single = -ops[ops < 0] - 1
        assert abs(single.size / n_ev - 0.5) < 5 * np.sqrt(0.25 / n_ev)
        sites, paulis = np.divmod(single, 3)
        for counts, k in ((np.bincount(sites, minlength=16), 16), (np.bincount(paulis, minlength=3), 3)):
            expected = single.size / k
            chi2 = float(((counts - expected) ** 2 / expected).sum())
            assert chi2 < k + 6 * np.sqrt(2 * k)

    def test_class_then_member_sampling(self):
        c = cfg(rates={"X": 0.25, "Z": 0.75}, seed=3, log_outcomes=True, early_stop=False, t_max=500.0,
                record_times=[0.0, 500.0])
        ops = run_trajectory(c, 0).log_ops
        n_x = len(BSC4.check_classes["X"].checks)
        is_x = ops < n_x
        assert abs(is_x.mean() - 0.25) < 5 * np.sqrt(0.25 * 0.75 / ops.size)
        counts = np.bincount(ops[is_x], minlength=n_x)
        expected = is_x.sum() / n_x
        assert float(((counts - expected) ** 2 / expected).sum()) < n_x + 6 * np.sqrt(2 * n_x)


class TestPhysicalInvariants:
    @pytest.mark.parametrize("name,L", [("bsc2d", 4), ("bsc3d", 3), ("ising", 8), ("compass3d", 3)])
    def test_monotone_entropy_and_stabilizer_counts(self, name, L):
        code = build_code(name, L)
        c = cfg(code, seed=21, n_trajectories=4, t_max=50.0)
        for r in run_ensemble(c, workers=1).records:
            assert np.all(np.diff(r.S_N) <= 0)
            for v in r.code_stabilizers_measured.values():
                assert np.all(np.diff(v) >= 0)

    @pytest.mark.parametrize("name,L,init", [("bsc2d", 4, "maximally_mixed"), ("bsc3d", 3, "maximally_mixed"),
                                             ("ising", 6, "all_code_stabilizers_measured"),
                                             ("yao-kivelson", 2, "maximally_mixed"), ("bsc2d", 4, "random_product"),
                                             ("bsc2d", 4, "z_product")])
    def test_early_stop_does_not_change_records(self, name, L, init):
        code = build_code(name, L)
        base = dict(seed=31, n_trajectories=3, t_max=300.0, initial_state=init)
        a = run_ensemble(cfg(code, **base), workers=1)
        b = run_ensemble(cfg(code, early_stop=False, **base), workers=1)
        assert np.array_equal(a.matrix(), b.matrix())
        for fam in a.records[0].code_stabilizers_measured:
            assert np.array_equal(a.matrix("code_stabilizers_measured", fam), b.matrix("code_stabilizers_measured", fam))

    def test_early_stop_with_perturbations(self):
        base = dict(seed=2, n_trajectories=3, t_max=200.0, perturbation_rate=0.1)
        for track in (True, False):
            a = run_ensemble(cfg(track_stabilizers=track, **base), workers=1)
            b = run_ensemble(cfg(track_stabilizers=track, early_stop=False, **base), workers=1)
            assert np.array_equal(a.matrix(), b.matrix())
            if track:
                assert np.array_equal(a.matrix("code_stabilizers_measured", "X"), b.matrix("code_stabilizers_measured", "X"))
            else:
                assert all(r.stopped_early for r in a.records)

    def test_early_stop_disabled_with_cuts(self):
        c = cfg(seed=1, t_max=100.0, cuts={"x": half_cut(BSC4, 0)})
        assert run_trajectory(c, 0).events_done == 100 * 16

    def test_ising_coupon_collector(self):
        """With only X_i measured the state purifies once every site was drawn."""
        L = 16
        code = build_code("ising", L)
        T = 12.0
        c = cfg(code, rates={"X": 1.0, "Z": 0.0}, seed=2, n_trajectories=300, t_max=T, record_times=linear_schedule(T, int(T * L)))
        ens = run_ensemble(c, workers=1)
        assert (ens.matrix()[:, -1] == 0).all()
        assert (ens.matrix("code_stabilizers_measured", "X")[:, -1] == 1).all()
        fp = first_passage_times(ens.times, ens.matrix(), 0.0) * L  # in events
        harmonic = sum(1 / k for k in range(1, L + 1))
        mean, var = L * harmonic, L * L * sum(1 / k**2 for k in range(1, L + 1)) - L * harmonic
        assert abs(fp.mean() - mean) < 4 * np.sqrt(var / fp.size)

    def test_ising_single_stabilizer_plateau(self):
        """Rare X measurements leave the global X-parity as the last entropy bit."""
        code = build_code("ising", 16)
        c = cfg(code, rates={"X": 0.1, "Z": 0.9}, seed=6, n_trajectories=100, t_max=1e3)
        ens = run_ensemble(c, workers=1)
        levels = [p.level for p in detect_plateaus(ens.times, ens.mean())]
        assert any(abs(v - 1.0) < 0.1 for v in levels)

    def test_perturbations_purify_everything(self):
        code = build_code("bsc2d", 8)
        c = cfg(code, rates={"X": 0.49, "Z": 0.51}, perturbation_rate=0.05, seed=3, n_trajectories=10, t_max=500.0,
                track_stabilizers=False)
        ens = run_ensemble(c, workers=1)
        assert (ens.matrix()[:, -1] == 0).all()
        assert np.median(first_passage_times(ens.times, ens.matrix(), 0.0)) < 200


class TestResources:
    def test_qubit_guard(self, monkeypatch):
        monkeypatch.setattr(dynamics, "MAX_QUBITS", 8)
        with pytest.raises(ResourceGuardError):
            run_trajectory(cfg(), 0)
        with pytest.raises(ResourceGuardError):
            run_ensemble(cfg(), workers=1)

    def test_memory_guard(self, monkeypatch):
        import psutil

        class VM:
            available = 10

        monkeypatch.setattr(psutil, "virtual_memory", lambda: VM())
        with pytest.raises(ResourceGuardError):
            run_trajectory(cfg(), 0)


class TestWorkers:
    def test_env_override(self, monkeypatch):
        monkeypatch.setenv(dynamics.WORKERS_ENV, "3")
        assert default_workers() == 3

    @pytest.mark.parametrize("bad", ["0", "-2", "many"])
    def test_env_invalid(self, monkeypatch, bad):
        monkeypatch.setenv(dynamics.WORKERS_ENV, bad)
        with pytest.raises(ContractViolation):
            default_workers()

    def test_default_is_positive(self, monkeypatch):
        monkeypatch.delenv(dynamics.WORKERS_ENV, raising=False)
        assert default_workers() >= 1
