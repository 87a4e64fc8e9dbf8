"""Produce the cached ensembles evaluated by ``tests/test_acceptance.py``.

Each stage stores raw per-trajectory observables in ``tests/data/<stage>.npz``
and records its parameters, hash, engine version and wall time in
``tests/data/manifest.json``.  Stages whose parameter hash is unchanged are
skipped, so the script can be rerun after an interruption.

    python3 scripts/generate_acceptance_data.py            # all stages
    python3 scripts/generate_acceptance_data.py c4 c11     # selected stages
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from acceptance_protocol import DATA_DIR, MANIFEST, css_plaquette_rates, load_manifest, stage_hash, symmetric_peak_estimate  # noqa: E402
from subsysdyn.cli import engine_version  # noqa: E402
from subsysdyn.codes import build_code, half_cut  # noqa: E402
from subsysdyn.dynamics import DynamicsConfig, geometric_schedule, linear_schedule, run_ensemble  # noqa: E402

log = logging.getLogger("acceptance-data")


def ensemble(out: dict, key: str, code, rates, t_max, n_traj, seed, per_decade=20, record_times=None, **kw):
    times = geometric_schedule(t_max, code.n_qubits, per_decade) if record_times is None else record_times
    cfg = DynamicsConfig(code, rates, t_max=t_max, record_times=times, seed=seed, n_trajectories=n_traj, **kw)
    t0 = time.perf_counter()
    ens = run_ensemble(cfg, workers=1)
    out[f"{key}/t"] = ens.times
    out[f"{key}/S_N"] = ens.matrix().astype(np.int32)
    out[f"{key}/events"] = np.array([r.events_done for r in ens.records], dtype=np.int64)
    for obs, sub in ens.observables()[1:]:
        out[f"{key}/{obs}/{sub}"] = ens.matrix(obs, sub).astype(np.int32)
    log.info("  %s: %d trajectories, N=%d, %.1f s", key, n_traj, code.n_qubits, time.perf_counter() - t0)
    return ens


# ---------------------------------------------------------------- stages


def stage_c4(p):
    out = {}
    for L in p["sizes"]:
        ensemble(out, f"L{L}", build_code("bsc2d", L, boundary=p["boundary"]), {"X": p["p_x"], "Z": 1 - p["p_x"]},
                 p["t_max"], p["n_traj"], p["seed"] + L, p["per_decade"], track_stabilizers=False)
    return out


def stage_c5(p):
    out = {}
    for L, n in zip(p["sizes"], p["n_traj"]):
        ensemble(out, f"L{L}", build_code("bsc2d", L), {"X": 0.5, "Z": 0.5}, p["t_max"], n, p["seed"] + L,
                 p["per_decade"], track_stabilizers=False)
    return out


def stage_c6(p):
    out = {}
    for L, n in zip(p["sizes"], p["n_traj"]):
        ensemble(out, f"L{L}", build_code("bsc3d", L), {"X": p["p_x"], "Z": 1 - p["p_x"]}, p["t_max"], n,
                 p["seed"] + L, p["per_decade"])
    return out


def stage_c7_scan(p):
    out = {}
    grid = np.round(np.arange(p["p_lo"], p["p_hi"] + 1e-9, p["p_step"]), 6)
    out["p"] = grid
    for L in p["sizes"]:
        code = build_code("bsc3d", L)
        cuts = {"x": half_cut(code, 0), "z": half_cut(code, 2)}
        T = p["t_factor"] * L * L
        for i, px in enumerate(grid):
            cfg = DynamicsConfig(code, {"X": float(px), "Z": 1 - float(px)}, t_max=T, record_times=[T],
                                 initial_state="random_product", cuts=cuts, seed=p["seed"] + 1000 * L + i,
                                 n_trajectories=p["n_traj"], track_stabilizers=False)
            ens = run_ensemble(cfg, workers=1)
            for c in cuts:
                out[f"L{L}/S_A/{c}/{i}"] = ens.matrix("S_A", c)[:, -1].astype(np.int32)
        log.info("  scan L=%d done", L)
    return out


def stage_c7_critical(p):
    scan = np.load(DATA_DIR / "c7_scan.npz")
    grid = scan["p"]
    sx = {L: np.array([scan[f"L{L}/S_A/x/{i}"].mean() for i in range(grid.size)]) for L in p["scan_sizes"]}
    sz = {L: np.array([scan[f"L{L}/S_A/z/{i}"].mean() for i in range(grid.size)]) for L in p["scan_sizes"]}
    p_c = symmetric_peak_estimate(grid, sx, sz)
    log.info("  measured p_c = %.4f", p_c)
    out = {"p_c": np.array([p_c])}
    for L, n in zip(p["sizes"], p["n_traj"]):
        ensemble(out, f"L{L}", build_code("bsc3d", L), {"X": p_c, "Z": 1 - p_c}, p["t_max"], n, p["seed"] + L,
                 p["per_decade"], initial_state="all_code_stabilizers_measured", track_stabilizers=False)
    return out


def stage_c8_plateaus(p):
    out = {}
    for L, n in zip(p["sizes"], p["n_traj"]):
        code = build_code("plaquette-css", L)
        ensemble(out, f"L{L}", code, css_plaquette_rates(code.check_classes, p["p_x"]), p["t_max"], n,
                 p["seed"] + L, p["per_decade"])
    return out


def stage_c8_critical(p):
    out = {}
    for L, n in zip(p["sizes"], p["n_traj"]):
        code = build_code("plaquette-css", L)
        ensemble(out, f"L{L}", code, css_plaquette_rates(code.check_classes, 0.5), p["t_max"], n, p["seed"] + L,
                 record_times=linear_schedule(p["t_max"], p["n_points"]), track_stabilizers=False)
    return out


def stage_c9(p):
    out = {}
    grid = np.round(np.arange(p["p_lo"], p["p_hi"] + 1e-9, p["p_step"]), 6)
    out["p_z"] = grid
    for L in p["sizes"]:
        code = build_code("compass3d", L)
        T = float(L**3)
        t0 = time.perf_counter()
        for i, pz in enumerate(grid):
            px = (1 - float(pz)) / 2
            sub = int(np.random.SeedSequence([p["seed"], L, i]).generate_state(1, np.uint64)[0])
            cfg = DynamicsConfig(code, {"X": px, "Y": px, "Z": float(pz)}, t_max=T, record_times=[T], seed=sub,
                                 n_trajectories=p["n_traj"], track_stabilizers=False)
            out[f"L{L}/{i}"] = run_ensemble(cfg, workers=1).matrix()[:, -1].astype(np.int32)
        log.info("  sweep L=%d done, %.1f s", L, time.perf_counter() - t0)
    return out


def stage_c10(p):
    out = {}
    for L in p["sizes"]:
        code = build_code("yao-kivelson", L)
        for tag, rates in p["rates"].items():
            ensemble(out, f"L{L}/{tag}", code, rates, p["t_max"], p["n_traj"], p["seed"] + L, p["per_decade"])
    return out


def stage_c11(p):
    out = {}
    for ps in p["p_s"]:
        for L in p["sizes"]:
            ensemble(out, f"ps{ps}/L{L}", build_code("bsc2d", L), {"X": p["p_x"], "Z": 1 - p["p_x"]}, p["t_max"],
                     p["n_traj"], p["seed"] + L, p["per_decade"], perturbation_rate=ps, track_stabilizers=False)
    return out


STAGES = {
    "c10": (stage_c10, {
        "sizes": [2, 3], "t_max": 3e4, "n_traj": 50, "seed": 500, "per_decade": 20,
        "rates": {"iso": {"X": 1 / 3, "Y": 1 / 3, "Z": 1 / 3}, "aniso": {"X": 0.15, "Y": 0.15, "Z": 0.7}},
    }),
    "c11": (stage_c11, {
        "sizes": [8, 16, 32], "p_s": [0.02, 0.05], "p_x": 0.49, "t_max": 1e4, "n_traj": 100, "seed": 1100,
        "per_decade": 50,
    }),
    "c7_scan": (stage_c7_scan, {
        "sizes": [5, 7], "p_lo": 0.40, "p_hi": 0.60, "p_step": 0.01, "t_factor": 2.0, "n_traj": 20, "seed": 700,
    }),
    "c7_critical": (stage_c7_critical, {
        "scan_sizes": [5, 7], "sizes": [3, 5, 7, 9], "n_traj": [100, 100, 60, 40], "t_max": 1e5, "seed": 710,
        "per_decade": 100,
    }),
    "c9": (stage_c9, {
        "sizes": [4, 6, 8], "p_lo": 0.40, "p_hi": 0.64, "p_step": 0.02, "n_traj": 20, "seed": 900,
    }),
    "c4": (stage_c4, {
        "sizes": [8, 12, 16, 20, 24], "p_x": 0.49, "boundary": "open", "t_max": 1e6, "n_traj": 200, "seed": 400,
        "per_decade": 100,
    }),
    "c4_periodic": (stage_c4, {
        "sizes": [8, 12, 16, 20], "p_x": 0.49, "boundary": "periodic", "t_max": 1e6, "n_traj": 50, "seed": 450,
        "per_decade": 100,
    }),
    "c5": (stage_c5, {
        "sizes": [8, 12, 16, 20, 24, 32], "n_traj": [100, 100, 100, 60, 60, 40], "t_max": 1e6, "seed": 500,
        "per_decade": 100,
    }),
    "c6": (stage_c6, {
        "sizes": [3, 5, 7], "n_traj": [200, 200, 48], "p_x": 0.48, "t_max": 1e6, "seed": 600, "per_decade": 20,
    }),
    "c8_plateaus": (stage_c8_plateaus, {
        "sizes": [4, 6], "n_traj": [40, 10], "p_x": 0.3, "t_max": 1e5, "seed": 800, "per_decade": 20,
    }),
    "c8_critical": (stage_c8_critical, {
        "sizes": [4, 6, 8], "n_traj": [40, 40, 20], "t_max": 1e3, "seed": 850, "n_points": 4000,
    }),
}


def run_stage(name: str, force: bool = False) -> None:
    fn, params = STAGES[name]
    h = stage_hash({"params": params, "engine": engine_version()})
    manifest = load_manifest()
    if not force and manifest.get(name, {}).get("hash") == h and (DATA_DIR / f"{name}.npz").exists():
        log.info("%s: cached (%s)", name, h)
        return
    log.info("%s: running", name)
    t0 = time.perf_counter()
    arrays = fn(params)
    wall = time.perf_counter() - t0
    DATA_DIR.mkdir(parents=True, exist_ok=True)
    np.savez_compressed(DATA_DIR / f"{name}.npz", **arrays)
    manifest = load_manifest()  # reread: another stage may have finished meanwhile
    manifest[name] = {
        "hash": h,
        "params": params,
        "engine_version": engine_version(),
        "wall_seconds": round(wall, 1),
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    MANIFEST.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    log.info("%s: done in %.1f s", name, wall)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("stages", nargs="*", help=f"stages to run (default: all of {', '.join(STAGES)})")
    ap.add_argument("--force", action="store_true", help="rerun even if cached")
    args = ap.parse_args(argv)
    unknown = set(args.stages) - set(STAGES)
    if unknown:
        ap.error(f"unknown stages {sorted(unknown)}")
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    for name in args.stages or list(STAGES):
        run_stage(name, args.force)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
