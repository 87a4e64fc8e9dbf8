from __future__ import annotations

import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from subsysdyn import cli, dynamics
from subsysdyn.config import load_config, schema_markdown

ROOT = Path(__file__).resolve().parents[1]
ISING = ROOT / "configs" / "ising_minimal.cfg"


def run_cli(*argv) -> int:
    return cli.main([str(a) for a in argv])


def write_cfg(path: Path, **over) -> Path:
    base = {
        "code.name": "bsc2d",
        "code.L": "4",
        "rates.X": "0.5",
        "rates.Z": "0.5",
        "dynamics.t_max": "50",
        "run.seed": "3",
        "run.n_trajectories": "4",
        "output.prefix": "run",
    }
    base.update({k.replace("__", "."): v for k, v in over.items()})
    path.write_text("".join(f"{k} = {v}\n" for k, v in base.items() if v is not None))
    return path


class TestCodeInfo:
    def info(self, capsys, *argv):
        assert run_cli("code-info", *argv) == cli.EXIT_OK
        return json.loads(capsys.readouterr().out)

    def test_bsc2d(self, capsys):
        info = self.info(capsys, "bsc2d", "--L", 3)
        assert info["parameters"]["K"] == 1 and info["parameters"]["N_S"] == 4 and info["bipartite"] is True
        assert set(info) == {"code", "L", "parameters", "check_counts", "stabilizer_families", "stabilizers_by_delta",
                             "unpurifiable_dof", "css", "bipartite"}

    def test_compass_not_bipartite(self, capsys):
        assert self.info(capsys, "compass3d", "--L", 3)["bipartite"] is False

    def test_plaquette_css_even_family(self, capsys):
        assert self.info(capsys, "plaquette-css", "--L", 4)["parameters"]["K"] == 10

    def test_invalid_L(self, capsys):
        assert run_cli("code-info", "bsc3d", "--L", 4) == cli.EXIT_CONFIG
        assert "error" in capsys.readouterr().err

    def test_unknown_code_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            run_cli("code-info", "toric", "--L", 3)
        assert exc.value.code == cli.EXIT_USAGE

    def test_module_entry_point(self):
        out = subprocess.run([sys.executable, "-m", "subsysdyn.cli", "code-info", "ising", "--L", "4"],
                             capture_output=True, text=True, check=True)
        assert json.loads(out.stdout)["parameters"]["N_S"] == 1


class TestRun:
    def test_minimal_ising_golden_layout(self, tmp_path, capsys):
        assert run_cli("--workers", 1, "run", ISING, "--out", tmp_path) == cli.EXIT_OK
        csv = (tmp_path / "ising_SN.csv").read_text().splitlines()
        assert csv[0] == "t,mean_SN,stderr_SN,n"
        assert csv[1].split(",") == ["0.0", "8.0", "0.0", "16"]
        assert (tmp_path / "ising_ZS_X.csv").read_text().splitlines()[0] == "t,mean_ZS_X,stderr_ZS_X,n"
        man = json.loads((tmp_path / "ising_manifest.json").read_text())
        assert set(man) == {"schema_version", "engine_version", "config", "config_hash", "seed", "n_trajectories",
                            "code_parameters", "unpurifiable_dof", "timing", "outputs"}
        assert man["schema_version"] == 1 and man["seed"] == 1 and man["n_trajectories"] == 16
        assert sorted(man["outputs"]) == ["ising_SN.csv", "ising_ZS_X.csv", "ising_trajectories.npz"]
        assert "output.dir" not in man["config"]

    def test_rerun_from_manifest_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        cfg = write_cfg(tmp_path / "c.cfg", cuts__left="half:0", dynamics__initial_state="random_product")
        assert run_cli("--workers", 1, "run", cfg, "--out", a) == 0
        assert run_cli("--workers", 2, "run", a / "run_manifest.json", "--out", b) == 0
        names = sorted(p.name for p in a.glob("*.csv"))
        assert names == ["run_SA_left.csv", "run_SN.csv", "run_ZS_X.csv", "run_ZS_Z.csv"]
        for n in names:
            assert (a / n).read_bytes() == (b / n).read_bytes()
        ma, mb = (json.loads((d / "run_manifest.json").read_text()) for d in (a, b))
        assert ma["config_hash"] == mb["config_hash"] and ma["config"] == mb["config"]

    @pytest.mark.parametrize(
        "over,field",
        [
            ({"rates__X": "0.7"}, "rates"),
            ({"rates__Y": "0.5", "rates__Z": None}, "rates"),
            ({"dynamics__t_max": "soon"}, "dynamics.t_max"),
            ({"dynamics__initial_state": "ghz"}, "dynamics.initial_state"),
            ({"code__L": None}, "code.L"),
            ({"schedule__colour": "red"}, "schedule.colour"),
            ({"cuts__bad": "diagonal"}, "cuts.bad"),
        ],
    )
    def test_config_errors_name_the_field(self, tmp_path, capsys, over, field):
        cfg = write_cfg(tmp_path / "c.cfg", **over)
        assert run_cli("run", cfg, "--out", tmp_path) == cli.EXIT_CONFIG
        assert field in capsys.readouterr().err
        assert not list(tmp_path.glob("*.csv"))

    def test_missing_config(self, tmp_path):
        assert run_cli("run", tmp_path / "nope.cfg") == cli.EXIT_CONFIG

    def test_resource_guard_exit_code(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setattr(dynamics, "MAX_QUBITS", 4)
        assert run_cli("--workers", 1, "run", write_cfg(tmp_path / "c.cfg"), "--out", tmp_path) == cli.EXIT_RESOURCE
        assert "resource guard" in capsys.readouterr().err

    def test_workers_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv(dynamics.WORKERS_ENV, "2")
        assert run_cli("run", write_cfg(tmp_path / "c.cfg"), "--out", tmp_path) == 0
        assert json.loads((tmp_path / "run_manifest.json").read_text())["timing"]["workers"] == 2


def synthetic_run(directory: Path, L: int, tau: float, K: int, seed: int, n_traj: int = 80) -> Path:
    """A run directory in the manifest layout holding decaying-bit trajectories."""
    directory.mkdir(parents=True)
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 8 * tau, 160)
    life = rng.exponential(tau, size=(n_traj, 10))
    S = K + (life[:, :, None] > t).sum(axis=1)
    np.savez_compressed(directory / "run_trajectories.npz", t=t, S_N=S.astype(float))
    man = {"schema_version": 1, "config": {"output.prefix": "run", "code.L": L}, "code_parameters": {"K": K}}
    (directory / "run_manifest.json").write_text(json.dumps(man))
    return directory / "run_manifest.json"


class TestFit:
    def test_synthetic_pipeline_recovers_rate(self, tmp_path, capsys):
        mans = [synthetic_run(tmp_path / f"L{L}", L, math.exp(0.2 * L), 1, L) for L in (8, 12, 16, 20)]
        out = tmp_path / "fit.json"
        assert run_cli("fit", *mans, "--floor-from-code", "--scaling", "L1", "--n-boot", 200, "--out", out) == 0
        rep = json.loads(out.read_text())
        assert set(rep) == {"schema_version", "model", "fits", "scaling"}
        assert [f["floor"] for f in rep["fits"]] == [1.0] * 4
        assert set(rep["fits"][0]) == {"source", "L", "floor", "model", "params", "errors", "fit_window", "goodness", "n_points"}
        sc = rep["scaling"]
        assert abs(sc["value"] - 0.2) < 3 * sc["stderr"] and sc["model"] == "exp_in_L_to_Delta"
        for f in rep["fits"]:
            tau = math.exp(0.2 * f["L"])
            assert abs(f["params"]["tau"] - tau) < 4 * f["errors"]["tau"]

    def test_fit_on_real_runs_and_tau_plot(self, tmp_path):
        mans = []
        for L in (4, 6, 8):
            d = tmp_path / f"L{L}"
            cfg = write_cfg(tmp_path / f"c{L}.cfg", code__L=str(L), rates__X="0.45", rates__Z="0.55",
                            dynamics__t_max="1000", run__n_trajectories="20", schedule__per_decade="40",
                            dynamics__track_stabilizers="false")
            assert run_cli("--workers", 1, "run", cfg, "--out", d) == 0
            mans.append(d / "run_manifest.json")
        rep_path = tmp_path / "fit.json"
        assert run_cli("fit", *mans, "--floor-from-code", "--scaling", "power", "--n-boot", 50, "--out", rep_path) == 0
        rep = json.loads(rep_path.read_text())
        assert all(f["params"]["tau"] > 0 for f in rep["fits"]) and "scaling" in rep
        svg = tmp_path / "tau.svg"
        assert run_cli("plot", rep_path, "--tau", "--out", svg) == 0
        assert svg.read_text().lstrip().startswith("<?xml")

    def test_refusal_and_missing_input(self, tmp_path):
        flat = tmp_path / "flat"
        flat.mkdir()
        np.savez_compressed(flat / "run_trajectories.npz", t=np.linspace(0, 1, 30), S_N=np.ones((3, 30)))
        (flat / "run_manifest.json").write_text(json.dumps({"config": {"output.prefix": "run", "code.L": 4}, "code_parameters": {"K": 1}}))
        assert run_cli("fit", flat / "run_manifest.json", "--floor-from-code") == cli.EXIT_FIT
        assert run_cli("fit", tmp_path / "missing.json") == cli.EXIT_INPUT
        (tmp_path / "junk.json").write_text("{}")
        assert run_cli("fit", tmp_path / "junk.json") == cli.EXIT_INPUT
        assert run_cli("fit", synthetic_run(tmp_path / "s", 8, 20.0, 1, 0), "--scaling", "L1") == cli.EXIT_FIT


class TestSweep:
    def test_cardinality_and_header(self, tmp_path):
        cfg = write_cfg(tmp_path / "c.cfg", code__name="ising", run__n_trajectories="2")
        out = tmp_path / "sweep.csv"
        assert run_cli("--workers", 1, "sweep", cfg, "--sizes", "4,6,8", "--class", "X", "--values", "0:1:11",
                       "--t-eval-power", 1, "--out", out) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "L,control,rates,t_eval,mean_SN,stderr_SN,n"
        assert len(lines) == 1 + 33
        first = lines[1].split(",")
        assert first[0] == "4" and first[1] == "0.0" and first[2] == "X=0.0;Z=1.0" and first[3] == "4.0" and first[-1] == "2"

    def test_unknown_class(self, tmp_path):
        cfg = write_cfg(tmp_path / "c.cfg")
        assert run_cli("sweep", cfg, "--sizes", "3", "--class", "Y", "--values", "0.5", "--out", tmp_path / "s.csv") == cli.EXIT_CONFIG

    def test_rate_grid(self):
        assert cli.rate_grid(["X", "Y", "Z"], "Z", [0.6]) == [{"Z": 0.6, "X": 0.2, "Y": 0.2}]


class TestPlot:
    def test_empty_csv_writes_nothing(self, tmp_path, capsys):
        empty = tmp_path / "empty.csv"
        empty.write_text("")
        out = tmp_path / "x.svg"
        assert run_cli("plot", empty, "--out", out) == cli.EXIT_INPUT
        assert not out.exists()
        assert run_cli("plot", tmp_path / "absent.csv", "--out", out) == cli.EXIT_INPUT
        (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
        assert run_cli("plot", tmp_path / "bad.csv", "--out", out) == cli.EXIT_INPUT
        assert not out.exists()

    def test_series_svg(self, tmp_path):
        assert run_cli("--workers", 1, "run", ISING, "--out", tmp_path) == 0
        for scale in ("linear", "log"):
            out = tmp_path / f"s_{scale}.svg"
            assert run_cli("plot", tmp_path / "ising_SN.csv", "--out", out, "--yscale", scale) == 0
            assert "<svg" in out.read_text()


class TestConfigSchema:
    def test_shipped_schema_doc_is_current(self):
        assert (ROOT / "docs" / "config_schema.md").read_text() == schema_markdown()

    @pytest.mark.parametrize("path", sorted((ROOT / "configs").glob("*.cfg")))
    def test_shipped_configs_load(self, path):
        rc = load_config(path)
        assert rc.dynamics.n_trajectories >= 1
