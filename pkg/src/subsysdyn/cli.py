"""``subsysdyn`` command line: code-info, run, fit, sweep, plot.

Exit codes: 0 success, 2 usage, 3 config error, 4 resource guard,
5 fit refusal, 6 missing or unreadable input.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from importlib import metadata
from pathlib import Path
from typing import Sequence

import numpy as np

from . import analysis
from .codes import CODE_BUILDERS, build_code, compute_code_parameters, frustration_graph, is_bipartite
from .config import ConfigError, config_hash, load_config
from .dynamics import WORKERS_ENV, ResourceGuardError, default_workers, run_ensemble
from .pauli import ContractViolation

__all__ = ["main", "EXIT_OK", "EXIT_CONFIG", "EXIT_RESOURCE", "EXIT_FIT", "EXIT_INPUT", "CSV_SCHEMA_VERSION"]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_RESOURCE = 4
EXIT_FIT = 5
EXIT_INPUT = 6

CSV_SCHEMA_VERSION = 1
MANIFEST_SCHEMA_VERSION = 1
FIT_SCHEMA_VERSION = 1
SWEEP_HEADER = ["L", "control", "rates", "t_eval", "mean_SN", "stderr_SN", "n"]


class InputError(RuntimeError):
    pass


def engine_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _fmt(x: float) -> str:
    return repr(float(x))


def _observable_tag(obs: str, sub: str | None) -> str:
    if obs == "S_N":
        return "SN"
    if obs == "S_A":
        return f"SA_{sub}"
    return f"ZS_{sub}"


def write_series_csv(path: Path, tag: str, t, mean, stderr, n: int) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", f"mean_{tag}", f"stderr_{tag}", "n"])
        for row in zip(t, mean, stderr):
            w.writerow([_fmt(row[0]), _fmt(row[1]), _fmt(row[2]), n])


def read_series_csv(path: Path) -> tuple[str, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    if len(rows) < 2:
        raise InputError(f"{path}: no data rows")
    head = rows[0]
    if len(head) != 4 or head[0] != "t" or head[3] != "n" or not head[1].startswith("mean_"):
        raise InputError(f"{path}: not a series CSV (header {head})")
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    return head[1][5:], data[:, 0], data[:, 1], data[:, 2], data[:, 3]


# code-info


def code_info(name: str, L: int, **options) -> dict:
    code = build_code(name, L, **options)
    params = compute_code_parameters(code)
    return {
        "code": name,
        "L": L,
        "parameters": params.as_dict(),
        "check_counts": {k: len(c) for k, c in code.check_classes.items()},
        "stabilizer_families": code.stabilizer_families(),
        "stabilizers_by_delta": {str(k): v for k, v in sorted(code.stabilizers_by_delta().items())},
        "unpurifiable_dof": code.unpurifiable_dof,
        "css": code.css,
        "bipartite": is_bipartite(frustration_graph(code)),
    }


def cmd_code_info(args) -> int:
    opts = {}
    if args.boundary:
        opts["boundary"] = args.boundary
    if args.allow_even:
        opts["allow_even"] = True
    try:
        info = code_info(args.code, args.L, **opts)
    except (ContractViolation, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(info, indent=2))
    return EXIT_OK


# run


def execute_run(source, workers: int | None = None, out_dir: str | None = None) -> dict:
    rc = load_config(source)
    if out_dir is not None:
        rc.values["output.dir"] = out_dir
    out = rc.output_dir
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    ens = run_ensemble(rc.dynamics, workers=workers)
    wall = time.perf_counter() - t0
    files = []
    for obs, sub in ens.observables():
        tag = _observable_tag(obs, sub)
        path = out / f"{rc.prefix}_{tag}.csv"
        write_series_csv(path, tag, ens.times, ens.mean(obs, sub), ens.stderr(obs, sub), ens.n)
        files.append(path.name)
    traj = out / f"{rc.prefix}_trajectories.npz"
    np.savez_compressed(traj, t=ens.times, S_N=ens.matrix())
    files.append(traj.name)
    snapshot = {k: rc.values[k] for k in sorted(rc.values) if k != "output.dir"}
    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "engine_version": engine_version(),
        "config": snapshot,
        "config_hash": config_hash(snapshot),
        "seed": int(rc.dynamics.seed),
        "n_trajectories": ens.n,
        "code_parameters": compute_code_parameters(rc.code).as_dict(),
        "unpurifiable_dof": int(rc.code.unpurifiable_dof),
        "timing": {"wall_seconds": wall, "workers": workers if workers else default_workers()},
        "outputs": files,
    }
    path = out / f"{rc.prefix}_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    manifest["path"] = str(path)
    return manifest


def cmd_run(args) -> int:
    try:
        m = execute_run(args.config, workers=args.workers, out_dir=args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceGuardError as exc:
        print(f"resource guard: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    print(m["path"])
    return EXIT_OK


# fit


def _load_run(manifest_path: Path):
    try:
        man = json.loads(manifest_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"{manifest_path}: cannot read manifest ({exc})") from None
    base = manifest_path.parent
    try:
        prefix = man["config"]["output.prefix"]
        man["code_parameters"]["K"], man["config"]["code.L"]
    except (KeyError, TypeError):
        raise InputError(f"{manifest_path}: not a run manifest") from None
    npz = base / f"{prefix}_trajectories.npz"
    if npz.exists():
        with np.load(npz) as z:
            return man, z["t"], z["S_N"]
    _, t, mean, _, _ = read_series_csv(base / f"{prefix}_SN.csv")
    return man, t, mean


def fit_runs(manifests: Sequence[Path], model: str, floor: float | None, scaling: str | None, n_boot: int, seed: int) -> dict:
    fits = []
    for p in manifests:
        man, t, series = _load_run(Path(p))
        # floor: logical qubits plus modes no check sequence can purify
        fl = floor if floor is not None else float(man["code_parameters"]["K"] + man.get("unpurifiable_dof", 0))
        if model == "exponential":
            res = analysis.fit_exponential(t, series, fl, n_boot=n_boot, seed=seed)
        else:
            res = analysis.fit_double_exponential(t, series, fl, n_boot=n_boot, seed=seed)
        fits.append({"source": str(p), "L": int(man["config"]["code.L"]), "floor": fl, **res.as_dict()})
    report: dict = {"schema_version": FIT_SCHEMA_VERSION, "model": model, "fits": fits}
    if scaling:
        key = "tau" if model == "exponential" else "tau_Z"
        pts = [(f["L"], f["params"][key], f["errors"][key]) for f in fits]
        if scaling == "power":
            sc = analysis.fit_scaling(pts, model="power_law_in_L")
        elif scaling.startswith("L"):
            sc = analysis.fit_scaling(pts, model="exp_in_L_to_Delta", delta=float(scaling[1:]))
        else:
            raise analysis.FitError(f"unknown scaling {scaling!r}; use L1, L2 or power")
        report["scaling"] = sc.as_dict()
    return report


def cmd_fit(args) -> int:
    try:
        report = fit_runs(
            args.manifests,
            args.model,
            None if args.floor_from_code else args.floor,
            args.scaling,
            args.n_boot,
            args.seed,
        )
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except analysis.FitError as exc:
        print(f"fit refused: {exc}", file=sys.stderr)
        return EXIT_FIT
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# sweep


def rate_grid(classes: Sequence[str], swept: str, values: Sequence[float]) -> list[dict[str, float]]:
    """The swept class gets ``p``; the remaining classes share ``1 - p`` equally."""
    others = [c for c in classes if c != swept]
    grid = []
    for p in values:
        rates = {swept: float(p)}
        for c in others:
            rates[c] = (1.0 - float(p)) / len(others)
        grid.append(rates)
    return grid


def execute_sweep(source, sizes: Sequence[int], swept: str, values: Sequence[float], t_eval_power: float | None, t_eval: float | None, workers: int | None, out: Path) -> list:
    rc = load_config(source)
    base = dict(rc.values)
    name, opts = base["code.name"], {}
    if base.get("code.boundary"):
        opts["boundary"] = base["code.boundary"]
    if base.get("code.allow_even"):
        opts["allow_even"] = True
    grid = rate_grid(list(rc.code.check_classes), swept, values)
    if swept not in rc.code.check_classes:
        raise ConfigError("--class", f"unknown check class {swept!r}")
    te = (lambda L: float(L) ** t_eval_power) if t_eval_power is not None else float(t_eval or base["dynamics.t_max"])
    rows = analysis.sweep_order_parameter(
        lambda L: build_code(name, L, **opts),
        sizes,
        grid,
        te,
        int(base["run.n_trajectories"]),
        seed=int(base["run.seed"]),
        control=lambda r: r[swept],
        workers=workers,
        initial_state=base["dynamics.initial_state"],
        perturbation_rate=float(base["dynamics.perturbation_rate"]),
    )
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for r in rows:
            rates = ";".join(f"{k}={_fmt(v)}" for k, v in r.rates.items())
            w.writerow([r.L, _fmt(r.control), rates, _fmt(r.t_eval), _fmt(r.mean), _fmt(r.stderr), r.n])
    return rows


def _floats(text: str) -> list[float]:
    if ":" in text:
        a, b, k = text.split(":")
        return [float(v) for v in np.linspace(float(a), float(b), int(k))]
    return [float(v) for v in text.split(",")]


def cmd_sweep(args) -> int:
    try:
        execute_sweep(
            args.config,
            [int(v) for v in args.sizes.split(",")],
            args.sweep_class,
            _floats(args.values),
            args.t_eval_power,
            args.t_eval,
            args.workers,
            Path(args.out),
        )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceGuardError as exc:
        print(f"resource guard: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    print(args.out)
    return EXIT_OK


# plot


def plot_series(csv_paths: Sequence[Path], out: Path, yscale: str = "linear", xscale: str = "log") -> None:
    series = [(Path(p).stem, read_series_csv(Path(p))) for p in csv_paths]
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.5))
    for label, (tag, t, mean, err, _) in series:
        keep = t > 0 if xscale == "log" else np.ones_like(t, dtype=bool)
        ax.plot(t[keep], mean[keep], label=label)
        ax.fill_between(t[keep], (mean - err)[keep], (mean + err)[keep], alpha=0.3)
    ax.set_xscale(xscale)
    ax.set_yscale(yscale)
    ax.set_xlabel("t")
    ax.set_ylabel(series[0][1][0])
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(out, format="svg")
    plt.close(fig)


def plot_tau(fit_report: Path, out: Path, delta: float = 1.0) -> None:
    try:
        rep = json.loads(Path(fit_report).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"{fit_report}: {exc}") from None
    if not rep.get("fits"):
        raise InputError(f"{fit_report}: no fits")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    L = np.array([f["L"] for f in rep["fits"]], dtype=float)
    tau = np.array([f["params"].get("tau", f["params"].get("tau_Z")) for f in rep["fits"]])
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.semilogy(L**delta, tau, "o-")
    ax.set_xlabel(f"L^{delta:g}")
    ax.set_ylabel("tau")
    fig.tight_layout()
    fig.savefig(out, format="svg")
    plt.close(fig)


def cmd_plot(args) -> int:
    try:
        if args.tau:
            plot_tau(Path(args.inputs[0]), Path(args.out), args.delta)
        else:
            plot_series(args.inputs, Path(args.out), args.yscale, args.xscale)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="subsysdyn", description="Measurement-only dynamics of Pauli subsystem codes.")
    ap.add_argument("--workers", type=int, default=None, help=f"worker processes (default: ${WORKERS_ENV} or CPU count)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("code-info", help="print code parameters as JSON")
    p.add_argument("code", choices=sorted(CODE_BUILDERS))
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--boundary", choices=["open", "periodic"])
    p.add_argument("--allow-even", action="store_true")
    p.set_defaults(func=cmd_code_info)

    p = sub.add_parser("run", help="run an ensemble from a config file or manifest")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("fit", help="fit purification times of one or more runs")
    p.add_argument("manifests", nargs="+", type=Path)
    p.add_argument("--model", choices=["exponential", "double_exponential"], default="exponential")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--floor", type=float, default=0.0)
    g.add_argument("--floor-from-code", action="store_true")
    p.add_argument("--scaling", help="L1, L2 (tau ~ exp(a L^d)) or power (tau ~ L^z)")
    p.add_argument("--n-boot", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sweep", help="S_N(t_eval) over a rate grid and sizes")
    p.add_argument("config")
    p.add_argument("--sizes", required=True, help="comma-separated L values")
    p.add_argument("--class", dest="sweep_class", required=True, help="check class whose rate is swept")
    p.add_argument("--values", required=True, help="comma list or start:stop:count")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--t-eval-power", type=float, help="evaluate at t = L**power")
    g.add_argument("--t-eval", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="SVG line chart from series CSVs or a fit report")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--tau", action="store_true", help="plot tau vs L^delta from a fit report")
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--xscale", choices=["linear", "log"], default="log")
    p.add_argument("--yscale", choices=["linear", "log"], default="linear")
    p.set_defaults(func=cmd_plot)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ContractViolation as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
