"""Flat ``section.key = value`` run configuration.

One assignment per line; ``#`` starts a comment.  ``rates.<class>`` and
``cuts.<name>`` are open-ended sections, every other key is listed in
``SCHEMA``.  The same table is rendered into ``docs/config_schema.md``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np

from .codes import CODE_BUILDERS, CodeSpec, build_code, half_cut
from .dynamics import INITIAL_STATES, DynamicsConfig, geometric_schedule, linear_schedule
from .pauli import ContractViolation
from .state import Region

__all__ = ["ConfigError", "SCHEMA", "RunConfig", "parse_text", "load_config", "config_hash", "schema_markdown"]

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Schema violation; ``path`` names the offending dotted key."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any
    doc: str
    choices: tuple = ()


REQUIRED = object()

SCHEMA: dict[str, Key] = {
    "code.name": Key(str, REQUIRED, "code family", tuple(sorted(CODE_BUILDERS))),
    "code.L": Key(int, REQUIRED, "linear system size"),
    "code.boundary": Key(str, None, "open or periodic (codes that accept it)", ("open", "periodic")),
    "code.allow_even": Key(_bool, False, "permit even L for bsc3d"),
    "dynamics.t_max": Key(float, REQUIRED, "final time in units of N measurements"),
    "dynamics.perturbation_rate": Key(float, 0.0, "probability p_s of a random single-qubit Pauli draw"),
    "dynamics.initial_state": Key(str, "maximally_mixed", "initial state", INITIAL_STATES),
    "dynamics.track_stabilizers": Key(_bool, True, "record code-stabilizer membership counts"),
    "dynamics.early_stop": Key(_bool, True, "stop once the entropy can no longer change"),
    "schedule.kind": Key(str, "geometric", "record spacing", ("geometric", "linear", "explicit")),
    "schedule.per_decade": Key(int, 20, "points per decade for geometric spacing"),
    "schedule.n_points": Key(int, 100, "intervals for linear spacing"),
    "schedule.times": Key(_floats, None, "explicit record times (comma or space separated)"),
    "run.seed": Key(int, 0, "64-bit master seed"),
    "run.n_trajectories": Key(int, 1, "ensemble size"),
    "output.dir": Key(str, ".", "output directory"),
    "output.prefix": Key(str, "run", "file name prefix"),
}

OPEN_SECTIONS = {
    "rates": "rates.<class> = probability of selecting that check class; must sum to 1 (default: uniform)",
    "cuts": "cuts.<name> = half:<axis> or qubits:<i,j,...>; records S_A for that region",
}


def parse_text(text: str) -> dict[str, str]:
    """Raw ``key -> value`` strings; duplicate keys are an error."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", "expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in out:
            raise ConfigError(key, f"duplicate key (line {lineno})")
        out[key] = value
    return out


def _coerce(raw: Mapping[str, str]) -> dict[str, Any]:
    values: dict[str, Any] = {}
    for key, text in raw.items():
        section = key.split(".", 1)[0]
        if section in OPEN_SECTIONS:
            if key.count(".") != 1 or not key.split(".", 1)[1]:
                raise ConfigError(key, f"expected {section}.<name>")
            if section == "rates":
                try:
                    values[key] = float(text)
                except ValueError:
                    raise ConfigError(key, f"expected a number, got {text!r}") from None
            else:
                values[key] = text
            continue
        if key not in SCHEMA:
            raise ConfigError(key, "unknown key")
        spec = SCHEMA[key]
        try:
            v = spec.parse(text)
        except ValueError as exc:
            raise ConfigError(key, str(exc)) from None
        if spec.choices and v not in spec.choices:
            raise ConfigError(key, f"must be one of {list(spec.choices)}, got {v!r}")
        values[key] = v
    for key, spec in SCHEMA.items():
        if key not in values:
            if spec.default is REQUIRED:
                raise ConfigError(key, "required key missing")
            values[key] = spec.default
    return values


def _region(code: CodeSpec, key: str, text: str) -> Region:
    kind, _, arg = text.partition(":")
    try:
        if kind == "half":
            return half_cut(code, int(arg))
        if kind == "qubits":
            return Region.from_qubits(code.n_qubits, [int(q) for q in arg.replace(",", " ").split()])
    except (ValueError, IndexError, ContractViolation) as exc:
        raise ConfigError(key, str(exc)) from None
    raise ConfigError(key, f"expected half:<axis> or qubits:<list>, got {text!r}")


@dataclass
class RunConfig:
    """Validated configuration plus the objects it describes."""

    values: dict[str, Any]
    code: CodeSpec
    dynamics: DynamicsConfig

    @property
    def hash(self) -> str:
        return config_hash(self.values)

    @property
    def output_dir(self) -> Path:
        return Path(self.values["output.dir"])

    @property
    def prefix(self) -> str:
        return self.values["output.prefix"]


def build_run_config(values: Mapping[str, Any]) -> RunConfig:
    values = dict(values)
    opts: dict[str, Any] = {}
    if values.get("code.boundary") is not None:
        opts["boundary"] = values["code.boundary"]
    if values.get("code.allow_even"):
        opts["allow_even"] = True
    try:
        code = build_code(values["code.name"], int(values["code.L"]), **opts)
    except (ContractViolation, ValueError, TypeError) as exc:
        raise ConfigError("code", str(exc)) from None

    rates = {k.split(".", 1)[1]: v for k, v in values.items() if k.startswith("rates.")}
    if not rates:
        rates = code.default_rates()
    for name in rates:
        if name not in code.check_classes:
            raise ConfigError(f"rates.{name}", f"unknown check class; {code.name} has {list(code.check_classes)}")
    total = sum(rates.values())
    if any(v < 0 for v in rates.values()) or abs(total - 1.0) > 1e-9:
        raise ConfigError("rates", f"rates must be nonnegative and sum to 1, got sum {total!r}")

    t_max = float(values["dynamics.t_max"])
    kind = values["schedule.kind"]
    if kind == "geometric":
        times = geometric_schedule(t_max, code.n_qubits, int(values["schedule.per_decade"])) if t_max > 0 else None
    elif kind == "linear":
        times = linear_schedule(t_max, int(values["schedule.n_points"]))
    else:
        if not values.get("schedule.times"):
            raise ConfigError("schedule.times", "required when schedule.kind = explicit")
        times = np.asarray(values["schedule.times"], dtype=float)

    cuts = {k.split(".", 1)[1]: _region(code, k, v) for k, v in values.items() if k.startswith("cuts.")}
    try:
        dyn = DynamicsConfig(
            code,
            rates,
            t_max=t_max,
            perturbation_rate=float(values["dynamics.perturbation_rate"]),
            initial_state=values["dynamics.initial_state"],
            record_times=times,
            cuts=cuts,
            seed=int(values["run.seed"]),
            n_trajectories=int(values["run.n_trajectories"]),
            track_stabilizers=bool(values["dynamics.track_stabilizers"]),
            early_stop=bool(values["dynamics.early_stop"]),
        )
    except ContractViolation as exc:
        raise ConfigError("dynamics", str(exc)) from None
    return RunConfig(values, code, dyn)


def load_config(source: str | Path | Mapping[str, Any]) -> RunConfig:
    """From a config file, a manifest JSON (its config snapshot), or a dict."""
    if isinstance(source, Mapping):
        values = dict(source)
        for key, spec in SCHEMA.items():
            values.setdefault(key, None if spec.default is REQUIRED else spec.default)
        missing = [k for k, s in SCHEMA.items() if s.default is REQUIRED and values[k] is None]
        if missing:
            raise ConfigError(missing[0], "required key missing")
        return build_run_config(values)
    path = Path(source)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc.strerror}") from None
    if path.suffix == ".json":
        try:
            snap = json.loads(text)["config"]
        except (json.JSONDecodeError, KeyError, TypeError):
            raise ConfigError(str(path), "not a run manifest") from None
        return load_config(snap)
    return build_run_config(_coerce(parse_text(text)))


def config_hash(values: Mapping[str, Any]) -> str:
    blob = json.dumps(dict(values), sort_keys=True, separators=(",", ":"), default=list)
    return hashlib.sha256(blob.encode()).hexdigest()


def schema_markdown() -> str:
    lines = [
        "# Run configuration schema",
        "",
        f"Schema version {SCHEMA_VERSION}. One `section.key = value` per line, `#` starts a comment.",
        "",
        "| key | default | description |",
        "|---|---|---|",
    ]
    for key, spec in SCHEMA.items():
        default = "required" if spec.default is REQUIRED else repr(spec.default)
        doc = spec.doc + (f" ({', '.join(spec.choices)})" if spec.choices else "")
        lines.append(f"| `{key}` | {default} | {doc} |")
    for section, doc in OPEN_SECTIONS.items():
        lines.append(f"| `{section}.<name>` | | {doc} |")
    return "\n".join(lines) + "\n"
