"""Versioned TOML experiment configs.

Every section maps onto a dataclass. Unknown keys, missing required keys and
wrong types are errors, so a typo cannot silently change a bound check.
"""
from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
import typing
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

CONFIG_VERSION = 1
KINDS = ("simulate", "lr", "quasilocal", "trotter", "selftest", "sweep")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ProfileConfig:
    kind: str = "constant"
    value: float = 1.0
    breakpoints: list = field(default_factory=list)
    values: list = field(default_factory=list)
    before: float = 0.0
    after: float = 0.0
    at: float = 0.0
    offset: float = 0.0
    amplitude: float = 0.0
    omega: float = 0.0
    phase: float = 0.0


@dataclass(frozen=True)
class ModelConfig:
    preset: str = "dissipative_ising"
    lattice: str = "chain"  # chain | grid
    size: list = field(default_factory=lambda: [8])
    metric: str = "l1"  # grids only
    params: dict = field(default_factory=dict)  # forwarded to the preset
    coupling_profile: ProfileConfig = field(default_factory=ProfileConfig)


@dataclass(frozen=True)
class OperatorConfig:
    """A product operator: one Pauli label per site, e.g. sites [3, 4] with label "ZZ"."""
    sites: list = field(default_factory=lambda: [4])
    label: str = "Z"


@dataclass(frozen=True)
class ProbeConfig:
    """The ``X`` side of a commutator bound; one row block per entry of ``sites``."""
    sites: list = field(default_factory=lambda: [0])
    label: str = "X"


@dataclass(frozen=True)
class TimesConfig:
    final: float = 1.0  # t; rows use r = t - duration
    durations: list = field(default_factory=lambda: [0.1 * k for k in range(1, 11)])


@dataclass(frozen=True)
class QuasilocalConfig:
    radii: list = field(default_factory=lambda: [1, 2, 3, 4])


@dataclass(frozen=True)
class TrotterConfig:
    t_total: float = 0.4
    dt: list = field(default_factory=lambda: [0.2, 0.1, 0.05, 0.025])
    D0: int = 2
    ordering: str = "lexicographic"
    averaged: bool = False
    sample_count: int = 4
    scaling_window: list = field(default_factory=lambda: [0.35, 0.75])


@dataclass(frozen=True)
class SimulateConfig:
    initial_state: str = "excited"  # excited | ground | plus | per-site string over 0 1 + -
    times: list = field(default_factory=lambda: [0.0, 0.5, 1.0])
    observables: list = field(default_factory=lambda: ["Z@4"])  # "LABEL@site,site"


@dataclass(frozen=True)
class ConstantsConfig:
    kappa: float = 0.0
    M: float | None = None  # None: fitted from the shells of the lattice
    norm_grid: int = 257
    norm_restarts: int = 32


@dataclass(frozen=True)
class SolverSection:
    step: float | None = None
    tol: float = 1e-9
    halving: bool = True
    max_halvings: int = 6
    step_rule: float = 0.05


@dataclass(frozen=True)
class LimitsConfig:
    max_qubits: int = 10
    slack: float = 1e-7  # numerical slack allowed on every bound comparison


@dataclass(frozen=True)
class SelftestConfig:
    duality_cases: int = 50
    cpt_cases: int = 20


@dataclass(frozen=True)
class SweepConfig:
    experiment: str = "lr"
    parameter: str = "model.params.gamma"
    values: list = field(default_factory=list)


@dataclass(frozen=True)
class ExperimentConfig:
    version: int
    seed: int
    kind: str | None = None
    model: ModelConfig = field(default_factory=ModelConfig)
    observable: OperatorConfig = field(default_factory=OperatorConfig)
    probe: ProbeConfig = field(default_factory=ProbeConfig)
    times: TimesConfig = field(default_factory=TimesConfig)
    quasilocal: QuasilocalConfig = field(default_factory=QuasilocalConfig)
    trotter: TrotterConfig = field(default_factory=TrotterConfig)
    simulate: SimulateConfig = field(default_factory=SimulateConfig)
    constants: ConstantsConfig = field(default_factory=ConstantsConfig)
    solver: SolverSection = field(default_factory=SolverSection)
    limits: LimitsConfig = field(default_factory=LimitsConfig)
    selftest: SelftestConfig = field(default_factory=SelftestConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)


def _check_scalar(value, tp, path):
    origin = typing.get_origin(tp)
    if origin is typing.Union or type(tp).__name__ == "UnionType":
        args = typing.get_args(tp)
        if value is None and type(None) in args:
            return None
        for a in args:
            if a is type(None):
                continue
            try:
                return _check_scalar(value, a, path)
            except ConfigError:
                pass
        raise ConfigError(f"{path}: unexpected value {value!r}")
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false, got {value!r}")
        return value
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if tp is list:
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list, got {value!r}")
        return value
    if tp is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected a table, got {value!r}")
        return value
    raise ConfigError(f"{path}: unsupported field type {tp}")


def _build(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected a table")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) {', '.join((path + '.' if path else '') + k for k in unknown)}")
    kwargs = {}
    for f in dataclasses.fields(cls):
        key = f"{path}.{f.name}" if path else f.name
        if f.name not in data:
            if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING:
                raise ConfigError(f"missing required key {key}")
            continue
        tp = hints[f.name]
        if dataclasses.is_dataclass(tp):
            kwargs[f.name] = _build(tp, data[f.name], key)
        else:
            kwargs[f.name] = _check_scalar(data[f.name], tp, key)
    return cls(**kwargs)


def parse_value(text: str):
    """A TOML literal if it parses as one, else the raw string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(raw: dict, overrides) -> dict:
    raw = copy.deepcopy(raw)
    for item in overrides or ():
        if isinstance(item, str):
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not key=value")
            key, text = item.split("=", 1)
            value = parse_value(text.strip())
        else:
            key, value = item
        parts = key.strip().split(".")
        node = raw
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a non-table")
        node[parts[-1]] = value
    return raw


def build_config(raw: dict) -> ExperimentConfig:
    if "version" not in raw:
        raise ConfigError("missing required key version")
    if raw["version"] != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {raw['version']!r}; expected {CONFIG_VERSION}")
    cfg = _build(ExperimentConfig, raw, "")
    validate(cfg)
    return cfg


def load_raw(path) -> dict:
    with open(Path(path), "rb") as fh:
        return tomllib.load(fh)


def load_config(path=None, overrides=()) -> ExperimentConfig:
    raw = load_raw(path) if path is not None else {"version": CONFIG_VERSION}
    return build_config(apply_overrides(raw, overrides))


def validate(cfg: ExperimentConfig):
    if cfg.kind is not None and cfg.kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}")
    if cfg.seed < 0:
        raise ConfigError("seed must be nonnegative")
    if cfg.model.lattice not in ("chain", "grid"):
        raise ConfigError("model.lattice must be chain or grid")
    if cfg.model.lattice == "chain" and len(cfg.model.size) != 1:
        raise ConfigError("a chain takes a single size")
    if len(cfg.observable.label) != len(cfg.observable.sites):
        raise ConfigError("observable.label needs one Pauli letter per site")
    if len(cfg.probe.label) != 1:
        raise ConfigError("probe.label must be a single-site Pauli letter")
    if cfg.trotter.ordering not in ("lexicographic", "even-odd", "seeded-random"):
        raise ConfigError("unknown trotter.ordering")
    if cfg.trotter.sample_count < 1:
        raise ConfigError("trotter.sample_count must be >= 1")
    if any(d <= 0 for d in cfg.trotter.dt):
        raise ConfigError("trotter.dt values must be positive")
    if any(d < 0 for d in cfg.times.durations):
        raise ConfigError("times.durations must be nonnegative")
    if cfg.sweep.experiment not in ("simulate", "lr", "quasilocal", "trotter"):
        raise ConfigError("sweep.experiment must name a single experiment")


def to_dict(cfg: ExperimentConfig) -> dict:
    return dataclasses.asdict(cfg)


def config_hash(cfg: ExperimentConfig) -> str:
    blob = json.dumps(to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
