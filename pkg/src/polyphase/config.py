"""Experiment configuration and run manifests.

Configs are plain nested dataclasses loaded from JSON.  Loading is strict:
unknown keys and wrong types are errors, and ``from_dict(to_dict(c)) == c``.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import typing
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Optional

from .ensemble import DensitySpec, EnsembleParams

TOLERANCE_DEFAULTS = {
    "ward": 1e-8,
    "operator": 1e-10,
    "schur": 1e-8,
    "interlacing": 1e-9,
    "self_consistency": 1e-8,
}
ENV_PREFIX = "POLYPHASE_TOL_"


class ConfigError(ValueError):
    pass


@dataclass
class EnsembleConfig:
    N: int = 200
    d: int = 3
    density: str = "uniform"
    a: float = 0.0

    def params(self, seed: int = 0) -> EnsembleParams:
        dens = DensitySpec.uniform() if self.density == "uniform" else DensitySpec.raised_cosine(self.a)
        return EnsembleParams(self.N, self.d, dens, seed)


@dataclass
class GridConfig:
    """Evaluation points: the product ``E_values x eta_values``, or a lattice."""

    E_values: list = field(default_factory=lambda: [2.0])
    eta_values: list = field(default_factory=lambda: [0.2])
    lattice: bool = False
    kappa: float = 0.5
    c_kappa: float = 1.0
    theta: float = 0.5
    s: Optional[float] = None
    max_points: int = 100000


@dataclass
class DescentConfig:
    E: float = 2.0
    eta_start: float = 0.5
    eta_stop: float = 0.05
    s: float = 0.5
    c: float = 1.0


@dataclass
class RigidityConfig:
    kappa: float = 0.5
    n_E: int = 200


@dataclass
class DelocConfig:
    kappa: float = 0.5
    eta: float = 0.05
    surrogate: bool = True


@dataclass
class MomentsConfig:
    row: int = 0
    z_values: list = field(default_factory=lambda: [[2.0, 0.2]])
    p_values: list = field(default_factory=lambda: [1, 2])
    replicas: list = field(default_factory=lambda: [1000])
    eps: float = 0.0


@dataclass
class DiophantineConfig:
    N: int = 6
    d: int = 2
    p: int = 1
    v: Optional[list] = None
    off_diagonal: bool = True
    gamma: Optional[float] = None
    row: int = 0
    z: list = field(default_factory=lambda: [2.0, 0.2])
    solution_cap: int = 5000000


@dataclass
class ExponentsConfig:
    d_min: int = 18
    d_max: int = 60
    general: bool = False


@dataclass
class VerifyConfig:
    N: int = 60
    d: int = 3
    draws: int = 5
    operator_matrices: int = 100
    dichotomy_lists: int = 1000
    eta: float = 0.1


@dataclass
class ExperimentConfig:
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    descent: Optional[DescentConfig] = None
    rigidity: RigidityConfig = field(default_factory=RigidityConfig)
    deloc: DelocConfig = field(default_factory=DelocConfig)
    moments: MomentsConfig = field(default_factory=MomentsConfig)
    diophantine: DiophantineConfig = field(default_factory=DiophantineConfig)
    exponents: ExponentsConfig = field(default_factory=ExponentsConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    out: Optional[str] = None
    seeds: list = field(default_factory=lambda: [1])
    tolerances: dict = field(default_factory=dict)

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        cfg = _build(cls, data, "config")
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(data)

    def experiment_dict(self) -> dict:
        """Everything that affects results: the config minus the output location."""
        data = self.to_dict()
        del data["out"]
        return data

    def canonical_json(self) -> str:
        return json.dumps(self.experiment_dict(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    # -- semantics -----------------------------------------------------------

    def validate(self) -> None:
        if not self.seeds:
            raise ConfigError("seed list is empty")
        if any(not isinstance(s, int) or isinstance(s, bool) or s < 0 for s in self.seeds):
            raise ConfigError("seeds must be nonnegative integers")
        unknown = set(self.tolerances) - set(TOLERANCE_DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown tolerance keys {sorted(unknown)}")
        try:
            self.ensemble.params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def effective_tolerances(self, environ=None) -> dict:
        """Defaults, then config values, then ``POLYPHASE_TOL_<NAME>`` variables."""
        environ = os.environ if environ is None else environ
        tol = dict(TOLERANCE_DEFAULTS)
        tol.update(self.tolerances)
        for key, val in environ.items():
            if key.startswith(ENV_PREFIX):
                name = key[len(ENV_PREFIX) :].lower()
                if name not in TOLERANCE_DEFAULTS:
                    raise ConfigError(f"unknown tolerance override {key}")
                try:
                    tol[name] = float(val)
                except ValueError as exc:
                    raise ConfigError(f"{key}={val!r} is not a number") from exc
        return tol


def _build(tp, data, where: str):
    """Instantiate dataclass ``tp`` from ``data``, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    hints = typing.get_type_hints(tp)
    names = {f.name for f in dataclasses.fields(tp)}
    extra = set(data) - names
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")
    kwargs = {}
    for name, value in data.items():
        kwargs[name] = _coerce(hints[name], value, f"{where}.{name}")
    return tp(**kwargs)


def _coerce(hint, value, where: str):
    origin = typing.get_origin(hint)
    if origin is typing.Union:
        args = [a for a in typing.get_args(hint) if a is not type(None)]
        if value is None:
            return None
        return _coerce(args[0], value, where)
    if dataclasses.is_dataclass(hint):
        return _build(hint, value, where)
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected a boolean")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string")
        return value
    if hint is list:
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list")
        return value
    if hint is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"{where}: expected an object")
        return value
    return value


def parse_seeds(text: str) -> list[int]:
    """``"1,2,5-7"`` -> ``[1, 2, 5, 6, 7]``; duplicates removed, order kept."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part:
                lo, hi = part.split("-", 1)
                lo, hi = int(lo), int(hi)
                if hi < lo:
                    raise ConfigError(f"empty seed range {part!r}")
                out.extend(range(lo, hi + 1))
            else:
                out.append(int(part))
        except ValueError as exc:
            raise ConfigError(f"bad seed token {part!r}") from exc
    seen = set()
    return [s for s in out if not (s in seen or seen.add(s))]


@dataclass
class RunManifest:
    command: str
    config_hash: str
    version: str
    timestamp: str
    outputs: dict  # file name -> sha256

    @staticmethod
    def now() -> str:
        """UTC time, or ``SOURCE_DATE_EPOCH`` when set (reproducible manifests)."""
        epoch = os.environ.get("SOURCE_DATE_EPOCH")
        t = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
        return t.strftime("%Y-%m-%dT%H:%M:%SZ")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)
