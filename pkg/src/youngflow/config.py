"""Experiment configuration: schema, validation and path construction.

Configs are nested mappings (YAML or JSON files). Validation collects
every problem before raising, and unknown keys are rejected at every
level. ``to_dict`` output loads back to an equal config.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .errors import ConfigError, DomainError
from .paths import SampledPath, uniform_grid
from .solver import LinearYDE
from .stochastic import AUTO, CHOLESKY, CIRCULANT, MIN_MEMBERS, FbmSpec, fbm_sample
from .triangular import TriangularYDE
from .young import YoungParams

SCHEMA_VERSION = 1
COEFF_KINDS = ("constant", "periodic", "piecewise", "csv")
DRIVER_KINDS = ("fbm", "csv", "linear", "zero")
METHODS = ("qr", "svd")
FORMATS = ("json", "csv")


@dataclass
class CoefficientSpec:
    """A d x d coefficient path.

    constant: ``value``; periodic: m0 + m1 sin(freq t + phase);
    piecewise: ``values[i]`` on [breaks[i], breaks[i+1]) with breaks[0] the
    first time; csv: a path file in the standard format.
    """

    kind: str = "constant"
    value: Any = None
    m0: Any = None
    m1: Any = None
    freq: float = 1.0
    phase: float = 0.0
    breaks: Any = None
    values: Any = None
    path: str | None = None

    def build(self, times: np.ndarray, d: int, base_dir: Path) -> SampledPath:
        if self.kind == "constant":
            return SampledPath.constant(np.asarray(self.value, dtype=float).reshape(d, d), times)
        if self.kind == "periodic":
            m0 = np.asarray(self.m0, dtype=float).reshape(d, d)
            m1 = np.asarray(self.m1, dtype=float).reshape(d, d)
            s = np.sin(self.freq * times + self.phase)
            return SampledPath(times, m0[None] + s[:, None, None] * m1[None])
        if self.kind == "piecewise":
            vals = np.asarray(self.values, dtype=float).reshape(-1, d, d)
            k = np.searchsorted(np.asarray(self.breaks, dtype=float), times, side="right") - 1
            return SampledPath(times, vals[np.clip(k, 0, vals.shape[0] - 1)])
        from .io import read_path_csv

        src = read_path_csv(_resolve(self.path, base_dir), shape=(d, d))
        return src.resample(times)

    def problems(self, where: str, d: int | None) -> list[str]:
        out = []
        if self.kind not in COEFF_KINDS:
            return [f"{where}.kind: must be one of {COEFF_KINDS}, got {self.kind!r}"]
        need = {"constant": ("value",), "periodic": ("m0", "m1"), "piecewise": ("breaks", "values"), "csv": ("path",)}[self.kind]
        for name in need:
            if getattr(self, name) is None:
                out.append(f"{where}.{name}: required for kind {self.kind!r}")
        if out or d is None:
            return out
        for name in need:
            if name in ("path",):
                continue
            try:
                arr = np.asarray(getattr(self, name), dtype=float)
            except (TypeError, ValueError):
                out.append(f"{where}.{name}: must be numeric")
                continue
            if not np.all(np.isfinite(arr)):
                out.append(f"{where}.{name}: must be finite")
            if name in ("value", "m0", "m1") and arr.size != d * d:
                out.append(f"{where}.{name}: expected {d}x{d} entries, got {arr.size}")
        if self.kind == "piecewise" and not out:
            b = np.asarray(self.breaks, dtype=float).reshape(-1)
            v = np.asarray(self.values, dtype=float)
            if b.size < 1 or np.any(np.diff(b) <= 0):
                out.append(f"{where}.breaks: must be a nonempty increasing list")
            if v.size != b.size * d * d:
                out.append(f"{where}.values: expected one {d}x{d} matrix per break")
        if self.kind == "periodic":
            for name in ("freq", "phase"):
                if not _is_number(getattr(self, name)):
                    out.append(f"{where}.{name}: must be a number")
        return out


@dataclass
class SystemConfig:
    dimension: int = 1
    triangular: bool = False
    A: CoefficientSpec = field(default_factory=lambda: CoefficientSpec(value=[[0.0]]))
    C: CoefficientSpec = field(default_factory=lambda: CoefficientSpec(value=[[0.0]]))


@dataclass
class DriverConfig:
    kind: str = "fbm"
    hurst: float = 0.7
    method: str = AUTO
    slope: float = 1.0
    path: str | None = None


@dataclass
class NumericsConfig:
    p: float = 1.5
    q: float = 2.0
    mu: float | None = None
    tol: float = 1e-12
    max_iter: int = 200
    per_unit: int = 128
    t0: float = 0.0
    h: float = 1.0
    horizon: float = 10.0
    t_max: float | None = None
    method: str = "qr"
    tail_fraction: float = 0.2
    x0: list | None = None
    gamma_delta: float = 1.0


@dataclass
class IntegrateConfig:
    integrand: CoefficientSpec = field(default_factory=lambda: CoefficientSpec(value=[[1.0]]))


@dataclass
class EnsembleConfig:
    members: int = 50


@dataclass
class OutputConfig:
    dir: str = "out"
    formats: list = field(default_factory=lambda: ["json", "csv"])
    save_driver: bool = False


@dataclass
class ExperimentConfig:
    version: int = SCHEMA_VERSION
    seed: int = 0
    system: SystemConfig = field(default_factory=SystemConfig)
    driver: DriverConfig = field(default_factory=DriverConfig)
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    integrate: IntegrateConfig = field(default_factory=IntegrateConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    outputs: OutputConfig = field(default_factory=OutputConfig)
    base_dir: str = field(default=".", metadata={"internal": True})

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return d

    @classmethod
    def from_dict(cls, data: dict, base_dir: str | Path = ".") -> "ExperimentConfig":
        problems: list[str] = []
        cfg = _build(cls, data, "", problems)
        if cfg is not None:
            cfg.base_dir = str(base_dir)
            problems.extend(cfg.problems())
        if problems:
            raise ConfigError(problems)
        return cfg

    @classmethod
    def load(cls, file) -> "ExperimentConfig":
        file = Path(file)
        try:
            text = file.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError([f"cannot read config {file}: {exc}"]) from exc
        try:
            data = json.loads(text) if file.suffix == ".json" else yaml.load(text, Loader=_Loader)
        except (json.JSONDecodeError, yaml.YAMLError) as exc:
            raise ConfigError([f"cannot parse {file}: {exc}"]) from exc
        if data is None:
            data = {}
        return cls.from_dict(data, file.parent)

    def dump_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    # -- validation ---------------------------------------------------------

    def problems(self) -> list[str]:
        out = []
        if self.version != SCHEMA_VERSION:
            out.append(f"version: expected {SCHEMA_VERSION}, got {self.version!r}")
        if not (_is_int(self.seed) and 0 <= self.seed < 2**64):
            out.append(f"seed: must be an integer in [0, 2^64), got {self.seed!r}")
        s = self.system
        d = None
        if not (_is_int(s.dimension) and 1 <= s.dimension <= 8):
            out.append(f"system.dimension: must be an integer in [1, 8], got {s.dimension!r}")
        else:
            d = s.dimension
        if not isinstance(s.triangular, bool):
            out.append("system.triangular: must be true or false")
        out += s.A.problems("system.A", d)
        out += s.C.problems("system.C", d)
        dr = self.driver
        if dr.kind not in DRIVER_KINDS:
            out.append(f"driver.kind: must be one of {DRIVER_KINDS}, got {dr.kind!r}")
        if not (_is_number(dr.hurst) and 0.5 < dr.hurst < 1):
            out.append(f"driver.hurst: must lie in (0.5, 1), got {dr.hurst!r}")
        if dr.method not in (AUTO, CHOLESKY, CIRCULANT):
            out.append(f"driver.method: must be auto, cholesky or circulant, got {dr.method!r}")
        if not _is_number(dr.slope):
            out.append("driver.slope: must be a number")
        if dr.kind == "csv" and not dr.path:
            out.append("driver.path: required for kind 'csv'")
        n = self.numerics
        p_ok = _is_number(n.p) and 1 < n.p < 2
        if not p_ok:
            out.append(f"numerics.p: must lie in (1, 2), got {n.p!r}")
        if not _is_number(n.q):
            out.append(f"numerics.q: must be a number, got {n.q!r}")
        elif p_ok and not (n.q > n.p and 1 / n.p + 1 / n.q > 1):
            out.append(f"numerics.q: need q > p and 1/p + 1/q > 1, got q={n.q}")
        if n.mu is not None and not (_is_number(n.mu) and 0 < n.mu < 1):
            out.append(f"numerics.mu: must be null or in (0, 1), got {n.mu!r}")
        if not (_is_number(n.tol) and n.tol > 0):
            out.append(f"numerics.tol: must be positive, got {n.tol!r}")
        if not (_is_int(n.max_iter) and n.max_iter >= 1):
            out.append(f"numerics.max_iter: must be a positive integer, got {n.max_iter!r}")
        if not (_is_int(n.per_unit) and n.per_unit >= 1):
            out.append(f"numerics.per_unit: must be a positive integer, got {n.per_unit!r}")
        if not (_is_number(n.t0) and n.t0 >= 0):
            out.append(f"numerics.t0: must be nonnegative, got {n.t0!r}")
        if not (_is_number(n.h) and n.h > 0):
            out.append(f"numerics.h: must be positive, got {n.h!r}")
        if not (_is_number(n.horizon) and n.horizon > 0):
            out.append(f"numerics.horizon: must be positive, got {n.horizon!r}")
        if n.t_max is not None and not (_is_number(n.t_max) and _is_number(n.horizon) and n.t_max >= n.horizon):
            out.append(f"numerics.t_max: must be null or at least the horizon, got {n.t_max!r}")
        if n.method not in METHODS:
            out.append(f"numerics.method: must be one of {METHODS}, got {n.method!r}")
        if not (_is_number(n.tail_fraction) and 0 < n.tail_fraction <= 1):
            out.append(f"numerics.tail_fraction: must lie in (0, 1], got {n.tail_fraction!r}")
        if not (_is_number(n.gamma_delta) and n.gamma_delta > 0):
            out.append(f"numerics.gamma_delta: must be positive, got {n.gamma_delta!r}")
        if n.x0 is not None:
            try:
                x0 = np.asarray(n.x0, dtype=float).reshape(-1)
                if d is not None and x0.size != d:
                    out.append(f"numerics.x0: expected {d} entries, got {x0.size}")
            except (TypeError, ValueError):
                out.append("numerics.x0: must be a list of numbers")
        out += self.integrate.integrand.problems("integrate.integrand", 1)
        if not (_is_int(self.ensemble.members) and self.ensemble.members >= MIN_MEMBERS):
            out.append(f"ensemble.members: must be an integer >= {MIN_MEMBERS}, got {self.ensemble.members!r}")
        o = self.outputs
        if not isinstance(o.dir, str) or not o.dir:
            out.append("outputs.dir: must be a nonempty string")
        if not isinstance(o.formats, list) or any(f not in FORMATS for f in o.formats):
            out.append(f"outputs.formats: must be a list drawn from {FORMATS}")
        if not isinstance(o.save_driver, bool):
            out.append("outputs.save_driver: must be true or false")
        return out

    # -- construction -------------------------------------------------------

    @property
    def params(self) -> YoungParams:
        return YoungParams(self.numerics.p, self.numerics.q)

    def span(self, extra: float = 0.0) -> float:
        """End time of the working grid."""
        n = self.numerics
        return n.t0 + max(n.horizon, extra)

    def grid(self, end: float) -> np.ndarray:
        return uniform_grid(0.0, end, self.numerics.per_unit)

    def fbm_spec(self, end: float, seed: int | None = None) -> FbmSpec:
        return FbmSpec(
            hurst=self.driver.hurst,
            dt=1.0 / self.numerics.per_unit,
            horizon=end,
            seed=self.seed if seed is None else seed,
            method=self.driver.method,
        )

    def build_driver(self, end: float) -> SampledPath:
        dr = self.driver
        if dr.kind == "fbm":
            return fbm_sample(self.fbm_spec(end))
        if dr.kind == "csv":
            from .io import read_path_csv

            path = read_path_csv(_resolve(dr.path, Path(self.base_dir)))
            if path.shape != (1, 1):
                raise DomainError("driver CSV must hold a scalar path")
            if path.start > 0 or path.end < end - 1e-9:
                raise DomainError(f"driver CSV spans [{path.start}, {path.end}], need [0, {end}]")
            return path
        t = self.grid(end)
        if dr.kind == "linear":
            return SampledPath(t, dr.slope * t)
        return SampledPath.zeros(t)

    def build_system(self, times: np.ndarray) -> LinearYDE:
        s = self.system
        base = Path(self.base_dir)
        A = s.A.build(times, s.dimension, base)
        C = s.C.build(times, s.dimension, base)
        cls = TriangularYDE if s.triangular else LinearYDE
        return cls(A, C, self.params)

    def build_integrand(self, times: np.ndarray) -> SampledPath:
        return self.integrate.integrand.build(times, 1, Path(self.base_dir))

    def x0(self) -> np.ndarray:
        d = self.system.dimension
        if self.numerics.x0 is None:
            return np.eye(d)[0]
        return np.asarray(self.numerics.x0, dtype=float).reshape(d)


class _Loader(yaml.SafeLoader):
    """SafeLoader that also reads exponent floats without a dot (e.g. 1e-12)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:[0-9][0-9_]*)(?:\.[0-9_]*)?[eE][-+]?[0-9]+$"),
    list("-+0123456789"),
)


def _resolve(path: str, base_dir: Path) -> Path:
    p = Path(path)
    return p if p.is_absolute() else base_dir / p


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and np.isfinite(x)


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _build(cls, data, where: str, problems: list):
    if not isinstance(data, dict):
        problems.append(f"{where or 'config'}: expected a mapping, got {type(data).__name__}")
        return None
    known = {f.name: f for f in fields(cls) if not f.metadata.get("internal")}
    kwargs = {}
    for key, val in data.items():
        loc = f"{where}.{key}" if where else str(key)
        if key not in known:
            problems.append(f"{loc}: unknown key")
            continue
        sub = _NESTED.get((cls, key))
        if sub is not None:
            built = _build(sub, val, loc, problems)
            if built is not None:
                kwargs[key] = built
        else:
            kwargs[key] = val
    return cls(**kwargs)


_NESTED = {
    (ExperimentConfig, "system"): SystemConfig,
    (ExperimentConfig, "driver"): DriverConfig,
    (ExperimentConfig, "numerics"): NumericsConfig,
    (ExperimentConfig, "integrate"): IntegrateConfig,
    (ExperimentConfig, "ensemble"): EnsembleConfig,
    (ExperimentConfig, "outputs"): OutputConfig,
    (SystemConfig, "A"): CoefficientSpec,
    (SystemConfig, "C"): CoefficientSpec,
    (IntegrateConfig, "integrand"): CoefficientSpec,
}
