"""Scenario configuration: one flat ``key = value`` file per scenario.

Blank lines and ``#`` comments are ignored. Unset geometry keys (a, b, dx,
dt, T) fall back to the benchmark's default setup. Example::

    benchmark = kdv-soliton
    scheme = EC
    mode = adaptive
    r = 4
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .benchmarks import get_benchmark
from .grid import Grid1D, GridError
from .optimizer import OptimizerConfig

MODES = ("fixed", "adaptive", "averaged")
SCHEMES = {"KdV": ("EC", "MC", "MS", "NB"), "NLH": ("CS",)}
_ALIASES = {"MULTISYMPLECTIC": "MS", "NARROWBOX": "NB", "NARROW-BOX": "NB"}


class ConfigError(ValueError):
    pass


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


def _floats(s: str) -> tuple[float, ...]:
    s = s.strip()
    return tuple(float(p) for p in s.split(",") if p.strip()) if s else ()


def _int(s: str) -> int:
    v = float(s)
    if v != int(v):
        raise ConfigError(f"not an integer: {s!r}")
    return int(v)


@dataclass
class ScenarioConfig:
    benchmark: str = "kdv-soliton"
    scheme: str = "EC"
    mode: str = "fixed"
    name: str = ""
    a: Optional[float] = None
    b: Optional[float] = None
    dx: Optional[float] = None
    dt: Optional[float] = None
    T: Optional[float] = None
    r: int = 4
    chi: tuple[float, ...] = ()
    tol: float = 1e-8
    max_iter: int = 20
    initial_radius: float = 0.1
    use_trust_region: bool = True
    fd_step: Optional[float] = None
    exact_dtphi: bool = False
    sweep_lo: Optional[float] = None
    sweep_hi: Optional[float] = None
    sweep_step: Optional[float] = None
    sweep_refine: bool = False
    out: str = "out"
    pointwise: bool = True

    def __post_init__(self):
        bench = get_benchmark(self.benchmark)
        self.scheme = _ALIASES.get(self.scheme.upper(), self.scheme.upper())
        if self.scheme not in SCHEMES[bench.equation]:
            raise ConfigError(f"scheme {self.scheme} does not apply to {bench.equation}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        self.chi = tuple(float(c) for c in self.chi)

    # ------------------------------------------------------------ derived

    @property
    def scenario_id(self) -> str:
        return self.name or f"{self.benchmark}-{self.scheme}-{self.mode}"

    @property
    def equation(self) -> str:
        return get_benchmark(self.benchmark).equation

    def resolved(self, key: str) -> float:
        v = getattr(self, key)
        return getattr(get_benchmark(self.benchmark), key) if v is None else v

    def grid(self) -> Grid1D:
        return get_benchmark(self.benchmark).grid(self.resolved("dx"), self.resolved("a"), self.resolved("b"))

    @property
    def n_steps(self) -> int:
        T, dt = self.resolved("T"), self.resolved("dt")
        N = int(round(T / dt))
        if abs(N * dt - T) > 1e-9 * max(1.0, T):
            raise ConfigError(f"T={T} is not a whole number of steps dt={dt}")
        return N

    def optimizer(self) -> OptimizerConfig:
        return OptimizerConfig(
            tol=self.tol,
            max_iter=self.max_iter,
            r=self.r,
            initial_radius=self.initial_radius,
            use_trust_region=self.use_trust_region,
            fd_step=self.fd_step,
        )

    def validate(self) -> "ScenarioConfig":
        """Check the grid, the step count and (for optimizing modes) r."""
        grid = self.grid()
        self.n_steps  # noqa: B018 - raises on a fractional step count
        if self.mode != "fixed" and (grid.M + 1) % self.r:
            raise ConfigError(f"r={self.r} does not divide M+1={grid.M + 1}")
        return self

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})


_PARSERS = {
    "r": _int,
    "max_iter": _int,
    "chi": _floats,
    "use_trust_region": _bool,
    "exact_dtphi": _bool,
    "sweep_refine": _bool,
    "pointwise": _bool,
}
_STRINGS = {"benchmark", "scheme", "mode", "name", "out"}


def parse_config(text: str) -> ScenarioConfig:
    known = {f.name for f in dataclasses.fields(ScenarioConfig)}
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            if key in _STRINGS:
                values[key] = val
            elif key in _PARSERS:
                values[key] = _PARSERS[key](val)
            else:
                values[key] = None if val.lower() in ("", "none") else float(val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    try:
        return ScenarioConfig(**values)
    except (KeyError, GridError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def dump_config(cfg: ScenarioConfig) -> str:
    lines = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if v is None or (f.name == "name" and not v):
            continue
        if isinstance(v, tuple):
            v = ",".join(repr(c) for c in v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
