"""Run configuration: one YAML document per run, strictly validated.

Schema (all blocks optional except one parameter block)::

    physical:            # SI units: rad/s, W, K
      omega_c, omega_m, kappa, gamma, g: float
      omega_l | delta_c: float        # laser frequency or bare detuning
      T: float                        # bath temperature, default 0
      P: float                        # drive power (mean-field calibration)
      G: float                        # coupling override in rad/s
    reduced:             # units of omega_m
      delta_c_prime, kappa, gamma: float
      G | (G_re, G_im): float
      n_th: float | T + omega_m: float
      g, E: float
    modulation: {xi: float, nu: float}
    simulation:
      t_max_periods: 3000     # mechanical periods (or t_max in 1/omega_m)
      steps_per_period: 512
      mech_steps: 64
      dt: null
      output_stride: 1
      window_periods: 10
      ceiling_factor: 1.0e12
      horizon_lifetimes: 50
      coupling: constant      # or time-dependent
    task:
      sweeps: ["xi=0:3.5:30"]         # name=start:stop:count[:log]
      nus: [10, 20, 30, 50]           # rwa-compare
      method: auto                    # stability-map: auto|eigen|routh|floquet|probe
    output: {dir: out}
    parallel: 1

Exactly one of ``physical``/``reduced`` must be present; unknown keys are
errors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from ..dynamics import StepPolicy
from ..model import (ModulationParams, ParameterError, PhysicalParams, ReducedParams,
                     reduce, thermal_occupation)


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key path."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


PHYSICAL_KEYS = {"omega_c", "omega_m", "omega_l", "delta_c", "kappa", "gamma", "g", "T", "P", "G"}
REDUCED_KEYS = {"delta_c_prime", "G", "G_re", "G_im", "kappa", "gamma", "n_th", "T", "omega_m",
                "g", "E"}
MODULATION_KEYS = {"xi", "nu"}
SIMULATION_KEYS = {"t_max_periods", "t_max", "steps_per_period", "mech_steps", "dt",
                   "output_stride", "window_periods", "ceiling_factor", "horizon_lifetimes",
                   "coupling"}
TASK_KEYS = {"sweeps", "nus", "method"}
OUTPUT_KEYS = {"dir"}
TOP_KEYS = {"physical", "reduced", "modulation", "simulation", "task", "output", "parallel"}
METHODS = {"auto", "eigen", "routh", "floquet", "probe"}


def _number(path: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(path, "must be finite")
    return value


def _block(raw: dict, name: str, allowed: set) -> dict:
    block = raw.get(name) or {}
    if not isinstance(block, dict):
        raise ConfigError(name, "expected a mapping")
    for key in block:
        if key not in allowed:
            raise ConfigError(f"{name}.{key}", "unknown key")
    return dict(block)


@dataclass(frozen=True)
class SweepSpec:
    name: str
    start: float
    stop: float
    count: int
    scale: str = "linear"

    def __post_init__(self):
        if self.count < 2:
            raise ConfigError(f"sweep {self.name}", "count must be >= 2")
        if self.start == self.stop:
            raise ConfigError(f"sweep {self.name}", "start and stop must differ")
        if self.scale not in ("linear", "log"):
            raise ConfigError(f"sweep {self.name}", f"unknown scale {self.scale!r}")
        if self.scale == "log" and (self.start <= 0 or self.stop <= 0):
            raise ConfigError(f"sweep {self.name}", "log sweeps need positive bounds")

    @classmethod
    def parse(cls, text: str) -> "SweepSpec":
        """``name=start:stop:count[:log]``"""
        try:
            name, rng = text.split("=", 1)
            parts = rng.split(":")
            if len(parts) not in (3, 4):
                raise ValueError
            scale = parts[3] if len(parts) == 4 else "linear"
            if scale == "lin":
                scale = "linear"
            return cls(name.strip(), float(parts[0]), float(parts[1]), int(parts[2]), scale)
        except ConfigError:
            raise
        except ValueError:
            raise ConfigError("sweep", f"cannot parse {text!r}; expected name=start:stop:count[:log]")

    def values(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.start, self.stop, self.count)
        return np.linspace(self.start, self.stop, self.count)

    def __str__(self):
        tail = ":log" if self.scale == "log" else ""
        return f"{self.name}={self.start!r}:{self.stop!r}:{self.count}{tail}"


@dataclass(frozen=True)
class SimulationSettings:
    t_max: float = 3000 * 2 * math.pi
    step_policy: StepPolicy = field(default_factory=StepPolicy)
    output_stride: int = 1
    window_periods: int = 10
    ceiling_factor: float = 1e12
    horizon_lifetimes: float = 50.0
    coupling: str = "constant"

    def as_dict(self) -> dict:
        return {"t_max": self.t_max, "step_policy": self.step_policy.as_dict(),
                "output_stride": self.output_stride, "window_periods": self.window_periods,
                "ceiling_factor": self.ceiling_factor,
                "horizon_lifetimes": self.horizon_lifetimes, "coupling": self.coupling}


@dataclass(frozen=True)
class RunConfig:
    style: str  # "physical" or "reduced"
    params: dict
    modulation: dict
    simulation: SimulationSettings
    sweeps: tuple = ()
    nus: tuple = ()
    method: str = "auto"
    output_dir: str = "out"
    parallel: int = 1
    source: str | None = None

    # -- parameter resolution ---------------------------------------------

    def sweepable(self) -> set:
        keys = PHYSICAL_KEYS if self.style == "physical" else REDUCED_KEYS
        return keys | MODULATION_KEYS

    def with_values(self, **values) -> "RunConfig":
        """Copy with parameter or modulation fields overridden (sweeps)."""
        params = dict(self.params)
        modulation = dict(self.modulation)
        for name, value in values.items():
            if name not in self.sweepable():
                raise ConfigError(f"sweep {name}",
                                  f"not a sweepable {self.style} parameter "
                                  f"(choose from {sorted(self.sweepable())})")
            if name in MODULATION_KEYS:
                modulation[name] = float(value)
                continue
            params[name] = float(value)
            # keep alternative spellings mutually exclusive
            if name == "G":
                params.pop("G_re", None)
                params.pop("G_im", None)
            elif name in ("G_re", "G_im") and "G" in params:
                G = params.pop("G")
                params.setdefault("G_re", G)
            elif name == "delta_c":
                params.pop("omega_l", None)
            elif name == "omega_l":
                params.pop("delta_c", None)
            elif name == "n_th":
                params.pop("T", None)
            elif name == "T" and self.style == "reduced":
                params.pop("n_th", None)
        return _replace(self, params=params, modulation=modulation)

    def modulation_params(self) -> ModulationParams:
        try:
            return ModulationParams(xi=self.modulation.get("xi", 0.0),
                                    nu=self.modulation.get("nu", 30.0))
        except ParameterError as exc:
            raise ConfigError("modulation", str(exc)) from None

    def physical_params(self) -> PhysicalParams:
        p = self.params
        for key in ("omega_c", "omega_m", "kappa", "gamma", "g"):
            if key not in p:
                raise ConfigError(f"physical.{key}", "required")
        if ("omega_l" in p) == ("delta_c" in p):
            raise ConfigError("physical", "give exactly one of omega_l and delta_c")
        omega_l = p["omega_l"] if "omega_l" in p else p["omega_c"] - p["delta_c"]
        try:
            return PhysicalParams(omega_c=p["omega_c"], omega_m=p["omega_m"], omega_l=omega_l,
                                  kappa=p["kappa"], gamma=p["gamma"], g=p["g"],
                                  T=p.get("T", 0.0), P=p.get("P"))
        except ParameterError as exc:
            raise ConfigError("physical", str(exc)) from None

    def reduced_params(self) -> ReducedParams:
        """Resolve to the dimensionless parameter set (may run the mean-field
        calibration for physical configs)."""
        mod = self.modulation_params()
        p = self.params
        if self.style == "physical":
            G = p.get("G")
            phys = self.physical_params()
            if phys.P is None and G is None:
                raise ConfigError("physical", "need a drive power P or a coupling override G")
            try:
                return reduce(phys, mod, G_override=G)
            except ParameterError as exc:
                raise ConfigError("physical", str(exc)) from None
        for key in ("delta_c_prime", "kappa", "gamma"):
            if key not in p:
                raise ConfigError(f"reduced.{key}", "required")
        if "G" in p and ("G_re" in p or "G_im" in p):
            raise ConfigError("reduced.G", "give G or G_re/G_im, not both")
        if "G" not in p and "G_re" not in p:
            raise ConfigError("reduced.G", "required")
        G = complex(p["G"]) if "G" in p else complex(p.get("G_re", 0.0), p.get("G_im", 0.0))
        if "n_th" in p and "T" in p:
            raise ConfigError("reduced.n_th", "give n_th or T, not both")
        if "T" in p:
            if "omega_m" not in p:
                raise ConfigError("reduced.omega_m", "required to convert T to n_th")
            try:
                n_th = thermal_occupation(p["omega_m"], p["T"])
            except ParameterError as exc:
                raise ConfigError("reduced.T", str(exc)) from None
        else:
            n_th = p.get("n_th", 0.0)
        try:
            return ReducedParams(delta_c_prime=p["delta_c_prime"], G_re=G.real, G_im=G.imag,
                                 kappa=p["kappa"], gamma=p["gamma"], n_th=n_th, xi=mod.xi,
                                 nu=mod.nu, g=p.get("g", 0.0), E=p.get("E", 0.0))
        except ParameterError as exc:
            raise ConfigError("reduced", str(exc)) from None

    def as_dict(self) -> dict:
        return {
            self.style: dict(self.params),
            "modulation": dict(self.modulation),
            "simulation": self.simulation.as_dict(),
            "task": {"sweeps": [str(s) for s in self.sweeps], "nus": list(self.nus),
                     "method": self.method},
        }


def _replace(cfg: RunConfig, **changes) -> RunConfig:
    from dataclasses import replace

    return replace(cfg, **changes)


def parse_config(raw: dict, source: str | None = None) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "expected a mapping at the top level")
    for key in raw:
        if key not in TOP_KEYS:
            raise ConfigError(key, "unknown key")
    styles = [s for s in ("physical", "reduced") if raw.get(s) is not None]
    if len(styles) != 1:
        raise ConfigError("<root>", "exactly one of 'physical' or 'reduced' is required")
    style = styles[0]
    allowed = PHYSICAL_KEYS if style == "physical" else REDUCED_KEYS
    params = {k: _number(f"{style}.{k}", v) for k, v in _block(raw, style, allowed).items()}
    modulation = {k: _number(f"modulation.{k}", v)
                  for k, v in _block(raw, "modulation", MODULATION_KEYS).items()}

    sim = _block(raw, "simulation", SIMULATION_KEYS)
    if "t_max" in sim and "t_max_periods" in sim:
        raise ConfigError("simulation.t_max", "give t_max or t_max_periods, not both")
    if "t_max" in sim:
        t_max = _number("simulation.t_max", sim["t_max"])
    else:
        t_max = 2 * math.pi * _number("simulation.t_max_periods", sim.get("t_max_periods", 3000))
    if t_max <= 0:
        raise ConfigError("simulation.t_max", "must be positive")

    def integer(key, default, minimum):
        value = sim.get(key, default)
        if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
            raise ConfigError(f"simulation.{key}", f"expected an integer >= {minimum}")
        return value

    dt = sim.get("dt")
    if dt is not None:
        dt = _number("simulation.dt", dt)
    coupling = sim.get("coupling", "constant")
    if coupling not in ("constant", "time-dependent"):
        raise ConfigError("simulation.coupling", "expected 'constant' or 'time-dependent'")
    settings = SimulationSettings(
        t_max=t_max,
        step_policy=StepPolicy(integer("steps_per_period", 512, 1), integer("mech_steps", 64, 1), dt),
        output_stride=integer("output_stride", 1, 1),
        window_periods=integer("window_periods", 10, 1),
        ceiling_factor=_number("simulation.ceiling_factor", sim.get("ceiling_factor", 1e12)),
        horizon_lifetimes=_number("simulation.horizon_lifetimes", sim.get("horizon_lifetimes", 50)),
        coupling=coupling,
    )

    task = _block(raw, "task", TASK_KEYS)
    sweeps = task.get("sweeps") or []
    if not isinstance(sweeps, list):
        raise ConfigError("task.sweeps", "expected a list")
    parsed = []
    for item in sweeps:
        if isinstance(item, str):
            parsed.append(SweepSpec.parse(item))
        elif isinstance(item, dict):
            unknown = set(item) - {"name", "start", "stop", "count", "scale"}
            if unknown:
                raise ConfigError("task.sweeps", f"unknown keys {sorted(unknown)}")
            try:
                parsed.append(SweepSpec(str(item["name"]), float(item["start"]),
                                        float(item["stop"]), int(item["count"]),
                                        item.get("scale", "linear")))
            except KeyError as exc:
                raise ConfigError("task.sweeps", f"missing {exc}") from None
        else:
            raise ConfigError("task.sweeps", f"cannot interpret {item!r}")
    nus = tuple(_number("task.nus", v) for v in (task.get("nus") or []))
    method = task.get("method", "auto")
    if method not in METHODS:
        raise ConfigError("task.method", f"expected one of {sorted(METHODS)}")

    output = _block(raw, "output", OUTPUT_KEYS)
    parallel = raw.get("parallel", 1)
    if isinstance(parallel, bool) or not isinstance(parallel, int) or parallel < 1:
        raise ConfigError("parallel", "expected a positive integer")
    cfg = RunConfig(style=style, params=params, modulation=modulation, simulation=settings,
                    sweeps=tuple(parsed), nus=nus, method=method,
                    output_dir=str(output.get("dir", "out")), parallel=parallel, source=source)
    for spec in cfg.sweeps:
        cfg.with_values(**{spec.name: spec.start})  # validates the name
    cfg.modulation_params()
    return cfg


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(str(path), f"invalid YAML: {exc}") from None
    return parse_config(raw, source=str(path))
