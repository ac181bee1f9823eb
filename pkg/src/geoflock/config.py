"""JSON run configuration, its validation, and the shipped presets."""

from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .dynamics import INTEGRATORS, InitialData, SimConfig, Thresholds
from .kernels import SummabilityError, kernel_from_dict
from .manifolds import Kind, ManifoldSpec


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ManifoldModel(_Strict):
    kind: Kind
    dimension: int = Field(2, ge=1)


class KernelModel(_Strict):
    family: str
    params: dict[str, Any] = Field(default_factory=dict)


class InitialModel(_Strict):
    positions: Optional[list[list[float]]] = None
    velocities: Optional[list[list[float]]] = None
    strip_half_width: float = Field(1.0, gt=0)
    speed_range: float = Field(1.0, ge=0)


class OutputModel(_Strict):
    stride: int = Field(10, ge=1)
    particles: bool = False


class ThresholdModel(_Strict):
    velocity_diameter: float = Field(1e-4, gt=0)
    alignment_residual: float = Field(1e-4, gt=0)
    second_component: float = Field(1e-4, gt=0)


class RunModel(_Strict):
    manifold: ManifoldModel
    kernel: KernelModel
    coupling: float = Field(1.0, gt=0)
    n_particles: int = Field(5, ge=1)
    dt: float = Field(1e-2, gt=0)
    horizon: float = Field(10.0, ge=0)
    truncation_eps: float = Field(1e-6, gt=0)
    integrator: Literal[INTEGRATORS] = "rk4"
    seed: int = 0
    lanes: int = Field(1, ge=1)
    initial: InitialModel = Field(default_factory=InitialModel)
    output: OutputModel = Field(default_factory=OutputModel)
    thresholds: ThresholdModel = Field(default_factory=ThresholdModel)


def _field_path(loc) -> str:
    return ".".join(str(part) for part in loc) or "<root>"


def _tuples(rows):
    return None if rows is None else tuple(tuple(r) for r in rows)


def build_config(data: dict) -> SimConfig:
    """Validate a configuration mapping and turn it into a ``SimConfig``."""
    try:
        model = RunModel.model_validate(data)
    except ValidationError as exc:
        lines = [f"{_field_path(e['loc'])}: {e['msg']}" for e in exc.errors()]
        raise ConfigError("invalid configuration\n  " + "\n  ".join(lines)) from None

    try:
        manifold = ManifoldSpec(model.manifold.kind, model.manifold.dimension)
    except ValueError as exc:
        raise ConfigError(f"manifold: {exc}") from None
    try:
        kernel = kernel_from_dict(model.kernel.model_dump())
    except ValueError as exc:
        raise ConfigError(f"kernel.params: {exc}") from None
    if model.horizon > 0 and model.dt >= model.horizon:
        raise ConfigError(f"dt: time step {model.dt} must be smaller than the horizon {model.horizon}")

    init = model.initial
    if (init.positions is None) != (init.velocities is None):
        raise ConfigError("initial: give both positions and velocities, or neither")
    try:
        return SimConfig(
            manifold=manifold,
            kernel=kernel,
            coupling=model.coupling,
            n_particles=model.n_particles,
            dt=model.dt,
            horizon=model.horizon,
            truncation_eps=model.truncation_eps,
            integrator=model.integrator,
            seed=model.seed,
            initial=InitialData(_tuples(init.positions), _tuples(init.velocities),
                                init.strip_half_width, init.speed_range),
            stride=model.output.stride,
            lanes=model.lanes,
            thresholds=Thresholds(**model.thresholds.model_dump()),
            record_particles=model.output.particles,
        )
    except SummabilityError as exc:
        raise ConfigError(f"kernel: {exc}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def parse_config(path) -> SimConfig:
    """Read a configuration file; a run manifest is accepted too."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if isinstance(data, dict) and "config" in data and "manifold" not in data:
        data = data["config"]
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    return build_config(data)


def config_to_dict(config: SimConfig) -> dict:
    """Inverse of ``build_config``: every input needed to rerun, defaults included."""
    init = config.initial
    return {
        "manifold": {"kind": config.manifold.kind.value, "dimension": config.manifold.dimension},
        "kernel": config.kernel.to_dict(),
        "coupling": config.coupling,
        "n_particles": config.n_particles,
        "dt": config.dt,
        "horizon": config.horizon,
        "truncation_eps": config.truncation_eps,
        "integrator": config.integrator,
        "seed": config.seed,
        "lanes": config.lanes,
        "initial": {
            "positions": None if init.positions is None else [list(r) for r in init.positions],
            "velocities": None if init.velocities is None else [list(r) for r in init.velocities],
            "strip_half_width": init.strip_half_width,
            "speed_range": init.speed_range,
        },
        "output": {"stride": config.stride, "particles": config.record_particles},
        "thresholds": {
            "velocity_diameter": config.thresholds.velocity_diameter,
            "alignment_residual": config.thresholds.alignment_residual,
            "second_component": config.thresholds.second_component,
        },
    }


_ONE_UP = {"positions": [[0.0, 0.0]], "velocities": [[0.0, 1.0]]}

PRESETS: dict[str, dict] = {
    "euclid-cs": {
        "manifold": {"kind": "euclidean", "dimension": 2},
        "kernel": {"family": "power_law", "params": {"alpha": 0.25}},
        "n_particles": 5,
        "horizon": 20.0,
    },
    # the 2-d power-law tail decays like R^-2, so a tight eps means a huge orbit ball
    "torus-align": {
        "manifold": {"kind": "flat_torus", "dimension": 2},
        "kernel": {"family": "power_law", "params": {"alpha": 2.0}},
        "n_particles": 5,
        "horizon": 50.0,
        "truncation_eps": 0.1,
        "output": {"stride": 50},
        "thresholds": {"alignment_residual": 1e-6},
    },
    "torus-reduction": {
        "manifold": {"kind": "flat_torus", "dimension": 1},
        "kernel": {"family": "compact_polynomial", "params": {"support": 0.45, "coefficients": [0.0, 1.0]}},
        "n_particles": 5,
        "horizon": 10.0,
    },
    "mobius-align": {
        "manifold": {"kind": "mobius_strip"},
        "kernel": {"family": "exponential", "params": {"rate": 1.0}},
        "n_particles": 5,
        "horizon": 25.0,
        "output": {"stride": 50},
    },
    "mobius-selfint": {
        "manifold": {"kind": "mobius_strip"},
        "kernel": {"family": "exponential", "params": {"rate": 1.0}},
        "n_particles": 1,
        "horizon": 20.0,
        "initial": _ONE_UP,
        "output": {"stride": 1, "particles": True},
    },
    "klein-align": {
        "manifold": {"kind": "klein_bottle"},
        "kernel": {"family": "exponential", "params": {"rate": 1.0}},
        "n_particles": 5,
        "horizon": 10.0,
        "output": {"stride": 50},
    },
    "klein-selfint": {
        "manifold": {"kind": "klein_bottle"},
        "kernel": {"family": "exponential", "params": {"rate": 1.0}},
        "n_particles": 1,
        "horizon": 10.0,
        "initial": _ONE_UP,
        "output": {"stride": 1, "particles": True},
    },
}


def preset(name: str) -> SimConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return build_config(copy.deepcopy(PRESETS[name]))
