"""Scalars tracked along a run and the end-of-run convergence report."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .dynamics import ParticleState, SimConfig, interaction
from .manifolds import Kind, reduce_points


@dataclass(frozen=True)
class DiagnosticsRecord:
    time: float
    energy: float
    dissipation: float
    velocity_diameter: float
    max_abs_v2: float
    momentum: tuple[float, ...]
    max_alignment_residual: float
    strip_bound_violated: bool

    def csv_row(self) -> list[str]:
        fmt = lambda x: format(x, ".17g")  # noqa: E731
        return (
            [fmt(self.time), fmt(self.energy), fmt(self.dissipation), fmt(self.velocity_diameter), fmt(self.max_abs_v2)]
            + [fmt(m) for m in self.momentum]
            + [fmt(self.max_alignment_residual), str(int(self.strip_bound_violated))]
        )

    def to_dict(self) -> dict:
        return asdict(self)


def csv_header(dimension: int) -> list[str]:
    return (
        ["t", "energy", "dissipation", "velocity_diameter", "max_abs_v2"]
        + [f"momentum_{j + 1}" for j in range(dimension)]
        + ["max_alignment_residual", "strip_bound_violated"]
    )


def _residual_matrices(inter):
    # per flip class: weights * |J^f v_k - v_i|^2
    return [inter.weights[f] * np.sum(diff**2, axis=-1) for f, diff in enumerate(inter.transported_differences())]


def alignment_residual(state: ParticleState, config: SimConfig, i: int, k: int, speed_bound: float | None = None) -> float:
    """Truncated ``sum_g phi(|x_i - g x_k|) |Dg v_k - v_i|^2``."""
    inter = interaction(state, config, speed_bound)
    return float(sum(m[i, k] for m in _residual_matrices(inter)))


def class_split_residuals(state: ParticleState, config: SimConfig, i: int, k: int,
                          speed_bound: float | None = None) -> tuple[float, float]:
    """The residual split into its non-flipping and flipping parts."""
    if config.manifold.kind not in (Kind.MOBIUS_STRIP, Kind.KLEIN_BOTTLE):
        raise ValueError(f"class split needs a Mobius strip or Klein bottle, got {config.manifold}")
    even, odd = _residual_matrices(interaction(state, config, speed_bound))
    return float(even[i, k]), float(odd[i, k])


def record(state: ParticleState, config: SimConfig, speed_bound: float | None = None) -> DiagnosticsRecord:
    inter = interaction(state, config, speed_bound)
    res = sum(_residual_matrices(inter))
    n, d = state.velocities.shape
    v = state.velocities
    diam = float(np.max(np.linalg.norm(v[:, None, :] - v[None, :, :], axis=-1)))
    strip = False
    if config.manifold.kind is Kind.MOBIUS_STRIP:
        reduced, _, _ = reduce_points(config.manifold, state.positions)
        strip = bool(np.any(np.abs(reduced[:, 1]) >= config.initial.strip_half_width))
    return DiagnosticsRecord(
        time=float(state.time),
        energy=0.5 * float(np.sum(v**2)),
        dissipation=-config.coupling / (2 * n) * float(np.sum(res)),
        velocity_diameter=diam,
        max_abs_v2=float(np.max(np.abs(v[:, 1]))) if d >= 2 else math.nan,
        momentum=tuple(float(c) for c in v.sum(axis=0)),
        max_alignment_residual=float(np.max(res)),
        strip_bound_violated=strip,
    )


@dataclass
class MetricTrend:
    final: float
    log_slope: float | None
    met: bool


@dataclass
class ProbeReport:
    metrics: dict[str, MetricTrend]
    claims: dict[str, bool]
    self_interaction: str | None

    def to_dict(self) -> dict:
        return {
            "metrics": {k: asdict(m) for k, m in self.metrics.items()},
            "claims": dict(self.claims),
            "self_interaction": self.self_interaction,
        }


def _log_slope(times, values) -> float | None:
    half = len(times) // 2
    t = np.asarray(times[half:], dtype=float)
    y = np.asarray(values[half:], dtype=float)
    ok = y > 0
    if ok.sum() < 2:
        return None
    return float(np.polyfit(t[ok], np.log(y[ok]), 1)[0])


def stationarity_probe(records: list[DiagnosticsRecord], config: SimConfig) -> ProbeReport:
    """Compare the end of a run with the long-time limits the model predicts."""
    if len(records) < 2:
        raise ValueError("stationarity probe needs at least two records")
    th = config.thresholds
    times = [r.time for r in records]
    wanted = {
        "max_alignment_residual": th.alignment_residual,
        "velocity_diameter": th.velocity_diameter,
    }
    flipping = config.manifold.kind in (Kind.MOBIUS_STRIP, Kind.KLEIN_BOTTLE)
    if flipping:
        wanted["max_abs_v2"] = th.second_component
    metrics = {}
    for name, limit in wanted.items():
        series = [getattr(r, name) for r in records]
        metrics[name] = MetricTrend(series[-1], _log_slope(times, series), bool(series[-1] < limit))

    claims = {
        "alignment_residual_vanishes": metrics["max_alignment_residual"].met,
        "velocity_alignment": metrics["velocity_diameter"].met,
    }
    if flipping:
        claims["second_component_vanishes"] = metrics["max_abs_v2"].met

    self_interaction = None
    if config.n_particles == 1:
        if all(r.dissipation == 0.0 for r in records):
            self_interaction = "no self-interaction effect"
        else:
            self_interaction = "self-interaction slows the particle"
    return ProbeReport(metrics, claims, self_interaction)
