"""Run a configuration end to end and write its outputs."""

from __future__ import annotations

import contextlib
import csv
import json
import math
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import config_to_dict
from .diagnostics import csv_header, stationarity_probe
from .dynamics import (NonFiniteStateError, SimConfig, energy, initial_state, integrate, rhs,
                       self_interaction_log_speed_rate)
from .manifolds import flip_vector, reduce_points

EXIT_OK = 0
EXIT_CLAIMS = 2
EXIT_NONFINITE = 3


def _particle_line(state, config, speed_bound):
    reduced, flips, _ = reduce_points(config.manifold, state.positions)
    line = {
        "t": state.time,
        "positions": state.positions.tolist(),
        "velocities": state.velocities.tolist(),
        "reduced_positions": reduced.tolist(),
        "reduced_velocities": [flip_vector(v, int(f)).tolist() for v, f in zip(state.velocities, flips)],
    }
    if state.n == 1:
        v = state.velocities[0]
        speed2 = float(v @ v)
        if speed2 > 0:
            acc = rhs(state, config, speed_bound).velocity_rates[0]
            line["log_speed"] = 0.5 * math.log(speed2)
            line["log_speed_derivative"] = float(acc @ v) / speed2
            line["log_speed_rate"] = self_interaction_log_speed_rate(state, config, speed_bound)
        else:
            line["log_speed"] = line["log_speed_derivative"] = line["log_speed_rate"] = None
    return line


def run(config: SimConfig, out_dir, assert_claims: bool = False) -> tuple[dict, int]:
    """Integrate ``config`` and write ``series.csv``, ``manifest.json`` and maybe ``particles.jsonl``.

    Returns the manifest and the process exit code.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    series_path = out / "series.csv"
    particles_path = out / "particles.jsonl"
    manifest_path = out / "manifest.json"
    start = initial_state(config)
    speed_bound = math.sqrt(2.0 * energy(start))

    outputs = {"series": str(series_path)}
    if config.record_particles:
        outputs["particles"] = str(particles_path)

    t0 = time.perf_counter()
    error = None
    with open(series_path, "w", newline="") as fh, \
            (open(particles_path, "w") if config.record_particles else contextlib.nullcontext()) as pf:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(csv_header(config.manifold.dimension))

        def observe(state, rec):
            writer.writerow(rec.csv_row())
            if config.record_particles:
                pf.write(json.dumps(_particle_line(state, config, speed_bound)) + "\n")

        try:
            traj = integrate(config, observers=[observe], state=start)
        except NonFiniteStateError as exc:
            error = str(exc)
    wall = time.perf_counter() - t0

    manifest = {
        "version": __version__,
        "config": config_to_dict(config),
        "wall_clock_seconds": wall,
        "outputs": outputs,
    }
    if error is not None:
        manifest["error"] = error
        manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
        return manifest, EXIT_NONFINITE

    manifest["final_record"] = traj.records[-1].to_dict()
    report = stationarity_probe(traj.records, config) if len(traj.records) >= 2 else None
    manifest["claims"] = None if report is None else report.to_dict()
    manifest_path.write_text(json.dumps(manifest, indent=2, default=_jsonable) + "\n")

    code = EXIT_OK
    if assert_claims and report is not None and not all(report.claims.values()):
        code = EXIT_CLAIMS
    return manifest, code


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")

