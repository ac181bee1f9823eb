import json

import pytest

from geoflock.config import PRESETS, ConfigError, build_config, config_to_dict, parse_config, preset
from geoflock.dynamics import SimConfig
from geoflock.kernels import Exponential, PowerLaw
from geoflock.manifolds import Kind

MINIMAL = {"manifold": {"kind": "flat_torus"}, "kernel": {"family": "exponential"}}


def write(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data) if not isinstance(data, str) else data)
    return path


def test_minimal_config_gets_defaults(tmp_path):
    cfg = parse_config(write(tmp_path, MINIMAL))
    assert isinstance(cfg, SimConfig)
    assert cfg.manifold.kind is Kind.FLAT_TORUS and cfg.manifold.dimension == 2
    assert cfg.kernel == Exponential(1.0)
    assert (cfg.coupling, cfg.n_particles, cfg.dt, cfg.integrator) == (1.0, 5, 0.01, "rk4")
    assert (cfg.truncation_eps, cfg.stride, cfg.lanes, cfg.seed) == (1e-6, 10, 1, 0)
    assert cfg.thresholds.velocity_diameter == 1e-4


def test_divergent_power_law_rejected(tmp_path):
    data = dict(MINIMAL, kernel={"family": "power_law", "params": {"alpha": 0.5}})
    with pytest.raises(ConfigError, match=r"kernel: .*diverges.*alpha > d/2"):
        parse_config(write(tmp_path, data))


def test_mobius_dimension_three_rejected(tmp_path):
    data = dict(MINIMAL, manifold={"kind": "mobius_strip", "dimension": 3})
    with pytest.raises(ConfigError, match="^manifold: "):
        parse_config(write(tmp_path, data))


@pytest.mark.parametrize("field,value,path", [
    ("coupling", 0.0, "coupling"),
    ("coupling", -1.0, "coupling"),
    ("dt", 0.0, "dt"),
    ("integrator", "midpoint", "integrator"),
    ("n_particles", 0, "n_particles"),
    ("colour", "red", "colour"),
])
def test_field_errors_carry_their_path(tmp_path, field, value, path):
    with pytest.raises(ConfigError, match=path):
        parse_config(write(tmp_path, dict(MINIMAL, **{field: value})))


def test_nested_field_path(tmp_path):
    data = dict(MINIMAL, output={"stride": 0})
    with pytest.raises(ConfigError, match=r"output\.stride"):
        parse_config(write(tmp_path, data))


def test_other_rejections(tmp_path):
    with pytest.raises(ConfigError, match="not valid JSON"):
        parse_config(write(tmp_path, "{nope"))
    with pytest.raises(ConfigError, match="kernel.params"):
        parse_config(write(tmp_path, dict(MINIMAL, kernel={"family": "exponential", "params": {"rate": -1}})))
    with pytest.raises(ConfigError, match="horizon"):
        parse_config(write(tmp_path, dict(MINIMAL, dt=1.0, horizon=0.5)))
    with pytest.raises(ConfigError, match="initial"):
        parse_config(write(tmp_path, dict(MINIMAL, initial={"positions": [[0, 0]]})))
    with pytest.raises(ConfigError, match="shape"):
        build_config(dict(MINIMAL, n_particles=1, initial={"positions": [[0, 0, 0]], "velocities": [[1, 1, 1]]}))


def test_mobius_accepts_line_summable_kernel():
    cfg = build_config({"manifold": {"kind": "mobius_strip"}, "kernel": {"family": "power_law", "params": {"alpha": 0.8}}})
    assert cfg.kernel == PowerLaw(0.8)


def test_round_trip_through_dict_and_manifest(tmp_path):
    for name in PRESETS:
        cfg = preset(name)
        assert build_config(config_to_dict(cfg)) == cfg
    cfg = preset("mobius-selfint")
    manifest = {"version": "x", "config": config_to_dict(cfg)}
    assert parse_config(write(tmp_path, manifest, "manifest.json")) == cfg


def test_unknown_preset():
    with pytest.raises(ConfigError):
        preset("sphere-align")


def test_presets_cover_every_scenario_family():
    assert set(PRESETS) == {"euclid-cs", "torus-align", "torus-reduction", "mobius-align", "mobius-selfint",
                            "klein-align", "klein-selfint"}
    for name in PRESETS:
        assert preset(name).dt == 1e-2 and preset(name).integrator == "rk4"
