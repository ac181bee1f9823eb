import csv
import dataclasses
import json
import math

import pytest

from geoflock.cli import main
from geoflock.config import build_config, preset
from geoflock.kernels import CompactPolynomial, Exponential, PowerLaw, tail_bound
from geoflock.manifolds import ManifoldSpec
from geoflock.oracle import oracle_phi, validate_kernel
from geoflock.runner import EXIT_CLAIMS, EXIT_NONFINITE, run

from oracles import brute_phi

SHORT = {
    "manifold": {"kind": "klein_bottle"},
    "kernel": {"family": "exponential", "params": {"rate": 1.0}},
    "n_particles": 3,
    "horizon": 0.2,
    "output": {"stride": 5},
}


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_oracle_phi_examples():
    T1 = ManifoldSpec.torus(1)
    assert oracle_phi(T1, Exponential(), [0.0], [0.0], 60) == pytest.approx(2.163953414, abs=1e-9)
    assert oracle_phi(T1, Exponential(), [0.0], [0.0], 60) == pytest.approx(
        brute_phi("flat_torus", 1, lambda r: math.exp(-r), [0.0], [0.0], 60), abs=1e-15)
    assert oracle_phi(ManifoldSpec.klein(), CompactPolynomial(0.3), [0.25, 0.25], [0.75, 0.75], 5) == 0.0
    m, k = ManifoldSpec.mobius(), PowerLaw(1.0)
    values = [oracle_phi(m, k, [0.1, 0.3], [0.7, -0.2], w) for w in (1, 2, 5, 20, 100)]
    assert values == sorted(values)
    with pytest.raises(ValueError):
        oracle_phi(m, k, [0, 0], [0, 0], 0)


def test_oracle_phi_klein_matches_hand_enumeration():
    k = Exponential(0.8)
    x, y = [0.2, 0.9], [0.6, 0.1]
    got = oracle_phi(ManifoldSpec.klein(), k, x, y, 12)
    assert got == pytest.approx(brute_phi("klein_bottle", 2, lambda r: math.exp(-0.8 * r), x, y, 12), rel=1e-14)


def test_validate_kernel_examples():
    r = validate_kernel(Exponential(), ManifoldSpec.torus(3))
    assert r["summable"] and r["rank"] == 3 and r["integral"] == 2.0
    assert r["lower_bound_weight"] == pytest.approx(math.exp(-math.sqrt(3) / 2), rel=1e-15)
    r = validate_kernel(PowerLaw(1.0), ManifoldSpec.mobius())
    assert r["summable"] and r["rank"] == 1 and r["integral"] == pytest.approx(math.pi / 2)
    r = validate_kernel(PowerLaw(0.5), ManifoldSpec.klein())
    assert not r["summable"] and r["integral"] is None and "alpha > d/2" in r["reason"]
    r = validate_kernel(PowerLaw(0.5), ManifoldSpec.euclidean(2))
    assert r["summable"] and r["lower_bound_weight"] is None


def test_run_writes_outputs(tmp_path):
    manifest, code = run(build_config(SHORT), tmp_path)
    assert code == 0
    rows = read_csv(tmp_path / "series.csv")
    assert rows[0] == ["t", "energy", "dissipation", "velocity_diameter", "max_abs_v2", "momentum_1", "momentum_2",
                       "max_alignment_residual", "strip_bound_violated"]
    assert [float(r[0]) for r in rows[1:]] == pytest.approx([0.0, 0.05, 0.1, 0.15, 0.2])
    on_disk = json.loads((tmp_path / "manifest.json").read_text())
    assert on_disk["config"]["seed"] == 0
    assert on_disk["final_record"]["time"] == pytest.approx(0.2)
    assert set(on_disk["claims"]["claims"]) == {"alignment_residual_vanishes", "velocity_alignment",
                                                "second_component_vanishes"}
    assert not (tmp_path / "particles.jsonl").exists()


def test_zero_horizon_run_has_one_row(tmp_path):
    manifest, code = run(build_config(dict(SHORT, horizon=0.0)), tmp_path)
    assert code == 0
    assert len(read_csv(tmp_path / "series.csv")) == 2
    assert manifest["claims"] is None


def test_series_is_byte_identical_across_runs(tmp_path):
    cfg = build_config(SHORT)
    run(cfg, tmp_path / "a")
    run(cfg, tmp_path / "b")
    assert (tmp_path / "a/series.csv").read_bytes() == (tmp_path / "b/series.csv").read_bytes()


def test_manifest_reruns_bitwise(tmp_path):
    first, _ = run(build_config(dict(SHORT, seed=9)), tmp_path / "a")
    assert main(["run", "--config", str(tmp_path / "a/manifest.json"), "--out", str(tmp_path / "b")]) == 0
    second = json.loads((tmp_path / "b/manifest.json").read_text())
    assert second["final_record"] == json.loads(json.dumps(first["final_record"]))
    assert (tmp_path / "a/series.csv").read_bytes() == (tmp_path / "b/series.csv").read_bytes()


def test_particles_file_for_single_particle(tmp_path):
    cfg = preset("mobius-selfint")
    run(dataclasses.replace(cfg, horizon=0.05), tmp_path)
    lines = [json.loads(s) for s in (tmp_path / "particles.jsonl").read_text().splitlines()]
    assert len(lines) == 6
    assert lines[0]["log_speed_rate"] == pytest.approx(-1.7018363, abs=1e-6)
    for line in lines:
        assert line["log_speed_derivative"] == pytest.approx(line["log_speed_rate"], rel=1e-12)


def test_assert_claims_exit_code(tmp_path):
    _, code = run(build_config(SHORT), tmp_path, assert_claims=True)
    assert code == EXIT_CLAIMS
    _, code = run(build_config(SHORT), tmp_path, assert_claims=False)
    assert code == 0


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nonfinite_exit_code(tmp_path):
    data = {
        "manifold": {"kind": "euclidean", "dimension": 2},
        "kernel": {"family": "exponential"},
        "coupling": 1e300, "n_particles": 2, "dt": 1.0, "horizon": 20.0, "integrator": "euler",
        "initial": {"positions": [[0, 0], [0.1, 0]], "velocities": [[1, 0], [-1, 0]]},
    }
    path = tmp_path / "blowup.json"
    path.write_text(json.dumps(data))
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "out")]) == EXIT_NONFINITE
    assert "error" in json.loads((tmp_path / "out/manifest.json").read_text())


def test_cli_commands(tmp_path, capsys):
    assert main(["presets"]) == 0
    assert "torus-align" in capsys.readouterr().out
    assert main(["presets", "klein-selfint"]) == 0
    assert json.loads(capsys.readouterr().out)["n_particles"] == 1
    assert main(["validate-kernel", "--manifold", "flat_torus", "--dimension", "3"]) == 0
    out = capsys.readouterr().out
    assert "summable   yes" in out and "integral   2" in out
    assert main(["validate-kernel", "--manifold", "klein_bottle", "--family", "power_law", "--param", "alpha=0.5",
                 "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["summable"] is False
    assert main(["oracle-phi", "--x", "0", "--y", "0", "--window", "60"]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(2.163953414, abs=1e-9)
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(SHORT))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"), "--lanes", "2"]) == 0
    assert "wrote" in capsys.readouterr().out


def test_cli_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"manifold": {"kind": "flat_torus"}, "kernel": {"family": "power_law",
                                                                              "params": {"alpha": 0.5}}}))
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert "diverges" in capsys.readouterr().err
    assert main(["run", "--out", str(tmp_path / "o")]) == 1
    assert main(["run", "--preset", "nope", "--out", str(tmp_path / "o")]) == 1


def test_oracle_tail_is_bounded_by_tail_bound():
    # terms left outside the oracle's window all have translation norm > window
    m, k = ManifoldSpec.torus(1), Exponential()
    inner = oracle_phi(m, k, [0.3], [0.8], 5)
    outer = oracle_phi(m, k, [0.3], [0.8], 60)
    assert 0 < outer - inner <= tail_bound(m, k, 0.5, 5)
