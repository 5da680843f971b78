import json
import math
from pathlib import Path

import pytest

import riccilab

ROOT = Path(__file__).resolve().parents[2]


def test_version():
    assert riccilab.__version__.count(".") == 2


def test_round_sphere_curvature_and_volume():
    g = riccilab.round_sphere(3, 1.0, 256)
    assert len(g) == 256 and g.topology == "sphere"
    assert max(abs(r - 6.0) for r in riccilab.curvature(g)["R"]) < 1e-3
    assert riccilab.volume(g) == pytest.approx(2 * math.pi**2, rel=1e-3)


def test_errors_map_to_python_exceptions():
    with pytest.raises(riccilab.ParameterError):
        riccilab.dumbbell(3, 1.0, 0.5, 128)
    assert issubclass(riccilab.ConfigError, riccilab.Error)


def test_flow_and_lambda():
    h = riccilab.run_flow(riccilab.round_sphere(3, 1.0, 64), t_end=0.1, store_every=10)
    assert h.status == "ok"
    t = h.times[-1]
    lam = riccilab.lambda_(h.snapshot(len(h) - 1))
    assert lam["value"] == pytest.approx(6.0 / (1.0 - 4.0 * t), rel=1e-3)
    series = riccilab.monitor(h, "lambda")
    assert series["overall"] == "holds"


def test_history_round_trip(tmp_path):
    h = riccilab.run_flow(riccilab.dumbbell(3, 0.4, 1.0, 128), t_end=0.02, store_every=5)
    riccilab.save_history(h, tmp_path / "h")
    back = riccilab.load_history(tmp_path / "h")
    assert back.times == h.times
    assert back.snapshot(len(back) - 1).psi == h.snapshot(len(h) - 1).psi


def test_soliton_entropy():
    g = riccilab.round_sphere(3, 1.0, 128)
    assert riccilab.mu(g, 0.25)["value"] <= -0.2345 + 1e-3
    value, tau = riccilab.nu(g)
    assert tau == pytest.approx(0.25, rel=0.02)


def test_scenario(tmp_path):
    out = riccilab.run_scenario(ROOT / "scenarios" / "sphere-oracle.json", tmp_path / "out")
    assert out["verdict"] == "holds"
    report = json.loads(Path(out["report"]).read_text())
    assert "violated" not in json.dumps(report)
    with pytest.raises(riccilab.ConfigError):
        riccilab.run_scenario(tmp_path / "absent.json", tmp_path / "x")
