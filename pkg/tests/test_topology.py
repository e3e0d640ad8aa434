import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import DATA
from uavcf.topology import (ACCESS_ENV, FRONTHAUL_ENV, NetworkTopology, PathLossParams,
                            Position3D, TopologyConfig, elevation_angle, free_space_loss_db,
                            generate_topology, link_budget, los_probability, mean_path_loss_db)


def test_paper_layout():
    t = generate_topology(TopologyConfig(n_uavs=16, n_ues=8), seed=3)
    assert t.n_uavs == 16 and t.n_ues == 8
    assert all(u.z == 200.0 for u in t.uavs)
    assert all(u.z == 0.0 for u in t.ues)
    assert (t.cpu.x, t.cpu.y, t.cpu.z) == (500.0, 500.0, 50.0)
    xy = np.vstack([t.uav_array()[:, :2], t.ue_array()[:, :2]])
    assert np.all((xy >= 0) & (xy <= 1000))


def test_deterministic():
    cfg = TopologyConfig()
    assert generate_topology(cfg, 7) == generate_topology(cfg, 7)
    assert generate_topology(cfg, 7) != generate_topology(cfg, 8)


def test_golden_single_link():
    golden = NetworkTopology.load(DATA / "topology_L1_K1_seed0.json")
    assert generate_topology(TopologyConfig(n_uavs=1, n_ues=1), 0) == golden


def test_json_round_trip(tmp_path):
    t = generate_topology(TopologyConfig(n_uavs=3, n_ues=2), 1)
    t.save(tmp_path / "t.json")
    assert NetworkTopology.load(tmp_path / "t.json") == t


def test_position_rejects_negative_height():
    with pytest.raises(ValueError):
        Position3D(0, 0, -1)


def test_elevation_examples():
    assert elevation_angle(Position3D(0, 0, 0), Position3D(150, 0, 150)) == pytest.approx(45.0)
    assert elevation_angle(Position3D(3, 4, 0), Position3D(3, 4, 100)) == 90.0
    a, b = Position3D(0, 0, 0), Position3D(346.41, 0, 200)
    # arctan(200 / 346.41)
    assert elevation_angle(a, b) == pytest.approx(30.00001156757613, abs=1e-6)


def test_los_probability_examples():
    assert los_probability(4.8, FRONTHAUL_ENV) == pytest.approx(1 / 5.8, abs=1e-6)
    assert los_probability(90.0, ACCESS_ENV) == pytest.approx(0.999975, abs=1e-5)


@given(st.floats(0, 90), st.floats(0, 90), st.floats(0.5, 20), st.floats(0.01, 1))
def test_los_probability_monotone(a, b, eta1, eta2):
    p = PathLossParams(eta1, eta2)
    lo, hi = sorted((a, b))
    assert los_probability(lo, p) <= los_probability(hi, p)


def test_free_space_examples():
    # 20 log10(4 pi f d / c)
    assert free_space_loss_db(1000.0, 3.5e9) == pytest.approx(103.32914410888888, abs=1e-9)
    assert free_space_loss_db(250.0, 28e9) == pytest.approx(109.34974402216851, abs=1e-9)


@given(st.floats(1, 90), st.floats(0, 40))
def test_equal_excess_cancels(theta, excess):
    p = PathLossParams(9.61, 0.16, excess, excess)
    h = 100.0
    d = h / math.tan(math.radians(theta))
    a, b = Position3D(0, 0, 0), Position3D(d, 0, h)
    expected = free_space_loss_db(math.hypot(d, h), p.carrier_hz) + excess
    assert mean_path_loss_db(a, b, p) == pytest.approx(expected, abs=1e-9)


@given(st.floats(10, 2000), st.floats(10, 2000))
def test_path_loss_monotone_in_distance(d1, d2):
    lo, hi = sorted((d1, d2))
    assert free_space_loss_db(lo, 3.5e9) <= free_space_loss_db(hi, 3.5e9)


def test_link_budget_gain_matches_path_loss():
    a, b = Position3D(0, 0, 50), Position3D(300, 400, 200)
    lb = link_budget(a, b, FRONTHAUL_ENV)
    assert lb.gain == pytest.approx(10 ** (-mean_path_loss_db(a, b, FRONTHAUL_ENV) / 10))
    assert 0 < lb.p_los < 1


@pytest.mark.parametrize("kw", [{"n_uavs": 0}, {"n_ues": -2}, {"area_side_m": 0.0},
                                {"uav_height_m": -1.0}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        TopologyConfig(**kw)
