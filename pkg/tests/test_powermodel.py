import numpy as np
import pytest
from hypothesis import given, strategies as st

from uavcf.access import PowerAllocation
from uavcf.fronthaul import FronthaulConfig, SplitOption
from uavcf.powermodel import (BatteryParams, CapacityExceededError, PowerModelParams,
                              per_uav_static_power, processing_gops, processing_power,
                              service_time, total_power)

P = PowerModelParams()
O8, O72 = SplitOption.OPTION8, SplitOption.OPTION72
# 20.8 + 74 * (4.9152 + 10.096582633053222) / 180
P_PROC = 26.971510638032992


def test_gops():
    load = processing_gops(FronthaulConfig())
    assert load.filtering_gops == pytest.approx(4.9152, abs=1e-12)
    assert load.dft_gops == pytest.approx(10.096582633053222, abs=1e-12)
    assert load.dft_gops == pytest.approx(10.0965, abs=1e-4)
    assert processing_gops(FronthaulConfig(n_access_antennas=0)).total_gops == 0.0
    with pytest.raises(ValueError):
        processing_gops(FronthaulConfig(n_dft=1536, n_used=1200))


def test_processing_power():
    gops = processing_gops(FronthaulConfig()).total_gops
    assert processing_power(P, gops) == pytest.approx(P_PROC, abs=1e-12)
    assert processing_power(P, gops) == pytest.approx(26.972, abs=1e-3)
    assert processing_power(P, 0.0) == 20.8
    assert processing_power(P, 180.0) == pytest.approx(20.8 + 74.0)
    with pytest.raises(CapacityExceededError):
        processing_power(P, 180.1)


def test_total_power_examples():
    assert total_power(PowerAllocation.zeros(2, 3), O72, np.ones(3), P).total == 0.0
    alloc = PowerAllocation(np.zeros((1, 2)), np.array([1, 0]))
    assert total_power(alloc, O8, np.array([0.5, 3.0]), P).total == pytest.approx(64.9)


def _random_alloc(rng, K, L):
    alpha = rng.integers(0, 2, L)
    rho = rng.uniform(0, 0.5, (K, L)) * alpha
    return PowerAllocation(rho, alpha)


def test_split_difference(rng):
    for _ in range(20):
        alloc = _random_alloc(rng, 3, 5)
        pf8, pf72 = rng.uniform(0, 2, 5), rng.uniform(0, 1, 5)
        d = total_power(alloc, O72, pf72, P).total - total_power(alloc, O8, pf8, P).total
        ref = float(alloc.alpha @ (P_PROC + pf72 - pf8))
        assert d == pytest.approx(ref, abs=1e-9)


@given(st.integers(0, 2 ** 31 - 1), st.sampled_from([O8, O72]), st.booleans())
def test_breakdown_and_permutation(seed, split, include_fh):
    rng = np.random.default_rng(seed)
    params = PowerModelParams(include_fronthaul=include_fh)
    alloc = _random_alloc(rng, 3, 6)
    pf = rng.uniform(0, 2, 6)
    bd = total_power(alloc, split, pf, params)
    terms = [bd.processing, bd.fronthaul, bd.amplifier_static, bd.transmit]
    assert all(t >= 0 for t in terms)
    assert bd.total == sum(terms)
    assert dict(bd.rows())["total"] == bd.total
    if split is O8:
        assert bd.processing == 0.0
    perm = rng.permutation(6)
    shuffled = PowerAllocation(alloc.rho[:, perm], alloc.alpha[perm])
    assert total_power(shuffled, split, pf[perm], params).total == pytest.approx(bd.total,
                                                                                 rel=1e-12)


def test_static_power():
    pf = np.array([0.1, 0.2])
    np.testing.assert_allclose(per_uav_static_power(O8, pf, P, FronthaulConfig()), 64.4 + pf)
    np.testing.assert_allclose(per_uav_static_power(O72, pf, P, FronthaulConfig()),
                               64.4 + pf + P_PROC)


def test_service_time():
    assert service_time(50.0, BatteryParams(0.5, 200.0, 50.0)) == pytest.approx(60.0)
    b = BatteryParams(1.0, 200.0, 100.0)
    # halving mech + comm doubles the time
    assert service_time(30.0, BatteryParams(1.0, 200.0, 60.0)) == pytest.approx(
        2 * service_time(60.0, BatteryParams(1.0, 200.0, 120.0)))
    with pytest.raises(ValueError):
        service_time(-1.0, b)


def test_service_time_split_ordering():
    bat = BatteryParams()
    p8 = 64.4 + 0.5
    p72 = 64.4 + 0.05 + P_PROC
    t8, t72 = service_time(p8, bat), service_time(p72, bat)
    # 320 Wh over (150 + P) W
    assert t8 == pytest.approx(60 * 320 / 214.9, rel=1e-12)
    assert t8 > t72
    assert 1.02 <= t8 / t72 <= 1.20
