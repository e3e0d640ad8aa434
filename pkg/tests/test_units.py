import numpy as np
from hypothesis import given, strategies as st

from uavcf.units import db2lin, dbm2watt, lin2db, watt2dbm


def test_known_conversions():
    assert db2lin(10.0) == 10.0
    assert db2lin(-30.0) == 1e-3
    assert np.isclose(dbm2watt(30.0), 1.0)
    assert np.isclose(watt2dbm(1e-3), 0.0)


@given(st.floats(-200, 200))
def test_db_round_trip(x):
    assert abs(lin2db(db2lin(x)) - x) <= 1e-12 * max(1.0, abs(x))
    assert abs(watt2dbm(dbm2watt(x)) - x) <= 1e-12 * max(1.0, abs(x))
