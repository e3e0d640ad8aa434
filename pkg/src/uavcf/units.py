"""Unit conversions and physical constants shared by every module."""

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0
THERMAL_NOISE_DBM_PER_HZ = -174.0


def db2lin(x_db):
    """Power ratio in dB to linear scale."""
    return np.power(10.0, np.asarray(x_db, dtype=float) / 10.0)


def lin2db(x):
    """Linear power ratio to dB. Zero maps to -inf."""
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(x, dtype=float))


def dbm2watt(x_dbm):
    return db2lin(x_dbm) * 1e-3


def watt2dbm(x_w):
    return lin2db(x_w) + 30.0
