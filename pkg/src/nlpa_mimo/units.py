"""dB/dBm conversions. Internal power unit is the milliwatt."""

import numpy as np


def dbm_to_mw(p_dbm):
    return np.power(10.0, np.divide(p_dbm, 10.0))


def mw_to_dbm(p_mw):
    return 10.0 * np.log10(p_mw)


def db_to_linear(x_db):
    return np.power(10.0, np.divide(x_db, 10.0))


def mw_to_w(p_mw):
    return np.multiply(p_mw, 1e-3)
