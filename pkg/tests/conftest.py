"""Shared fixtures: the default catalog plus a synthetic but realistic set
of back-to-back characterizations with wide validity ranges."""

import math

import pytest

from chanprobe.catalog import B2BCurve, default_catalog, q_from_ber

# Plausible required SNR (dB, in the signal bandwidth) per modulation at a
# 2e-2 FEC threshold; converted to a required GOSNR in the 12.5 GHz
# reference bandwidth per symbol rate.
SNR_REQUIRED_DB = {
    "QPSK": 6.5,
    "8QAM": 9.5,
    "16QAM": 12.5,
    "32QAM": 15.5,
    "64QAM": 18.5,
}


def make_curves(catalog, fec_threshold_ber=0.02):
    """Mildly concave monotone Q(OSNR) curves anchored so each config's
    threshold Q lands exactly at its required GOSNR."""
    q_thr = q_from_ber(fec_threshold_ber)
    curves = {}
    for config in catalog:
        req = SNR_REQUIRED_DB[config.modulation] + 10.0 * math.log10(
            config.symbol_rate_gbaud / 12.5
        )
        a, b = -0.004, 1.0
        c = q_thr - a * req * req - b * req
        curves[config.id] = B2BCurve(
            config_id=config.id,
            coeffs=(a, b, c),
            valid_range=(req - 26.0, req + 26.0),
            fec_threshold_ber=fec_threshold_ber,
            required_gosnr_db=req,
        )
    return curves


@pytest.fixture(scope="session")
def catalog():
    return default_catalog()


@pytest.fixture(scope="session")
def curves(catalog):
    return make_curves(catalog)
