import math

import numpy as np
import pytest

from raqr import analytic as an
from raqr.link import LinkScenario
from raqr.pipeline import feature_fwhm

TWO_PI = 2 * math.pi


def test_feature_fwhm_lorentzian():
    x = np.linspace(-50, 50, 20001)
    y = 1 / (1 + (x / 3.0) ** 2)
    # Height is measured from the end-point baseline b: solve y = (1 + b)/2.
    b = y[0]
    expected = 2 * 3.0 * math.sqrt(2 / (1 + b) - 1)
    assert feature_fwhm(x, y) == pytest.approx(expected, rel=1e-6)
    assert feature_fwhm(x, -y) == pytest.approx(expected, rel=1e-6)  # dips too


def test_feature_fwhm_ignores_side_lobes():
    x = np.linspace(-50, 50, 20001)
    y = np.exp(-x**2 / 2) + 2 * np.exp(-(x - 20) ** 2 / 8)
    assert feature_fwhm(x, y) == pytest.approx(2 * math.sqrt(2 * math.log(2)), rel=1e-3)


def test_feature_fwhm_requires_feature():
    with pytest.raises(ValueError):
        feature_fwhm(np.arange(5.0), np.zeros(5))


def test_preset_rabi_frequencies(rx_4l, rx_5l):
    assert np.array(rx_4l.optical_rabi) / TWO_PI == pytest.approx([60.4e6, 6.28e6], rel=0.01)
    assert np.array(rx_5l.optical_rabi) / TWO_PI == pytest.approx([9.6e6, 24.0e6, 2.80e6], rel=0.01)
    assert rx_5l.omega_lo / TWO_PI == pytest.approx(554e3, rel=0.01)


def test_linewidth_budget_presets(rx_4l, rx_5l):
    c4, c5 = rx_4l.linewidth_components(), rx_5l.linewidth_components()
    assert c4.gamma_res / TWO_PI == pytest.approx(3.50e6, rel=0.01)
    assert c5.gamma_res / TWO_PI == pytest.approx(39e3, rel=0.02)
    assert an.eit_linewidth(c4) == rx_4l.gamma_eit()
    assert rx_4l.gamma_eit() / TWO_PI == pytest.approx(11.26e6, rel=0.01)
    assert rx_5l.gamma_eit() / TWO_PI == pytest.approx(1.96e6, rel=0.01)


def test_zero_temperature_removes_motion(rx_5l):
    cold = rx_5l.with_(temperature=0.0)
    assert cold.v_th == 0.0 and cold.transit_rate == 0.0
    assert cold.velocity_grid("analytic").degenerate


def test_backends_agree_at_weak_probe(rx_5l):
    weak = rx_5l.with_(probe_power=rx_5l.probe_power * 1e-6)
    a = weak.response("analytic", grid=weak.velocity_grid("exact", 601))
    e = weak.response("exact", grid=weak.velocity_grid("exact", 601))
    assert e.rho21 == pytest.approx(a.rho21, rel=2e-3)
    assert e.chi_prime == pytest.approx(a.chi_prime, rel=2e-3)


def test_link_clamp_flattens(rx_5l):
    resp = rx_5l.response("analytic")
    snr = []
    for p in (1e-2, 1e0):
        sc = LinkScenario(p, 10.0, 10.0, 6.94e9, 1e5, 1e5)
        r = rx_5l.link(sc, resp)
        assert r.regime != "linear"
        snr.append(r.snr)
    assert snr[0] == pytest.approx(snr[1], rel=1e-12)
    lin = rx_5l.link(LinkScenario(1e-12, 10.0, 10.0, 6.94e9, 1e5, 1e5), resp)
    assert lin.regime == "linear"
    unclamped = rx_5l.link(LinkScenario(1e0, 10.0, 10.0, 6.94e9, 1e5, 1e5), resp, clamp=False)
    assert unclamped.snr > snr[1]


def test_spectrum_transmission_range(rx_5l):
    tr = rx_5l.spectrum(np.linspace(-2e6, 2e6, 9))
    assert tr.shape == (9,)
    assert np.all((tr > 0) & (tr <= 1))
    assert tr == pytest.approx(tr[::-1], rel=1e-9)
    # The resonant RF LO splits the transparency window into two peaks.
    assert tr[4] < tr[3] and tr[3] < tr[2]
