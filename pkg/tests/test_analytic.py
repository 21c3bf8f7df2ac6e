import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import erf

from raqr import analytic as an
from raqr.pipeline import feature_fwhm
from raqr.thermal import QuadratureWarning, VelocityGrid, thermal_velocity

TWO_PI = 2 * math.pi
WEAK = TWO_PI * 1e3  # probe Rabi frequency safely inside the weak-probe regime


def tridiagonal_oracle(rabi, cumulative, rates):
    """Weak-probe coherences from the dense linear system.

    Unknowns ``rho_21 .. rho_N1``; row ``n`` reads
    ``(i Delta_n - Gamma_n1) rho_n1 + (i Omega_{n-1}/2) rho_{n-1,1}
    + (i Omega_n/2) rho_{n+1,1} = 0`` with the ground-state population
    (``rho_11 = 1``) feeding row 2 through the probe.
    """
    m = len(cumulative)
    A = np.zeros((m, m), dtype=complex)
    b = np.zeros(m, dtype=complex)
    for i in range(m):
        A[i, i] = 1j * cumulative[i] - rates[i]
        if i + 1 < m:
            A[i, i + 1] = A[i + 1, i] = 0.5j * rabi[i + 1]
    b[0] = -0.5j * rabi[0]
    return np.linalg.solve(A, b)


def scheme_strategy(n_couplings):
    freq = st.floats(1e3, 3e7).map(lambda f: TWO_PI * f)
    det = st.floats(-5e7, 5e7).map(lambda f: TWO_PI * f)
    rate = st.floats(1e2, 1e7).map(lambda f: TWO_PI * f)
    return st.builds(
        lambda r, d, g: an.LadderScheme(tuple(r), tuple(d), tuple(g)),
        st.lists(freq, min_size=n_couplings, max_size=n_couplings),
        st.lists(det, min_size=n_couplings, max_size=n_couplings),
        st.lists(rate, min_size=n_couplings, max_size=n_couplings),
    )


any_scheme = st.one_of(scheme_strategy(3), scheme_strategy(4))


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


def test_scheme_validation():
    with pytest.raises(ValueError):
        an.LadderScheme((1.0, 1.0), (0.0, 0.0), (1.0, 1.0))
    with pytest.raises(ValueError):
        an.LadderScheme((1.0, 1.0, 1.0), (0.0, 0.0, 0.0), (1.0, 0.0, 1.0))
    with pytest.raises(ValueError):
        an.LadderScheme((1.0, -1.0, 1.0), (0.0, 0.0, 0.0), (1.0, 1.0, 1.0))
    with pytest.raises(ValueError):
        an.LadderScheme((1.0, 1.0, 1.0), (0.0, 0.0), (1.0, 1.0, 1.0))


def test_cumulative_detunings_are_prefix_sums():
    s = an.LadderScheme((1.0,) * 4, (1.0, 2.0, -5.0, 0.5), (1.0,) * 4)
    assert s.cumulative_detunings == pytest.approx([1.0, 3.0, -2.0, -1.5])


def test_geometry_and_context_validation():
    with pytest.raises(ValueError):
        an.BeamGeometry((852e-9,), (1,), 1.0)
    with pytest.raises(ValueError):
        an.BeamGeometry((852e-9, 510e-9), (1, 2), 1.0)
    with pytest.raises(ValueError):
        an.SusceptibilityContext(0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        an.LinewidthComponents(gamma_res=-1.0)


# ---------------------------------------------------------------------------
# Coherences
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("n_couplings", [3, 4])
def test_two_level_limit(n_couplings):
    g21 = TWO_PI * 3e6
    rabi = (WEAK,) + (0.0,) * (n_couplings - 1)
    s = an.LadderScheme(rabi, (0.0,) * n_couplings, (g21,) + (TWO_PI * 1e3,) * (n_couplings - 1))
    rho = an.coherence_4l(s) if n_couplings == 3 else an.coherence_5l(s)
    assert abs(rho) == pytest.approx(WEAK / (2 * g21), rel=1e-14)
    assert rho.imag > 0  # resonant absorption


def test_rf_off_truncates_4l():
    s = an.LadderScheme((WEAK, TWO_PI * 5e6, 0.0), (TWO_PI * 1e6, TWO_PI * -2e6, TWO_PI * 3e5),
                        (TWO_PI * 2.6e6, TWO_PI * 5e4, TWO_PI * 5e4))
    g2, g3 = s.coherence_rates[:2]
    d2, d3 = s.cumulative_detunings[:2]
    f3 = 1j * d3 - g3
    f2 = 1j * d2 - g2 + s.rabi[1] ** 2 / (4 * f3)
    assert an.coherence_4l(s) == pytest.approx(-(0.5j * WEAK) / f2, rel=1e-14)


def test_rf_off_truncates_5l():
    s5 = an.LadderScheme((WEAK, TWO_PI * 10e6, TWO_PI * 3e6, 0.0), (0.1, 0.2, 0.3, 7.0),
                         (TWO_PI * 2.3e6, TWO_PI * 0.5e6, TWO_PI * 5e4, TWO_PI * 5e4))
    s4 = an.LadderScheme(s5.rabi[:3], s5.detunings[:3], s5.coherence_rates[:3])
    assert an.coherence_5l(s5) == pytest.approx(an.coherence_4l(s4), rel=1e-14)


def test_architecture_guards():
    s4 = an.LadderScheme((WEAK, 1.0, 1.0), (0.0,) * 3, (1.0,) * 3)
    s5 = an.LadderScheme((WEAK, 1.0, 1.0, 1.0), (0.0,) * 4, (1.0,) * 4)
    with pytest.raises(ValueError):
        an.coherence_5l(s4)
    with pytest.raises(ValueError):
        an.coherence_4l(s5)
    with pytest.raises(ValueError):
        an.transconductance_4l(s5, an.SusceptibilityContext(1.0, 1.0, 1.0), 1.0)
    with pytest.raises(ValueError):
        an.transconductance_5l(s4, an.SusceptibilityContext(1.0, 1.0, 1.0), 1.0)


@pytest.mark.parametrize("preset", ["rx_4l", "rx_5l"])
def test_preset_resonance_matches_linear_system(preset, request):
    rx = request.getfixturevalue(preset)
    s = rx.scheme(omega_p=WEAK)
    oracle = tridiagonal_oracle(s.rabi, s.cumulative_detunings, s.coherence_rates)[0]
    assert an.coherence(s) == pytest.approx(oracle, rel=1e-12)


@given(any_scheme)
def test_continued_fraction_matches_linear_system(s):
    oracle = tridiagonal_oracle(s.rabi, s.cumulative_detunings, s.coherence_rates)[0]
    assert abs(an.coherence(s) - oracle) <= 1e-9 * abs(oracle)


@given(scheme_strategy(3), st.floats(0.0, 1e7))
def test_5l_embeds_4l(s4, extra_rate):
    # 4L ladder (p, c, RF) re-expressed as a 5L ladder (p, d=c, c=RF, RF=0).
    g5 = TWO_PI * 1e3 + extra_rate
    s5 = an.LadderScheme(s4.rabi + (0.0,), s4.detunings + (0.0,), s4.coherence_rates + (g5,))
    assert an.coherence_5l(s5) == pytest.approx(an.coherence_4l(s4), rel=1e-14)
    s4_off = s4.with_rf(0.0)
    s5_off = an.LadderScheme(s4_off.rabi + (0.0,), s4_off.detunings + (0.0,), s4_off.coherence_rates + (g5,))
    assert an.coherence_5l(s5_off) == pytest.approx(an.coherence_4l(s4_off), rel=1e-14)


@given(any_scheme, st.floats(0.01, 100.0))
def test_probe_linearity(s, factor):
    a = an.coherence(s) / s.rabi[0]
    b = an.coherence(s.with_probe(s.rabi[0] * factor)) / (s.rabi[0] * factor)
    assert b == pytest.approx(a, rel=1e-12)


@given(any_scheme)
def test_weak_probe_bounded(s):
    # With the probe well below every decay rate the coherence stays physical.
    s = s.with_probe(1e-3 * min(s.coherence_rates))
    assert abs(an.coherence(s)) <= 1


def test_array_detunings_broadcast():
    det = TWO_PI * np.linspace(-5e6, 5e6, 11)
    s = an.LadderScheme((WEAK, TWO_PI * 5e6, TWO_PI * 1e6), (det, 0.0, 0.0), (TWO_PI * 2.6e6, 1e5, 1e5))
    rho = an.coherence(s)
    assert rho.shape == det.shape
    assert rho[3] == an.coherence(s.with_detunings((det[3], 0.0, 0.0)))


# ---------------------------------------------------------------------------
# Susceptibility
# ---------------------------------------------------------------------------


def test_susceptibility_linear_and_zero(rx_5l):
    ctx = rx_5l.context
    assert an.susceptibility(0.0, ctx) == 0.0
    rho = 1e-4 + 3e-4j
    assert an.susceptibility(2 * rho, ctx) == 2 * an.susceptibility(rho, ctx)


def test_susceptibility_constant_by_hand(rx_5l):
    ctx = rx_5l.context
    rho = an.coherence(rx_5l.scheme())
    eps0, hbar, ea0 = 8.8541878188e-12, 1.054571817e-34, 8.478353625e-30
    K = 1.5e17 * (1.84 * ea0) ** 2 / (eps0 * hbar * ctx.probe_rabi)
    assert an.susceptibility(rho, ctx) == pytest.approx(K * rho, rel=1e-8)


# ---------------------------------------------------------------------------
# Residual Doppler width and averaging
# ---------------------------------------------------------------------------


def test_residual_doppler_presets(rx_4l, rx_5l):
    assert an.residual_doppler_linewidth(rx_4l.geometry) / TWO_PI == pytest.approx(3.50e6, rel=0.02)
    assert an.residual_doppler_linewidth(rx_5l.geometry) / TWO_PI == pytest.approx(39e3, rel=0.05)


def test_residual_doppler_perfect_cancellation():
    assert an.residual_doppler_linewidth(an.BeamGeometry((780e-9, 780e-9), (1, -1), 1e7)) == 0.0


@given(st.lists(st.floats(200e-9, 5e-6), min_size=2, max_size=3),
       st.lists(st.sampled_from([1, -1]), min_size=3, max_size=3), st.floats(1e3, 1e8))
def test_residual_doppler_reversal_invariant(lams, signs, g2):
    geom = an.BeamGeometry(tuple(lams), tuple(signs[: len(lams)]), g2)
    assert an.residual_doppler_linewidth(geom.reversed()) == an.residual_doppler_linewidth(geom)


def test_doppler_shift_slopes(rx_5l):
    k = rx_5l.geometry.wavevectors
    slopes = an.doppler_shifts(rx_5l.geometry, 4)
    assert slopes == pytest.approx([-k[0], -k[0] - k[1], -k.sum(), -k.sum()])
    with pytest.raises(ValueError):
        an.doppler_shifts(rx_5l.geometry, 3)


@pytest.mark.parametrize("count", [201, 301, 601])
def test_weight_sum_erf3(count):
    grid = VelocityGrid(190.5, count)
    assert grid.check_weights() == pytest.approx(erf(3), abs=1e-4)
    assert grid.velocities[count // 2] == 0.0
    assert np.allclose(grid.velocities, -grid.velocities[::-1])


def test_coarse_grid_warns():
    with pytest.warns(QuadratureWarning):
        VelocityGrid(190.5, 5).check_weights()


def test_grid_validation():
    with pytest.raises(ValueError):
        VelocityGrid(190.5, 300)
    with pytest.raises(ValueError):
        VelocityGrid(-1.0, 301)
    with pytest.raises(ValueError):
        thermal_velocity(-1.0, 1e-25)


def test_zero_temperature_limit(rx_4l):
    s = rx_4l.scheme(omega_p=WEAK)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        rho = an.doppler_averaged_coherence(s, rx_4l.geometry, 0.0, rx_4l.species.mass)
    assert rho == an.coherence(s)


def test_thermal_velocity_cs(rx_4l):
    assert thermal_velocity(290.0, rx_4l.species.mass) == pytest.approx(190.5, rel=2e-3)


@settings(max_examples=25, deadline=None)
@given(any_scheme, st.floats(0.0, 40e6))
def test_doppler_average_conjugate_symmetry(s, probe_det):
    # Flipping every detuning and every velocity conjugates -rho_21.
    s = s.with_probe(WEAK).with_detunings((TWO_PI * probe_det,) + (0.0,) * (len(s.rabi) - 1))
    flipped = s.with_detunings((-TWO_PI * probe_det,) + (0.0,) * (len(s.rabi) - 1))
    lams = (852e-9, 636e-9, 2245e-9)[: len(s.rabi) - 1]
    geom = an.BeamGeometry(lams, (1, -1, 1)[: len(lams)], TWO_PI * 5e6)
    grid = VelocityGrid(190.5, 301)
    a = an.doppler_averaged_coherence(s, geom, grid=grid)
    b = an.doppler_averaged_coherence(flipped, geom, grid=grid)
    assert b == pytest.approx(-np.conj(a), rel=1e-10, abs=1e-300)


def test_thermal_eit_window_widens(rx_4l):
    det = np.linspace(-200e6, 200e6, 801)
    widths = []
    for T in (290.0, 0.1):
        rx = rx_4l.with_(temperature=T)
        s = rx.scheme(detunings=(0.0, TWO_PI * det, 0.0), omega_p=WEAK)
        rho = an.doppler_averaged_coherence(s, rx.geometry, grid=rx.velocity_grid("analytic"))
        widths.append(feature_fwhm(det, rho.imag))
    assert widths[0] > widths[1]


def test_grid_convergence(rx_5l):
    s = rx_5l.scheme(omega_p=WEAK)
    g = rx_5l.velocity_grid("analytic")
    a = an.doppler_averaged_coherence(s, rx_5l.geometry, grid=g)
    b = an.doppler_averaged_coherence(s, rx_5l.geometry, grid=VelocityGrid(g.v_th, 2 * g.count - 1))
    assert abs(a - b) < 1e-4 * abs(b)


# ---------------------------------------------------------------------------
# Transconductance
# ---------------------------------------------------------------------------


def _fd(s, ctx, omega_lo):
    h = 1e-6 * omega_lo
    return (an.susceptibility(an.coherence(s.with_rf(omega_lo + h)), ctx)
            - an.susceptibility(an.coherence(s.with_rf(omega_lo - h)), ctx)) / (2 * h)


@pytest.mark.parametrize("preset", ["rx_4l", "rx_5l"])
def test_transconductance_zero_bias(preset, request):
    rx = request.getfixturevalue(preset)
    assert an.transconductance(rx.scheme(), rx.context, 0.0) == 0.0
    with pytest.raises(ValueError):
        an.transconductance(rx.scheme(), rx.context, -1.0)


@pytest.mark.parametrize("preset", ["rx_4l", "rx_5l"])
def test_transconductance_finite_difference(preset, request):
    rx = request.getfixturevalue(preset)
    s, ctx = rx.scheme(omega_p=WEAK), rx.context
    fn = an.transconductance_4l if rx.n_levels == 4 else an.transconductance_5l
    for omega_lo in rx.omega_lo * np.geomspace(0.1, 10, 10):
        chi_p = fn(s, ctx, omega_lo)
        assert abs(chi_p - _fd(s, ctx, omega_lo)) < 1e-6 * abs(chi_p)


@settings(max_examples=50)
@given(any_scheme, st.floats(1e4, 1e7))
def test_transconductance_gradient_property(s, f_lo):
    ctx = an.SusceptibilityContext(1e16, 2e-29, s.rabi[0])
    omega_lo = TWO_PI * f_lo
    chi_p = an.transconductance(s, ctx, omega_lo)
    fd = _fd(s, ctx, omega_lo)
    # Central-difference round-off is ~ eps |chi| / h with h = 1e-6 Omega_LO.
    chi = abs(an.susceptibility(an.coherence(s.with_rf(omega_lo)), ctx))
    assert abs(chi_p - fd) <= 1e-6 * abs(chi_p) + 1e-8 * chi / omega_lo


def test_transconductance_4l_closed_form():
    s = an.LadderScheme((WEAK, TWO_PI * 4e6, 0.0), (TWO_PI * 1e5, TWO_PI * -3e5, TWO_PI * 2e5),
                        (TWO_PI * 2.6e6, TWO_PI * 6e4, TWO_PI * 5.5e4))
    ctx = an.SusceptibilityContext(1e16, 2e-29, WEAK)
    omega_lo = TWO_PI * 5e5
    d, g = s.cumulative_detunings, s.coherence_rates
    f4 = 1j * d[2] - g[2]
    f3 = 1j * d[1] - g[1] + omega_lo**2 / (4 * f4)
    f2 = 1j * d[0] - g[0] + s.rabi[1] ** 2 / (4 * f3)
    # d rho/d Omega = (i Omega_p/2) f2^-2 * (-Omega_c^2 / 4 f3^2) * (Omega / 2 f4)
    expected = -ctx.K * (omega_lo / 2) * (0.5j * WEAK) * (s.rabi[1] ** 2 / 4) / (f2**2 * f3**2 * f4)
    assert an.transconductance_4l(s, ctx, omega_lo) == pytest.approx(expected, rel=1e-13)


def test_transconductance_5l_closed_form():
    s = an.LadderScheme((WEAK, TWO_PI * 8e6, TWO_PI * 2e6, 0.0), (1e5, -2e5, 3e5, -1e5),
                        (TWO_PI * 2.3e6, TWO_PI * 5e5, TWO_PI * 6e4, TWO_PI * 5.2e4))
    ctx = an.SusceptibilityContext(1e16, 2e-29, WEAK)
    omega_lo = TWO_PI * 5e5
    d, g = s.cumulative_detunings, s.coherence_rates
    f5 = 1j * d[3] - g[3]
    f4 = 1j * d[2] - g[2] + omega_lo**2 / (4 * f5)
    f3 = 1j * d[1] - g[1] + s.rabi[2] ** 2 / (4 * f4)
    f2 = 1j * d[0] - g[0] + s.rabi[1] ** 2 / (4 * f3)
    # Two nested fraction levels contribute two factors of -Omega^2 / 4 f^2.
    expected = (ctx.K * (omega_lo / 2) * (0.5j * WEAK) * (s.rabi[1] ** 2 / 4) * (s.rabi[2] ** 2 / 4)
                / (f2**2 * f3**2 * f4**2 * f5))
    assert an.transconductance_5l(s, ctx, omega_lo) == pytest.approx(expected, rel=1e-13)


def test_transconductance_residual_doppler_power_law():
    # Weak couplings: f_n ~ -Gamma_n1, so |chi'_s| ~ 1/(G21^2 (G31+Gr)^2 (G41+Gr)).
    g21, g31, g41 = TWO_PI * 2.6e6, TWO_PI * 2e3, TWO_PI * 1e3
    ctx = an.SusceptibilityContext(1e16, 2e-29, WEAK)
    g_res = TWO_PI * np.geomspace(1e4, 1e6, 12)
    mags, preds = [], []
    for gr in g_res:
        s = an.LadderScheme((WEAK, TWO_PI * 2e3, 0.0), (0.0,) * 3, (g21, g31 + gr, g41 + gr))
        mags.append(abs(an.transconductance_4l(s, ctx, TWO_PI * 1e3)))
        preds.append(1 / (g21**2 * (g31 + gr) ** 2 * (g41 + gr)))
    slope = np.polyfit(np.log(preds), np.log(mags), 1)[0]
    assert slope == pytest.approx(1.0, abs=0.1)


def test_5l_transconductance_exceeds_4l_thermal(rx_4l, rx_5l):
    chi4 = rx_4l.response("analytic").chi_prime
    chi5 = rx_5l.response("analytic").chi_prime
    assert abs(chi5) > abs(chi4)


def test_doppler_averaged_transconductance_matches_fd(rx_5l):
    s, ctx, geom = rx_5l.scheme(omega_p=WEAK), rx_5l.context, rx_5l.geometry
    grid = VelocityGrid(rx_5l.v_th, 1001)
    omega_lo = rx_5l.omega_lo
    h = 1e-6 * omega_lo
    chi = lambda o: ctx.K * an.doppler_averaged_coherence(s.with_rf(o), geom, grid=grid)
    fd = (chi(omega_lo + h) - chi(omega_lo - h)) / (2 * h)
    got = an.doppler_averaged_transconductance(s, geom, ctx, omega_lo, grid)
    assert abs(got - fd) < 1e-6 * abs(got)


# ---------------------------------------------------------------------------
# Linewidth budget
# ---------------------------------------------------------------------------


def test_bbr_rate(cs):
    species, _ = cs
    assert an.bbr_decoherence(0.0, 44.5, species) == 0.0
    assert an.bbr_decoherence(580.0, 44.5, species) == 2 * an.bbr_decoherence(290.0, 44.5, species)
    assert an.bbr_decoherence(290.0, 44.5, species) == pytest.approx(1.0e4, rel=0.05)
    # Direct constant evaluation.
    alpha, kB, hbar = 7.2973525693e-3, 1.380649e-23, 1.054571817e-34
    assert an.bbr_decoherence(290.0, 44.5, species) == pytest.approx(
        4 * alpha**3 * kB * 290 / (3 * 44.5**2 * hbar), rel=1e-9)
    with pytest.raises(ValueError):
        an.bbr_decoherence(290.0, 0.0, species)


@given(st.floats(1.0, 1e3), st.floats(5.0, 200.0))
def test_bbr_scaling(cs, T, n):
    species, _ = cs
    base = an.bbr_decoherence(T, n, species)
    assert an.bbr_decoherence(T, 2 * n, species) == pytest.approx(base / 4, rel=1e-14)


def test_linewidth_single_component():
    assert an.eit_linewidth(an.LinewidthComponents(gamma_res=123.0)) == 123.0


def test_linewidth_exact_sum():
    c = an.LinewidthComponents(1.0, 2.0, 4.0, 80.0, 10.0, 16.0, 32.0)
    assert an.eit_linewidth(c) == 1.0 + 3.0 + 8.0 + 16.0 + 32.0


def test_transit_term(rx_5l):
    assert rx_5l.transit_rate == pytest.approx(5.0e5, rel=0.02)


def test_eit_linewidth_ratio(rx_4l, rx_5l):
    # The residual Doppler width should make the two-colour window far wider.
    g4, g5 = rx_4l.gamma_eit() / TWO_PI, rx_5l.gamma_eit() / TWO_PI
    assert g4 / g5 > 10, f"Gamma_EIT/2pi: 2C4L {g4 / 1e6:.2f} MHz, 3C5L {g5 / 1e6:.2f} MHz, ratio {g4 / g5:.2f}"
