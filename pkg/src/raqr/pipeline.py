"""End-to-end glue: from a parameter preset to atomic response, baseband
gain, noise budget, SNR and instantaneous bandwidth.

Everything here composes the physics modules; no new physics lives in this
file except the choice of which levels and states feed which formula.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import analytic as an
from . import liouvillian as lv
from .atomdata import (
    AtomicParameterTable,
    QuantumDefectTable,
    Species,
    load_quantum_defects,
)
from .link import LinkScenario, raqr_received_power, raqr_snr
from .receiver import (
    Z0,
    DetectorChain,
    ProbeBeam,
    RfFields,
    VaporCell,
    baseband_transfer,
    field_from_beam_power,
    field_from_rabi,
    noise_budget,
    probe_output,
    rabi_from_field,
    saturation_check,
)
from .thermal import VelocityGrid, thermal_velocity

__all__ = [
    "Receiver",
    "AtomicResponse",
    "LinkResult",
    "BandwidthResult",
    "feature_fwhm",
]


@dataclass(frozen=True)
class AtomicResponse:
    """Ensemble-averaged atomic quantities at the LO bias."""

    rho21: complex
    chi: complex
    chi_prime: complex
    omega_lo: float
    K: float
    backend: str


@dataclass(frozen=True)
class LinkResult:
    """Receiver operating point for one transmit power."""

    snr: float
    signal_power: float
    beta: float
    noise_qpn: float
    noise_psn: float
    noise_itn: float
    gamma_eit: float
    omega_sig: float
    regime: str
    probe_power_out: float


@dataclass(frozen=True)
class BandwidthResult:
    tau: float
    bandwidth: float
    trace: lv.TransientTrace = field(repr=False)


@dataclass(frozen=True)
class Receiver:
    """A receiver built from a parameter preset.

    Parameters
    ----------
    table : AtomicParameterTable
    species, defects : optional
        Species constants and quantum defects; default to the shipped
        caesium data.
    chain : DetectorChain
        Photodetection chain (defaults: alpha = 0.8, G = 30 dB, P_l = 30 mW,
        T_PD = 290 K).
    lo_field : float, optional
        RF LO field (V/m); defaults to the preset value.
    probe_power : float, optional
        Overrides the preset probe power (W).
    temperature : float, optional
        Overrides the preset vapour temperature (K).
    dephase_all : bool
        Apply the residual dephasing to every level (alternative model).
    """

    table: AtomicParameterTable
    species: Species = None
    defects: QuantumDefectTable = None
    chain: DetectorChain = DetectorChain()
    lo_field: float = None
    probe_power: float = None
    temperature: float = None
    dephase_all: bool = False

    def __post_init__(self):
        if self.species is None or self.defects is None:
            sp, qd = load_quantum_defects()
            object.__setattr__(self, "species", self.species or sp)
            object.__setattr__(self, "defects", self.defects or qd)
        if self.lo_field is None:
            object.__setattr__(self, "lo_field", self.table.lo_field)
        if self.probe_power is None:
            object.__setattr__(self, "probe_power", self.table.probe.power)
        if self.temperature is None:
            object.__setattr__(self, "temperature", self.table.atom_temperature)

    def with_(self, **changes) -> "Receiver":
        return replace(self, **changes)

    # Atomic parameters ----------------------------------------------------
    @property
    def n_levels(self) -> int:
        return self.table.n_levels

    @property
    def v_th(self) -> float:
        return thermal_velocity(self.temperature, self.species.mass)

    @property
    def transit_rate(self) -> float:
        """``v_th / r_0`` (s^-1)."""
        return self.v_th / self.table.beam_radius

    @property
    def optical_rabi(self) -> tuple:
        """Optical Rabi frequencies ``(Omega_p, [Omega_d,] Omega_c)`` (rad/s)."""
        powers = [self.probe_power] + [l.power for l in self.table.lasers[1:]]
        return tuple(
            float(rabi_from_field(mu, field_from_beam_power(P, self.table.beam_radius)))
            for mu, P in zip(self.table.dipoles[:-1], powers)
        )

    @property
    def omega_lo(self) -> float:
        return float(rabi_from_field(self.table.rf_dipole, self.lo_field))

    @property
    def geometry(self) -> an.BeamGeometry:
        return an.BeamGeometry(self.table.wavelengths, self.table.directions, self.table.decay_rates[0])

    @property
    def dissipator(self) -> lv.DissipatorSpec:
        return lv.DissipatorSpec(
            self.table.decay_rates,
            self.table.dephasing,
            self.transit_rate,
            rydberg_levels=self.table.rydberg_levels,
            dephase_all=self.dephase_all,
        )

    def scheme(self, detunings=None, omega_rf=None, omega_p=None, extra_rydberg_rate: float = 0.0) -> an.LadderScheme:
        """Ladder scheme at the preset couplings.

        ``extra_rydberg_rate`` is added to the Rydberg coherence rates (used
        for synthetic linewidth sweeps).
        """
        rabi = list(self.optical_rabi) + [self.omega_lo if omega_rf is None else omega_rf]
        if omega_p is not None:
            rabi[0] = omega_p
        rates = list(self.dissipator.coherence_rates())
        for i in self.table.rydberg_levels:
            rates[i - 1] += extra_rydberg_rate
        det = tuple(detunings) if detunings is not None else (0.0,) * (self.n_levels - 1)
        return an.LadderScheme(tuple(rabi), det, tuple(rates))

    @property
    def context(self) -> an.SusceptibilityContext:
        return an.SusceptibilityContext(self.table.atom_density, self.table.dipoles[0], self.optical_rabi[0])

    def velocity_grid(self, backend: str = "exact", count: int | None = None) -> VelocityGrid:
        """Velocity grid for ``backend``.

        The exact backend uses the default 301 classes.  The analytic
        backend resolves the narrowest Doppler-shifted coherence in velocity
        space (the weak-probe integrand is far sharper than the saturated
        exact one).
        """
        if count is not None:
            return VelocityGrid(self.v_th, count)
        if backend == "exact" or self.v_th == 0:
            return VelocityGrid(self.v_th, 301)
        slopes = np.abs(an.doppler_shifts(self.geometry, self.n_levels - 1))
        rates = np.asarray(self.dissipator.coherence_rates())
        widths = [g / s for g, s in zip(rates, slopes) if s > 0]
        dv = min(widths) / 4.0
        n = int(math.ceil(6 * self.v_th / dv)) | 1
        return VelocityGrid(self.v_th, max(301, min(n, 200_001)))

    # Linewidth budget -----------------------------------------------------
    @property
    def sensing_state(self):
        return self.table.rf_states[0]

    def gamma_bbr(self, T_env: float = 290.0) -> float:
        st = self.sensing_state
        n_eff = st.n - self.defects.defect(st)
        return float(an.bbr_decoherence(T_env, n_eff, self.species))

    def linewidth_components(self, T_env: float = 290.0, omega_lo: float = None,
                             extra_rydberg_rate: float = 0.0) -> an.LinewidthComponents:
        omega_lo = self.omega_lo if omega_lo is None else omega_lo
        return an.LinewidthComponents(
            gamma_res=an.residual_doppler_linewidth(self.geometry) + extra_rydberg_rate,
            gamma_ryd_nat=self.table.decay_rates[self.n_levels - 3],
            gamma_bbr=self.gamma_bbr(T_env),
            omega_at=self.optical_rabi[-1] ** 2 + omega_lo**2,
            gamma2=self.table.decay_rates[0],
            transit=self.transit_rate,
            dephasing=self.table.dephasing,
        )

    def gamma_eit(self, T_env: float = 290.0, **kw) -> float:
        return an.eit_linewidth(self.linewidth_components(T_env, **kw))

    # Atomic response ------------------------------------------------------
    def response(self, backend: str = "analytic", grid: VelocityGrid | None = None, jobs: int = 1,
                 extra_rydberg_rate: float = 0.0, detunings=None) -> AtomicResponse:
        """Doppler-averaged ``chi`` and ``chi'_s`` at the LO bias.

        ``detunings`` (rad/s, one per coupling, entries may be arrays)
        defaults to all-resonant; with arrays the returned fields are arrays.
        """
        grid = grid or self.velocity_grid(backend)
        s = self.scheme(detunings=detunings, extra_rydberg_rate=extra_rydberg_rate)
        ctx = self.context
        if backend == "analytic":
            rho = an.doppler_averaged_coherence(s, self.geometry, grid=grid)
            drho = an.doppler_averaged_transconductance(s, self.geometry, ctx, self.omega_lo, grid) / ctx.K
        elif backend == "exact":
            if extra_rydberg_rate:
                raise ValueError("extra_rydberg_rate is only supported by the analytic backend")
            rho, drho = lv.doppler_average_exact(s, self.geometry, self.dissipator, grid, derivative=True, jobs=jobs)
        else:
            raise ValueError(f"unknown backend {backend!r}")
        rho, drho = np.asarray(rho)[()], np.asarray(drho)[()]
        return AtomicResponse(rho, ctx.K * rho, ctx.K * drho, self.omega_lo, ctx.K, backend)

    def spectrum(self, detuning_hz, backend: str = "exact", grid: VelocityGrid | None = None,
                 jobs: int = 1) -> np.ndarray:
        """Probe transmission ``P_1/P_0`` versus the detuning of the last
        optical (coupling) laser, in Hz."""
        det = [0.0] * (self.n_levels - 1)
        det[self.n_levels - 3] = 2 * np.pi * np.asarray(detuning_hz, dtype=float)
        grid = grid or self.velocity_grid(backend)
        s = self.scheme(detunings=det)
        if backend == "analytic":
            rho = an.doppler_averaged_coherence(s, self.geometry, grid=grid)
        elif backend == "exact":
            rho = lv.doppler_average_exact(s, self.geometry, self.dissipator, grid, jobs=jobs)
        else:
            raise ValueError(f"unknown backend {backend!r}")
        P1, _ = probe_output(self.context.K * np.asarray(rho), self.cell, self.probe)
        return np.asarray(P1) / self.probe_power

    # Readout chain --------------------------------------------------------
    @property
    def cell(self) -> VaporCell:
        return VaporCell(self.table.cell_length, self.table.atom_density, self.temperature)

    @property
    def probe(self) -> ProbeBeam:
        return ProbeBeam(self.probe_power, self.table.probe.wavelength, self.table.beam_radius)

    def link(self, scenario: LinkScenario, response: AtomicResponse, margin: float = 0.1,
             clamp: bool = True, extra_rydberg_rate: float = 0.0) -> LinkResult:
        """SNR at one transmit power (Rayleigh gain ``|h|^2 = 1``).

        With ``clamp`` the signal Rabi frequency is limited to the linear
        bound ``margin * min(Omega_LO, Gamma_EIT)``, which flattens the
        SNR once the receiver saturates.
        """
        S = float(scenario.power_density())
        U_x = math.sqrt(2 * Z0 * S)
        omega_sig = float(rabi_from_field(self.table.rf_dipole, U_x))
        gamma_eit = self.gamma_eit(scenario.T_env, extra_rydberg_rate=extra_rydberg_rate)
        regime = saturation_check(omega_sig, response.omega_lo, gamma_eit, margin)
        fields = RfFields(response.omega_lo, omega_sig, self.table.rf_dipole)
        transfer = baseband_transfer(self.chain, self.cell, self.probe, fields, response.chi_prime, response.chi)
        budget = noise_budget(self.chain, transfer, gamma_eit, fields, self.cell, self.probe,
                              scenario.bandwidth_raqr, scenario.T_env)
        P_S = float(raqr_received_power(scenario, transfer.beta, 1.0, transfer.Phi))
        if clamp and regime != "linear":
            omega_max = margin * min(response.omega_lo, gamma_eit)
            U_max = field_from_rabi(self.table.rf_dipole, omega_max)
            P_S = transfer.beta * U_max**2 / (2 * Z0)
        return LinkResult(
            snr=float(raqr_snr(P_S, budget)),
            signal_power=P_S,
            beta=transfer.beta,
            noise_qpn=budget.qpn,
            noise_psn=budget.psn,
            noise_itn=budget.itn,
            gamma_eit=gamma_eit,
            omega_sig=omega_sig,
            regime=regime,
            probe_power_out=transfer.probe_power_out,
        )

    # Transient bandwidth --------------------------------------------------
    def bandwidth(self, grid: VelocityGrid | None = None, samples: int = 400) -> BandwidthResult:
        """Instantaneous bandwidth from the free decay after the RF (LO and
        signal) is switched off, averaged over the thermal ensemble."""
        grid = grid or self.velocity_grid("exact")
        v, w = grid.velocities, grid.weights
        geom, diss = self.geometry, self.dissipator
        H_on = lv.build_hamiltonian(self.scheme(), v, geom)
        H_off = lv.build_hamiltonian(self.scheme(omega_rf=0.0), v, geom)
        rho_on = lv.steady_state(lv.build_liouvillian(H_on, diss), v)
        L_off = lv.build_liouvillian(H_off, diss)
        times = lv.default_time_grid(L_off, samples)
        trace = lv.transient_decay(rho_on, L_off, times, w)
        tau = lv.relaxation_time(trace)
        return BandwidthResult(tau, lv.instantaneous_bandwidth(tau), trace)


def feature_fwhm(x, y) -> float:
    """Full width at half height of the spectral feature at the centre of ``x``.

    The feature height is measured from the mean of the two end points, and
    the width is that of the contiguous region around the central sample
    that exceeds half the central height (linear interpolation at the
    crossings).  Anchoring at the centre keeps side lobes (e.g. the
    Autler--Townes wings around an absorption dip) out of the measurement.
    """
    x = np.asarray(x, dtype=float)
    feat = np.asarray(y, dtype=float) - 0.5 * (y[0] + y[-1])
    c = len(feat) // 2
    if feat[c] == 0:
        raise ValueError("no feature at the centre of the sweep")
    g = np.sign(feat[c]) * (feat - feat[c] / 2)  # > 0 inside the feature
    lo = c
    while lo > 0 and g[lo - 1] > 0:
        lo -= 1
    hi = c
    while hi < len(g) - 1 and g[hi + 1] > 0:
        hi += 1

    def cross(i, j):
        return x[i] + (x[j] - x[i]) * g[i] / (g[i] - g[j])

    left = cross(lo, lo - 1) if lo > 0 else x[0]
    right = cross(hi, hi + 1) if hi < len(g) - 1 else x[-1]
    return float(right - left)
