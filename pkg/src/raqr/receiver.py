"""Superheterodyne optical readout: probe modulation, balanced coherent
detection, equivalent baseband gain and the receiver noise budget.

The RF field seen by the atoms in the LO frame is
``Omega_RF(t) = Omega_LO + Omega_x cos(2 pi f_delta t + theta_delta)``.
Linearising the probe transmission about ``Omega_LO`` gives an IF voltage

``V(t) = 2 alpha sqrt(G P_l P_1) R kappa_1 sin(phi_1) U_x cos(...)``

with ``kappa_1 = pi d mu / (lambda_p hbar) |chi'_s|`` and
``phi_1 = phi_l - phi_p(Omega_LO) - arg(chi'_s)``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import c, e as q_e, epsilon_0, hbar, k as k_B

__all__ = [
    "Z0",
    "ProbeBeam",
    "VaporCell",
    "RfFields",
    "DetectorChain",
    "BasebandTransfer",
    "NoiseBudget",
    "rabi_from_field",
    "field_from_rabi",
    "field_from_beam_power",
    "probe_output",
    "ac_voltage",
    "baseband_transfer",
    "noise_budget",
    "saturation_check",
]

#: Impedance of free space ``1/(c eps0)`` (ohm).
Z0 = 1.0 / (c * epsilon_0)


@dataclass(frozen=True)
class ProbeBeam:
    """Input probe: power ``P_0`` (W), wavelength (m), phase (rad), radius (m)."""

    power: float
    wavelength: float
    radius: float
    phase: float = 0.0

    def __post_init__(self):
        if not (self.power > 0 and self.radius > 0 and self.wavelength > 0):
            raise ValueError("probe power, wavelength and radius must be positive")


@dataclass(frozen=True)
class VaporCell:
    """Cell length ``d`` (m), atom density ``N_a`` (m^-3), temperature (K)."""

    length: float
    atom_density: float
    temperature: float = 290.0

    def __post_init__(self):
        if not (self.length > 0 and self.atom_density > 0):
            raise ValueError("cell length and atom density must be positive")


@dataclass(frozen=True)
class RfFields:
    """RF local oscillator and signal.

    Parameters
    ----------
    omega_lo : float
        LO Rabi frequency (rad/s), > 0.
    omega_x : float
        Signal Rabi amplitude (rad/s), >= 0.
    rf_dipole : float
        Dipole of the RF transition (C m).
    f_if : float
        Intermediate frequency ``f_delta`` (Hz).
    theta_if, theta_y : float
        IF phase and LO phase (rad).
    """

    omega_lo: float
    omega_x: float
    rf_dipole: float
    f_if: float = 1e3
    theta_if: float = 0.0
    theta_y: float = 0.0

    def __post_init__(self):
        if not self.omega_lo > 0:
            raise ValueError("omega_lo must be positive")
        if self.omega_x < 0:
            raise ValueError("omega_x must be non-negative")

    @property
    def signal_field(self) -> float:
        """Signal E-field amplitude ``U_x`` (V/m)."""
        return field_from_rabi(self.rf_dipole, self.omega_x)


@dataclass(frozen=True)
class DetectorChain:
    """Balanced coherent detector and amplifier.

    ``lo_phase=None`` locks the optical LO so that ``sin(phi_1) = 1``.
    """

    responsivity: float = 0.8
    gain: float = 1e3
    lo_power: float = 30e-3
    noise_temperature: float = 290.0
    load: float = 1.0
    lo_phase: float | None = None

    def __post_init__(self):
        if not 0 < self.responsivity <= 1:
            raise ValueError("responsivity must lie in (0, 1]")
        if self.gain < 1:
            raise ValueError("amplifier gain must be >= 1")
        if not self.lo_power > 0:
            raise ValueError("optical LO power must be positive")


@dataclass(frozen=True)
class BasebandTransfer:
    """Small-signal baseband description of the receiver.

    ``beta`` is the end-to-end power gain, ``Phi`` the unit-modulus phase
    response, ``H`` the transfer function referenced to an aperture ``A_e``.
    """

    kappa1: float
    phi1: float
    psi_p: float
    beta: float
    Phi: complex
    probe_power_out: float
    aperture: float = 1.0
    impedance: float = Z0

    @property
    def H(self) -> complex:
        return math.sqrt(self.beta / self.aperture) * self.Phi

    def output(self, h, s_b):
        """Noise-free baseband voltage ``sqrt(A_e) H h s_b`` (equal to ``sqrt(beta) Phi h s_b``)."""
        x_b = math.sqrt(self.aperture) * np.asarray(h) * np.asarray(s_b)
        return self.H * x_b


@dataclass(frozen=True)
class NoiseBudget:
    """Additive noise powers (W) in bandwidth ``B``; BBR only as a rate."""

    qpn: float
    psn: float
    itn: float
    gamma_bbr: float
    bandwidth: float
    atom_count: float

    @property
    def total(self) -> float:
        return self.qpn + self.psn + self.itn


def rabi_from_field(mu, E):
    """Rabi frequency ``mu E / hbar`` (rad/s)."""
    return mu * E / hbar


def field_from_rabi(mu, omega):
    """Inverse of :func:`rabi_from_field` (V/m)."""
    return hbar * omega / mu


def field_from_beam_power(P, r0):
    """Peak E-field of a Gaussian beam of power ``P`` and ``1/e^2`` radius ``r0``.

    ``I0 = 2P/(pi r0^2)`` and ``E = sqrt(2 I0 / (c eps0))``.
    """
    I0 = 2 * P / (math.pi * r0**2)
    return np.sqrt(2 * I0 / (c * epsilon_0))


def probe_output(chi, cell: VaporCell, probe: ProbeBeam):
    """Transmitted probe power and phase ``(P_1, phi_p)`` for susceptibility ``chi``."""
    x = 2 * math.pi * cell.length / probe.wavelength
    P1 = probe.power * np.exp(-x * np.imag(chi))
    phi = probe.phase + 0.5 * x * np.real(chi)
    return P1, phi


def _locked_phases(chain: DetectorChain, chi_s_prime: complex, phi_p: float):
    psi = cmath.phase(chi_s_prime)
    if chain.lo_phase is None:
        return psi, math.pi / 2
    return psi, chain.lo_phase - phi_p - psi


def ac_voltage(chi_s_prime: complex, fields: RfFields, chain: DetectorChain, cell: VaporCell, probe: ProbeBeam,
               chi_lo: complex):
    """Linearised IF voltage.

    Returns
    -------
    kappa1 : float
        Field-to-optical gain ``pi d mu |chi'_s| / (lambda_p hbar)`` (m/V).
    phi1 : float
        Total atomic-optical phase (rad).
    amplitude : float
        Peak IF voltage (V), ``2 alpha sqrt(G P_l P_1) R kappa1 sin(phi1) U_x``.
    """
    kappa1 = math.pi * cell.length * fields.rf_dipole * abs(chi_s_prime) / (probe.wavelength * hbar)
    P1, phi_p = probe_output(chi_lo, cell, probe)
    _, phi1 = _locked_phases(chain, chi_s_prime, phi_p)
    amp = (2 * chain.responsivity * math.sqrt(chain.gain * chain.lo_power * P1) * chain.load
           * kappa1 * math.sin(phi1) * fields.signal_field)
    return kappa1, phi1, amp


def baseband_transfer(chain: DetectorChain, cell: VaporCell, probe: ProbeBeam, fields: RfFields,
                      chi_s_prime: complex, chi_lo: complex, aperture: float = 1.0) -> BasebandTransfer:
    """Equivalent baseband gain ``beta`` and phase ``Phi = exp(-i theta_y)``.

    ``beta = 4 alpha^2 G R^2 Z0 P_l P_1 kappa1^2 sin^2(phi1)``.
    """
    if not aperture > 0:
        raise ValueError("aperture must be positive")
    kappa1, phi1, _ = ac_voltage(chi_s_prime, fields, chain, cell, probe, chi_lo)
    P1, _ = probe_output(chi_lo, cell, probe)
    beta = (4 * chain.responsivity**2 * chain.gain * chain.load**2 * Z0 * chain.lo_power * P1
            * kappa1**2 * math.sin(phi1) ** 2)
    return BasebandTransfer(
        kappa1=kappa1,
        phi1=phi1,
        psi_p=cmath.phase(chi_s_prime),
        beta=float(beta),
        Phi=cmath.exp(-1j * fields.theta_y),
        probe_power_out=float(P1),
        aperture=aperture,
    )


def noise_budget(chain: DetectorChain, transfer: BasebandTransfer, gamma_eit: float, fields: RfFields,
                 cell: VaporCell, probe: ProbeBeam, bandwidth: float, T_env: float = 290.0,
                 n_eff: float | None = None, fine_structure_constant: float = 7.2973525693e-3) -> NoiseBudget:
    """Receiver noise powers in bandwidth ``B``.

    ``N_ITN = k_B T_PD G B``, ``N_PSN = 2 q G alpha (P_l + P_1) B`` and
    ``N_QPN = beta/(2 Z0) (hbar sqrt(Gamma_EIT) / (mu sqrt(N_m)))^2 B``.

    Black-body radiation never appears as additive power: ``T_env`` (with
    ``n_eff``) only yields the informational decoherence rate ``gamma_bbr``,
    which callers fold into ``gamma_eit``.
    """
    if bandwidth < 0:
        raise ValueError("bandwidth must be non-negative")
    n_m = math.pi * probe.radius**2 * cell.length * cell.atom_density
    itn = k_B * chain.noise_temperature * chain.gain * bandwidth
    psn = 2 * q_e * chain.gain * chain.responsivity * (chain.lo_power + transfer.probe_power_out) * bandwidth
    qpn = transfer.beta / (2 * Z0) * (hbar * math.sqrt(gamma_eit) / (fields.rf_dipole * math.sqrt(n_m))) ** 2 * bandwidth
    gamma_bbr = 0.0
    if n_eff is not None:
        gamma_bbr = 4 * fine_structure_constant**3 * k_B * T_env / (3 * n_eff**2 * hbar)
    return NoiseBudget(qpn=qpn, psn=psn, itn=itn, gamma_bbr=gamma_bbr, bandwidth=bandwidth, atom_count=n_m)


def saturation_check(omega_sig: float, omega_lo: float, gamma_eit: float, margin: float = 0.1) -> str:
    """Classify the operating regime of the heterodyne receiver.

    Returns ``"linear"`` if ``omega_sig < margin*min(omega_lo, gamma_eit)``,
    otherwise ``"mixing-saturated"``, ``"atom-saturated"`` or ``"both"``
    naming the violated bound(s).
    """
    if not 0 < margin < 1:
        raise ValueError("margin must lie in (0, 1)")
    mixing = omega_sig >= margin * omega_lo
    atom = omega_sig >= margin * gamma_eit
    if mixing and atom:
        # Name only the bound that is actually reached when one dominates.
        if omega_sig >= omega_lo and omega_sig < gamma_eit:
            return "mixing-saturated"
        if omega_sig >= gamma_eit and omega_sig < omega_lo:
            return "atom-saturated"
        return "both"
    if mixing:
        return "mixing-saturated"
    if atom:
        return "atom-saturated"
    return "linear"
