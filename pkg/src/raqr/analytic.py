"""Weak-probe closed forms for ladder-type Rydberg receivers.

Conventions
-----------
* All rates, Rabi frequencies and detunings are angular (rad/s).
* A ladder with ``N`` levels has ``N-1`` couplings ``(Omega_p, [Omega_d],
  Omega_c, Omega_RF)`` and ``N-1`` single-field detunings; the cumulative
  detuning of level ``n`` is the prefix sum ``Delta_n = sum_{j<n} delta_j``.
* Sign: the probe field phase is chosen so that resonant absorption appears
  as ``Im(rho_21) > 0``.  The weak-probe solution is therefore

  ``rho_21 = -(i Omega_p / 2) / f_2``

  with the continued fraction

  ``f_N = i Delta_N - Gamma_N1``,
  ``f_n = i Delta_n - Gamma_n1 + Omega_n^2 / (4 f_{n+1})``,

  where ``Omega_n`` couples level ``n`` to ``n+1``.  The exact Liouvillian
  backend uses the same phase (probe coupling ``-Omega_p/2`` in ``H``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.constants import epsilon_0, hbar, k as k_B

from .thermal import VelocityGrid

__all__ = [
    "LadderScheme",
    "BeamGeometry",
    "SusceptibilityContext",
    "LinewidthComponents",
    "coherence",
    "coherence_4l",
    "coherence_5l",
    "susceptibility",
    "residual_doppler_linewidth",
    "doppler_shifts",
    "doppler_averaged_coherence",
    "transconductance",
    "transconductance_4l",
    "transconductance_5l",
    "doppler_averaged_transconductance",
    "bbr_decoherence",
    "eit_linewidth",
]


@dataclass(frozen=True)
class LadderScheme:
    """Couplings, detunings and coherence decay rates of an ``N``-level ladder.

    Parameters
    ----------
    rabi : tuple
        ``(Omega_p, [Omega_d,] Omega_c, Omega_RF)`` in rad/s, all >= 0.
    detunings : tuple
        Single-field detunings ``(Delta_p, [Delta_d,] Delta_c, Delta_RF)`` in
        rad/s.  Entries may be numpy arrays; they broadcast together.
    coherence_rates : tuple
        ``(Gamma_21, ..., Gamma_N1)`` in rad/s, all > 0.
    """

    rabi: tuple
    detunings: tuple
    coherence_rates: tuple

    def __post_init__(self):
        n = len(self.rabi)
        if n not in (3, 4):
            raise ValueError(f"ladder must have 4 or 5 levels, got {n + 1}")
        if len(self.detunings) != n or len(self.coherence_rates) != n:
            raise ValueError("rabi, detunings and coherence_rates must have equal length")
        if any(np.any(np.asarray(g) <= 0) for g in self.coherence_rates):
            raise ValueError("all coherence decay rates must be strictly positive")
        if any(np.any(np.asarray(o) < 0) for o in self.rabi):
            raise ValueError("Rabi frequencies must be non-negative")

    @property
    def n_levels(self) -> int:
        return len(self.rabi) + 1

    @property
    def cumulative_detunings(self) -> np.ndarray:
        """``(Delta_2, ..., Delta_N)`` stacked on the last axis."""
        return np.cumsum(np.stack(np.broadcast_arrays(*self.detunings), axis=-1), axis=-1)

    def with_rf(self, omega_rf) -> "LadderScheme":
        return replace(self, rabi=self.rabi[:-1] + (omega_rf,))

    def with_probe(self, omega_p) -> "LadderScheme":
        return replace(self, rabi=(omega_p,) + self.rabi[1:])

    def with_detunings(self, detunings) -> "LadderScheme":
        return replace(self, detunings=tuple(detunings))


@dataclass(frozen=True)
class BeamGeometry:
    """Optical beam wavelengths and propagation signs along the probe axis.

    Parameters
    ----------
    wavelengths : tuple of float
        ``(lambda_p, [lambda_d,] lambda_c)`` in m.
    directions : tuple of int
        ``+1`` (along the probe) or ``-1`` (counter-propagating).
    gamma2 : float
        Natural decay rate of the first excited state (rad/s).
    """

    wavelengths: tuple
    directions: tuple
    gamma2: float

    def __post_init__(self):
        if len(self.wavelengths) < 2 or len(self.wavelengths) != len(self.directions):
            raise ValueError("need at least two beams with one direction each")
        if any(s not in (1, -1) for s in self.directions):
            raise ValueError("directions must be +1 or -1")

    @property
    def wavevectors(self) -> np.ndarray:
        """Signed wavevectors ``s_j k_j`` (rad/m)."""
        return np.array([s * 2 * math.pi / lam for s, lam in zip(self.directions, self.wavelengths)])

    def reversed(self) -> "BeamGeometry":
        return replace(self, directions=tuple(-s for s in self.directions))


@dataclass(frozen=True)
class SusceptibilityContext:
    """Medium constants entering ``K = N_a mu_12^2 / (eps0 hbar Omega_p)``."""

    atom_density: float
    probe_dipole: float
    probe_rabi: float

    def __post_init__(self):
        if not (self.atom_density > 0 and self.probe_dipole > 0 and self.probe_rabi > 0):
            raise ValueError("atom density, probe dipole and probe Rabi frequency must be positive")

    @property
    def K(self) -> float:
        return self.atom_density * self.probe_dipole**2 / (epsilon_0 * hbar * self.probe_rabi)


@dataclass(frozen=True)
class LinewidthComponents:
    """Additive contributions to the EIT linewidth (all angular)."""

    gamma_res: float = 0.0
    gamma_ryd_nat: float = 0.0
    gamma_bbr: float = 0.0
    omega_at: float = 0.0  # |Omega_c|^2 + |Omega_LO|^2, (rad/s)^2
    gamma2: float = 1.0
    transit: float = 0.0
    dephasing: float = 0.0

    def __post_init__(self):
        vals = (self.gamma_res, self.gamma_ryd_nat, self.gamma_bbr, self.omega_at, self.transit, self.dephasing)
        if any(v < 0 for v in vals) or self.gamma2 <= 0:
            raise ValueError("linewidth components must be non-negative (gamma2 > 0)")


# ---------------------------------------------------------------------------
# Continued fractions
# ---------------------------------------------------------------------------


def _fractions(rabi, deltas, rates):
    """Return ``[f_2, ..., f_N]`` for stacked arrays.

    ``rabi`` and ``deltas`` carry the ladder index on the last axis.
    """
    n = deltas.shape[-1]
    f = [None] * n
    f[-1] = 1j * deltas[..., -1] - rates[-1]
    for m in range(n - 2, -1, -1):
        f[m] = 1j * deltas[..., m] - rates[m] + rabi[..., m + 1] ** 2 / (4 * f[m + 1])
    return f


def _stack(values):
    return np.stack(np.broadcast_arrays(*[np.asarray(v, dtype=float) for v in values]), axis=-1)


def coherence(scheme: LadderScheme, deltas=None):
    """Weak-probe ``rho_21`` for a ladder of any supported depth.

    Parameters
    ----------
    scheme : LadderScheme
    deltas : array, optional
        Override of the cumulative detunings ``(..., N-1)``; used by the
        Doppler average.
    """
    rabi = _stack(scheme.rabi)
    d = scheme.cumulative_detunings if deltas is None else deltas
    f = _fractions(rabi, d, np.asarray(scheme.coherence_rates, dtype=float))
    return -(0.5j * rabi[..., 0]) / f[0]


def coherence_4l(scheme: LadderScheme):
    """Weak-probe ``rho_21`` of the four-level (two-colour) ladder.

    Valid only for ``Omega_p`` well below the other couplings and decay
    rates; the caller is responsible for staying in that regime.
    """
    if scheme.n_levels != 4:
        raise ValueError("coherence_4l needs a four-level scheme")
    return coherence(scheme)


def coherence_5l(scheme: LadderScheme):
    """Weak-probe ``rho_21`` of the five-level (three-colour) ladder."""
    if scheme.n_levels != 5:
        raise ValueError("coherence_5l needs a five-level scheme")
    return coherence(scheme)


def susceptibility(rho21, ctx: SusceptibilityContext):
    """Bulk susceptibility ``chi = K rho_21``."""
    return ctx.K * rho21


# ---------------------------------------------------------------------------
# Doppler effects
# ---------------------------------------------------------------------------


def residual_doppler_linewidth(geometry: BeamGeometry) -> float:
    """Residual Doppler width ``(Gamma_2/|k_p|) |sum_j s_j k_j|`` in rad/s."""
    kv = geometry.wavevectors
    return float(geometry.gamma2 / abs(kv[0]) * abs(kv.sum()))


def doppler_shifts(geometry: BeamGeometry, n_couplings: int) -> np.ndarray:
    """Per-level cumulative Doppler coefficients ``d Delta_n / dv`` (rad/m).

    The RF coupling carries no Doppler shift.
    """
    kv = geometry.wavevectors
    if len(kv) != n_couplings - 1:
        raise ValueError(f"geometry has {len(kv)} beams but the scheme needs {n_couplings - 1}")
    per_field = np.concatenate([-kv, [0.0]])
    return np.cumsum(per_field)


def _velocity_fold(func, scheme, geometry, grid, chunk=4096):
    """``sum_k func(deltas(v_k)) w_k`` in fixed order over velocity chunks."""
    base = scheme.cumulative_detunings
    slope = doppler_shifts(geometry, len(scheme.rabi))
    v, w = grid.velocities, grid.weights
    total = 0.0
    for start in range(0, v.size, chunk):
        vs, ws = v[start:start + chunk], w[start:start + chunk]
        deltas = base[..., None, :] + vs[:, None] * slope
        total = total + np.tensordot(func(deltas), ws, axes=([-1], [0]))
    return total


def doppler_averaged_coherence(scheme: LadderScheme, geometry: BeamGeometry, T_atom: float = None,
                               mass: float = None, grid: VelocityGrid = None):
    """Maxwell--Boltzmann average of the weak-probe coherence.

    Either pass ``grid`` directly, or ``T_atom`` and ``mass`` to build the
    default 301-class grid over ``+-3 v_th``.

    Returns ``sum_k rho_21(v_k) P(v_k) dv``.
    """
    if grid is None:
        grid = VelocityGrid.thermal(T_atom, mass)
    grid.check_weights()
    return _velocity_fold(lambda d: coherence(scheme, d), scheme, geometry, grid)


# ---------------------------------------------------------------------------
# Transconductance
# ---------------------------------------------------------------------------


def _drho_domega_rf(scheme: LadderScheme, omega_lo, deltas=None):
    """Chain-rule derivative ``d rho_21 / d Omega_RF`` at ``Omega_RF = Omega_LO``."""
    s = scheme.with_rf(omega_lo)
    rabi = _stack(s.rabi)
    d = s.cumulative_detunings if deltas is None else deltas
    f = _fractions(rabi, d, np.asarray(s.coherence_rates, dtype=float))
    num = -0.5j * rabi[..., 0]
    out = -num / f[0] ** 2
    for m in range(1, len(f) - 1):
        out = out * (-(rabi[..., m] ** 2) / 4 / f[m] ** 2)
    return out / f[-1] * (rabi[..., -1] / 2)


def transconductance(scheme: LadderScheme, ctx: SusceptibilityContext, omega_lo):
    """Atomic transconductance ``chi'_s = d chi / d Omega_RF`` at the LO bias.

    ``scheme.rabi[-1]`` is ignored; the RF Rabi frequency is set to
    ``omega_lo``.  Works for four- and five-level ladders.
    """
    if np.any(np.asarray(omega_lo) < 0):
        raise ValueError("omega_lo must be non-negative")
    return ctx.K * _drho_domega_rf(scheme, omega_lo)


def transconductance_4l(scheme: LadderScheme, ctx: SusceptibilityContext, omega_lo):
    """Four-level transconductance ``K (Omega_LO/2) (-(i Omega_p/2)(Omega_c^2/4)) / (f2^2 f3^2 f4)``."""
    if scheme.n_levels != 4:
        raise ValueError("transconductance_4l needs a four-level scheme")
    return transconductance(scheme, ctx, omega_lo)


def transconductance_5l(scheme: LadderScheme, ctx: SusceptibilityContext, omega_lo):
    """Five-level transconductance
    ``K (Omega_LO/2) (i Omega_p/2)(Omega_d^2/4)(Omega_c^2/4) / (f2^2 f3^2 f4^2 f5)``.
    """
    if scheme.n_levels != 5:
        raise ValueError("transconductance_5l needs a five-level scheme")
    return transconductance(scheme, ctx, omega_lo)


def doppler_averaged_transconductance(scheme: LadderScheme, geometry: BeamGeometry, ctx: SusceptibilityContext,
                                      omega_lo, grid: VelocityGrid):
    """Thermal average of ``chi'_s`` over ``grid``."""
    grid.check_weights()
    s = scheme.with_rf(omega_lo)
    return ctx.K * _velocity_fold(lambda d: _drho_domega_rf(s, omega_lo, d), s, geometry, grid)


# ---------------------------------------------------------------------------
# Linewidth budget
# ---------------------------------------------------------------------------


def bbr_decoherence(T_env, n_eff, species=None, fine_structure_constant: float = None):
    """Black-body decoherence rate ``4 alpha^3 k_B T / (3 n_eff^2 hbar)`` (s^-1).

    ``alpha`` is taken from ``species.fine_structure_constant`` unless given
    explicitly.
    """
    if fine_structure_constant is None:
        fine_structure_constant = species.fine_structure_constant
    if np.any(np.asarray(T_env) < 0) or np.any(np.asarray(n_eff) <= 0):
        raise ValueError("need T_env >= 0 and n_eff > 0")
    return 4 * fine_structure_constant**3 * k_B * T_env / (3 * n_eff**2 * hbar)


def eit_linewidth(c: LinewidthComponents) -> float:
    """``Gamma_Res + (Gamma_Ryd + Gamma_BBR)/2 + Omega_AT/Gamma_2 + v_th/r_0 + Gamma_d``."""
    return (c.gamma_res + (c.gamma_ryd_nat + c.gamma_bbr) / 2 + c.omega_at / c.gamma2
            + c.transit + c.dephasing)

