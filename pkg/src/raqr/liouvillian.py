"""Exact Lindblad steady states, Doppler averaging and transient decay.

The density matrix is vectorised column by column, ``vec(A rho B) =
(B^T kron A) vec(rho)``, so the coherence ``rho_21`` sits at index 1 of
the ``N^2`` vector.  Hamiltonians are in rad/s with ``hbar`` factored out and
use the same probe phase as :mod:`raqr.analytic` (probe coupling
``-Omega_p/2``), so resonant absorption has ``Im rho_21 > 0``.

Relaxation processes
--------------------
* cascade decay ``|n> -> |n-1>`` at ``Gamma_n``;
* dephasing ``Gamma_d`` on the coherences between the Rydberg manifold and
  the lower levels (collapse operator ``sqrt(2 Gamma_d) P_Ryd``), or on every
  coherence when ``dephase_all`` is set;
* transit-time exchange ``-gamma_t rho + gamma_t Tr(rho) |1><1|``, which
  removes atoms at ``gamma_t`` and re-injects them in the ground state.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .analytic import BeamGeometry, LadderScheme, doppler_shifts
from .thermal import VelocityGrid

__all__ = [
    "SolverError",
    "DissipatorSpec",
    "LiouvillianOperator",
    "DensityVector",
    "TransientTrace",
    "build_hamiltonian",
    "build_liouvillian",
    "steady_state",
    "steady_state_rf_derivative",
    "doppler_average_exact",
    "transient_decay",
    "default_time_grid",
    "relaxation_time",
    "instantaneous_bandwidth",
]

#: Condition-number ceiling for the trace-replaced generator.
CONDITION_LIMIT = 1e12
#: Eigenvector-matrix condition number above which transients are integrated.
DEFECTIVE_LIMIT = 1e10


class SolverError(RuntimeError):
    """Numerical failure with a diagnostic payload.

    Attributes
    ----------
    condition : float or None
        Condition estimate of the failing linear system.
    velocity : float or None
        Velocity class (m/s) at which the failure occurred.
    """

    def __init__(self, message: str, condition: float | None = None, velocity: float | None = None):
        if velocity is not None:
            message = f"{message} (velocity class v = {velocity:.6g} m/s)"
        super().__init__(message)
        self.condition = condition
        self.velocity = velocity


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------


def _hamiltonian(rabi: np.ndarray, deltas: np.ndarray) -> np.ndarray:
    """Tridiagonal ladder Hamiltonian from stacked couplings and detunings."""
    shape = np.broadcast_shapes(rabi.shape[:-1], deltas.shape[:-1])
    n = rabi.shape[-1] + 1
    H = np.zeros(shape + (n, n), dtype=complex)
    idx = np.arange(n - 1)
    coupling = 0.5 * rabi * np.r_[-1.0, np.ones(n - 2)]
    H[..., idx, idx + 1] = coupling
    H[..., idx + 1, idx] = coupling
    H[..., idx + 1, idx + 1] = -deltas
    return H


def _stack(values):
    return np.stack(np.broadcast_arrays(*[np.asarray(v, dtype=float) for v in values]), axis=-1)


def build_hamiltonian(scheme: LadderScheme, v=0.0, geometry: BeamGeometry | None = None) -> np.ndarray:
    """Rotating-frame ladder Hamiltonian (rad/s) for velocity class ``v``.

    The diagonal carries ``-Delta_n(v)``, the cumulative detunings with the
    per-beam Doppler shifts ``-s_j k_j v`` folded in.  Array-valued detunings
    or ``v`` broadcast to leading batch axes.
    """
    deltas = scheme.cumulative_detunings
    v = np.asarray(v, dtype=float)
    if np.any(v != 0):
        if geometry is None:
            raise ValueError("a BeamGeometry is required for non-zero velocity")
        deltas = deltas + v[..., None] * doppler_shifts(geometry, len(scheme.rabi))
    return _hamiltonian(_stack(scheme.rabi), deltas)


@dataclass(frozen=True)
class DissipatorSpec:
    """Relaxation rates of the ladder (all rad/s).

    Parameters
    ----------
    decay_rates : sequence of float
        ``Gamma_2 .. Gamma_N``; level ``n`` decays to ``n-1``.
    dephasing : float
        Residual dephasing ``Gamma_d``.
    transit : float
        Transit rate ``gamma_t = v_th / r_0``.
    rydberg_levels : tuple of int, optional
        0-based indices dephased by ``Gamma_d``; defaults to the top two.
    dephase_all : bool
        Apply ``Gamma_d`` to every level instead (alternative model).
    """

    decay_rates: tuple
    dephasing: float = 0.0
    transit: float = 0.0
    rydberg_levels: tuple | None = None
    dephase_all: bool = False

    def __post_init__(self):
        if any(g < 0 for g in self.decay_rates) or self.dephasing < 0 or self.transit < 0:
            raise ValueError("relaxation rates must be non-negative")

    @property
    def n_levels(self) -> int:
        return len(self.decay_rates) + 1

    @property
    def rydberg(self) -> tuple:
        n = self.n_levels
        return tuple(self.rydberg_levels) if self.rydberg_levels is not None else (n - 2, n - 1)

    def coherence_rates(self) -> tuple:
        """Weak-probe ``Gamma_n1`` implied by this model."""
        rates = []
        for n, g in enumerate(self.decay_rates, start=1):
            # Projector model: sqrt(2 Gamma_d) P_Ryd damps Rydberg-ground coherences at Gamma_d.
            # All-level model: |n><n| and |1><1| each contribute Gamma_d/2.
            extra = self.dephasing if (self.dephase_all or n in self.rydberg) else 0.0
            rates.append(g / 2 + self.transit + extra)
        return tuple(rates)

    @cached_property
    def superoperator(self) -> np.ndarray:
        n = self.n_levels
        eye = np.eye(n)

        def lindblad(op):
            ldl = op.conj().T @ op
            return np.kron(op.conj(), op) - 0.5 * np.kron(eye, ldl) - 0.5 * np.kron(ldl.T, eye)

        D = np.zeros((n * n, n * n), dtype=complex)
        for k, g in enumerate(self.decay_rates, start=1):
            op = np.zeros((n, n))
            op[k - 1, k] = math.sqrt(g)
            D += lindblad(op)
        if self.dephasing > 0:
            if self.dephase_all:
                for k in range(n):
                    op = np.zeros((n, n))
                    op[k, k] = math.sqrt(self.dephasing)
                    D += lindblad(op)
            else:
                proj = np.zeros((n, n))
                proj[list(self.rydberg), list(self.rydberg)] = 1.0
                D += lindblad(math.sqrt(2 * self.dephasing) * proj)
        if self.transit > 0:
            D -= self.transit * np.eye(n * n)
            D[0, np.arange(n) * (n + 1)] += self.transit
        return D


@dataclass(frozen=True)
class LiouvillianOperator:
    """Generator ``L`` (shape ``(..., N^2, N^2)``) acting on column-stacked ``rho``."""

    matrix: np.ndarray
    replaced: bool = False

    @property
    def n_levels(self) -> int:
        return int(round(math.sqrt(self.matrix.shape[-1])))

    @property
    def trace_functional(self) -> np.ndarray:
        n = self.n_levels
        t = np.zeros(n * n)
        t[np.arange(n) * (n + 1)] = 1.0
        return t

    def trace_replaced(self) -> "LiouvillianOperator":
        """``L~``: last row replaced by the trace functional."""
        if self.replaced:
            return self
        m = self.matrix.copy()
        m[..., -1, :] = self.trace_functional
        return LiouvillianOperator(m, replaced=True)


def build_liouvillian(H: np.ndarray, dissipator: DissipatorSpec) -> LiouvillianOperator:
    """Assemble ``L = -i (I kron H - H^T kron I) + D`` (batched over ``H``)."""
    n = H.shape[-1]
    if n != dissipator.n_levels:
        raise ValueError(f"Hamiltonian has {n} levels, dissipator {dissipator.n_levels}")
    eye = np.eye(n)
    # Batched Kronecker products via einsum keep the leading axes intact.
    left = np.einsum("ab,...cd->...acbd", eye, H).reshape(H.shape[:-2] + (n * n, n * n))
    right = np.einsum("...ba,cd->...acbd", H, eye).reshape(H.shape[:-2] + (n * n, n * n))
    return LiouvillianOperator(-1j * (left - right) + dissipator.superoperator)


@dataclass(frozen=True)
class DensityVector:
    """Column-stacked density matrix (optionally batched).

    ``condition`` holds the 1-norm condition estimate of the solve.
    """

    data: np.ndarray
    condition: np.ndarray | float = 1.0
    residual: np.ndarray | float = 0.0

    @property
    def n_levels(self) -> int:
        return int(round(math.sqrt(self.data.shape[-1])))

    @property
    def matrix(self) -> np.ndarray:
        n = self.n_levels
        return np.swapaxes(self.data.reshape(self.data.shape[:-1] + (n, n)), -1, -2)

    @property
    def rho21(self):
        return self.data[..., 1]

    @property
    def populations(self) -> np.ndarray:
        n = self.n_levels
        return self.data[..., np.arange(n) * (n + 1)].real

    @property
    def trace(self):
        n = self.n_levels
        return self.data[..., np.arange(n) * (n + 1)].sum(axis=-1)

    def invariant_errors(self) -> dict:
        """Worst-case deviations from the physical-state invariants."""
        m = self.matrix
        herm = np.abs(m - np.swapaxes(m.conj(), -1, -2)).max()
        eig = np.linalg.eigvalsh(0.5 * (m + np.swapaxes(m.conj(), -1, -2)))
        return {
            "trace": float(np.abs(self.trace - 1).max()),
            "hermiticity": float(herm),
            "min_eigenvalue": float(eig.min()),
            "max_eigenvalue": float(eig.max()),
        }


def _relative_residual(L: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``||L x||_inf / ||L||_inf`` (scale-free; ``||x||_inf <= 1``)."""
    r = np.abs(np.einsum("...ij,...j->...i", L, x)).max(axis=-1)
    return r / np.abs(L).sum(axis=-1).max(axis=-1)


def _solve(L: np.ndarray, velocities=None):
    """Return (x, inverse, condition) for a batch of raw generators."""
    op = LiouvillianOperator(L)
    Lt = op.trace_replaced().matrix
    try:
        inv = np.linalg.inv(Lt)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"trace-replaced Liouvillian is singular: {exc}", condition=math.inf) from exc
    cond = np.abs(Lt).sum(axis=-2).max(axis=-1) * np.abs(inv).sum(axis=-2).max(axis=-1)
    bad = ~np.isfinite(cond) | (cond > CONDITION_LIMIT)
    if np.any(bad):
        i = np.flatnonzero(np.ravel(bad))[0]
        v = None if velocities is None else float(np.ravel(np.broadcast_to(velocities, bad.shape))[i])
        raise SolverError("trace-replaced Liouvillian is ill-conditioned",
                          condition=float(np.ravel(cond)[i]), velocity=v)
    return inv[..., :, -1], inv, cond


def steady_state(L: LiouvillianOperator, velocities=None) -> DensityVector:
    """Steady state from ``L~ |rho>> = e_last`` (batched).

    Raises
    ------
    SolverError
        If the trace-replaced generator has condition estimate above
        ``1e12``.  ``velocities`` (same batch shape) labels the error.
    """
    if L.replaced:
        raise ValueError("steady_state expects the raw generator")
    x, _, cond = _solve(L.matrix, velocities)
    return DensityVector(x, cond, _relative_residual(L.matrix, x))


def _rf_generator_derivative(n: int) -> np.ndarray:
    """``dL/dOmega_RF`` for the top ladder coupling (trace row zeroed)."""
    dH = np.zeros((n, n))
    dH[n - 2, n - 1] = dH[n - 1, n - 2] = 0.5
    eye = np.eye(n)
    dL = -1j * (np.kron(eye, dH) - np.kron(dH.T, eye))
    dL[-1, :] = 0.0
    return dL


def steady_state_rf_derivative(L: LiouvillianOperator) -> tuple[DensityVector, np.ndarray]:
    """Steady state and its linear response ``d rho / d Omega_RF``.

    Uses ``d rho = -L~^{-1} (dL~/dOmega_RF) rho`` with the normalisation row
    held fixed.
    """
    x, inv, cond = _solve(L.matrix)
    dL = _rf_generator_derivative(L.n_levels)
    dx = -np.einsum("...ij,jk,...k->...i", inv, dL, x)
    return DensityVector(x, cond, _relative_residual(L.matrix, x)), dx


# ---------------------------------------------------------------------------
# Doppler averaging
# ---------------------------------------------------------------------------


def doppler_average_exact(
    scheme: LadderScheme,
    geometry: BeamGeometry,
    dissipator: DissipatorSpec,
    grid: VelocityGrid,
    omega_rf=None,
    derivative: bool = False,
    populations: bool = False,
    jobs: int = 1,
    chunk: int = 2048,
):
    """Thermal average ``sum_k rho_21(v_k) P(v_k) dv`` of exact steady states.

    Parameters
    ----------
    scheme : LadderScheme
        Detunings may be arrays (e.g. a spectrum axis); the result then has
        that shape.
    omega_rf : float, optional
        Overrides the RF Rabi frequency of ``scheme``.
    derivative : bool
        Also return ``d rho_21 / d Omega_RF`` averaged over the ensemble.
    populations : bool
        Also return the averaged level populations (last axis = level).
    jobs : int
        Worker threads; the velocity fold is always summed in grid order.

    Returns
    -------
    complex or ndarray, or a tuple with the optional extras.
    """
    if omega_rf is not None:
        scheme = scheme.with_rf(omega_rf)
    base = scheme.cumulative_detunings
    rabi = _stack(scheme.rabi)
    slope = doppler_shifts(geometry, len(scheme.rabi))
    v, w = grid.velocities, grid.weights
    batch = np.broadcast_shapes(base.shape[:-1], rabi.shape[:-1])
    base = np.broadcast_to(base, batch + base.shape[-1:]).reshape(-1, base.shape[-1])
    rabi = np.broadcast_to(rabi, batch + rabi.shape[-1:]).reshape(-1, rabi.shape[-1])
    n_b, n_v = base.shape[0], v.size
    n = scheme.n_levels
    dL = _rf_generator_derivative(n) if derivative else None

    flat = np.arange(n_b * n_v)
    pieces = [flat[i:i + chunk] for i in range(0, flat.size, chunk)]

    def work(idx):
        ib, iv = np.divmod(idx, n_v)
        deltas = base[ib] + v[iv, None] * slope
        H = _hamiltonian(rabi[ib], deltas)
        L = build_liouvillian(H, dissipator).matrix
        x, inv, _ = _solve(L, v[iv])
        out = [x[:, 1] * w[iv]]
        if derivative:
            dx = -np.einsum("...ij,jk,...k->...i", inv, dL, x)
            out.append(dx[:, 1] * w[iv])
        if populations:
            out.append(x[:, np.arange(n) * (n + 1)].real * w[iv, None])
        return out

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, pieces))
    else:
        results = [work(p) for p in pieces]

    def fold(k, tail=()):
        acc = np.zeros((n_b,) + tail, dtype=results[0][k].dtype)
        for idx, res in zip(pieces, results):
            # Fixed-order accumulation: identical for serial and threaded runs.
            np.add.at(acc, idx // n_v, res[k])
        out = acc.reshape(batch + tail)
        return out[()] if out.ndim == 0 else out

    outputs = [fold(0)]
    k = 1
    if derivative:
        outputs.append(fold(k))
        k += 1
    if populations:
        outputs.append(fold(k, (n,)))
    return outputs[0] if len(outputs) == 1 else tuple(outputs)


# ---------------------------------------------------------------------------
# Transients
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TransientTrace:
    """Ensemble coherence after the RF field is switched off.

    ``evaluate(t)`` gives ``rho_21(t)`` at arbitrary times from the modal
    (or integrated) solution; ``fallback`` is true if any class was too close
    to defective for the eigen-expansion.
    """

    times: np.ndarray
    coherence: np.ndarray
    on: complex
    off: complex
    fallback: bool = False
    evaluate: Callable = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("transient time samples must be strictly increasing")


def _integrate(L: np.ndarray, x0: np.ndarray, t_end: float):
    """Adaptive fallback propagation with dense output."""
    sol = solve_ivp(lambda t, y: L @ y, (0.0, t_end), x0.astype(complex), method="DOP853",
                    rtol=1e-10, atol=1e-12, dense_output=True)
    if not sol.success:
        raise SolverError(f"fallback integration failed: {sol.message}")
    return sol.sol


def transient_decay(
    rho0: DensityVector,
    L_off: LiouvillianOperator,
    times: Sequence[float],
    weights=None,
) -> TransientTrace:
    """Free decay ``rho(t) = V exp(D t) V^-1 rho(0)`` of (a batch of) classes.

    Parameters
    ----------
    rho0 : DensityVector
        Initial (RF-on) states, shape ``(..., N^2)``.
    L_off : LiouvillianOperator
        Raw RF-off generators with matching batch shape.
    times : sequence of float
        Sample times (s); ``0`` is prepended if absent.
    weights : array, optional
        Ensemble weights (e.g. Maxwell--Boltzmann ``P(v) dv``) summed over
        the batch.  Defaults to one class with unit weight.
    """
    t = np.asarray(times, dtype=float)
    if t.size == 0 or t[0] != 0.0:
        t = np.concatenate([[0.0], t])
    L = np.asarray(L_off.matrix)
    x0 = np.asarray(rho0.data)
    L = L.reshape((-1,) + L.shape[-2:])
    x0 = np.broadcast_to(x0, L.shape[:-1]).reshape(L.shape[:-1])
    w = np.ones(L.shape[0]) if weights is None else np.ravel(np.asarray(weights, dtype=float))
    if w.size != L.shape[0]:
        raise ValueError("weights must match the number of classes")

    lam, V = np.linalg.eig(L)
    cond = np.linalg.cond(V)
    ok = np.isfinite(cond) & (cond <= DEFECTIVE_LIMIT)
    amps = np.zeros_like(lam)
    if np.any(ok):
        c = np.linalg.solve(V[ok], x0[ok][..., None])[..., 0]
        amps[ok] = w[ok, None] * V[ok][:, 1, :] * c
    modal_amps, modal_lams = amps[ok].ravel(), lam[ok].ravel()
    dense = [(_integrate(L[i], x0[i], t[-1]), w[i]) for i in np.flatnonzero(~ok)]

    def evaluate(tt):
        tt = np.asarray(tt, dtype=float)
        out = (np.exp(np.multiply.outer(tt, modal_lams)) @ modal_amps) if modal_amps.size else np.zeros(tt.shape, complex)
        for sol, wi in dense:
            out = out + wi * sol(tt)[1]
        return out

    trace = evaluate(t)
    on = complex(np.sum(w * x0[:, 1]))
    trace[0] = on  # exact by construction; removes eigen round-off at t = 0
    off = complex(np.sum(w * steady_state(LiouvillianOperator(L)).rho21))
    return TransientTrace(t, trace, on, off, bool(dense), evaluate)


def default_time_grid(L_off: LiouvillianOperator, samples: int = 400) -> np.ndarray:
    """Log-spaced times over ``[1e-3/gamma_fast, 30/gamma_slow]`` plus ``t = 0``.

    ``gamma_fast``/``gamma_slow`` are the largest/smallest non-zero decay
    rates ``|Re(lambda)|`` of the generator(s).
    """
    rates = np.abs(np.linalg.eigvals(L_off.matrix).real).ravel()
    rates = rates[rates > 1e-9 * rates.max()]
    return np.concatenate([[0.0], np.geomspace(1e-3 / rates.max(), 30.0 / rates.min(), samples)])


def relaxation_time(trace: TransientTrace, rtol: float = 1e-9) -> float:
    """1/e relaxation time of ``Im rho_21`` towards its RF-off value.

    Solves ``Im rho(tau) = Im rho_off + (Im rho_on - Im rho_off)/e`` at the
    first crossing, refined by bracketed root finding.
    """
    on, off = trace.on.imag, trace.off.imag
    span = on - off
    if abs(span) <= 1e-12 * max(1.0, abs(on)) or abs(span) < 1e-300:
        raise SolverError("on and off coherences coincide; relaxation time is undefined")
    thr = off + span / math.e
    g = trace.coherence.imag - thr
    s0 = np.sign(g[0])
    cross = np.flatnonzero(np.sign(g[1:]) != s0)
    if cross.size == 0:
        raise SolverError("trace never crosses the 1/e threshold; extend the time window")
    i = cross[0] + 1
    a, b = trace.times[i - 1], trace.times[i]
    if g[i] == 0:
        return float(b)
    if trace.evaluate is None:
        # Linear interpolation between samples.
        return float(a + (b - a) * g[i - 1] / (g[i - 1] - g[i]))
    f = lambda tt: float(trace.evaluate(tt).imag) - thr
    tau = brentq(f, a, b, xtol=1e-300, rtol=max(rtol, 4 * np.finfo(float).eps), maxiter=500)
    if abs(f(tau)) > 1e-6 * abs(span):
        raise SolverError("relaxation-time root did not converge")
    return float(tau)


def instantaneous_bandwidth(tau_f: float) -> float:
    """Baseband bandwidth ``1/(2 pi tau_f)`` in Hz."""
    if not tau_f > 0:
        raise ValueError("tau_f must be positive")
    return 1.0 / (2 * math.pi * tau_f)
