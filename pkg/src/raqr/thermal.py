"""Thermal-velocity helpers shared by the analytic and exact backends."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.constants import k as k_B
from scipy.special import erf

__all__ = ["thermal_velocity", "VelocityGrid", "QuadratureWarning"]


class QuadratureWarning(UserWarning):
    """The discrete Maxwell--Boltzmann weights miss the expected mass."""


def thermal_velocity(temperature: float, mass: float) -> float:
    """Most probable speed ``sqrt(2 k_B T / m)`` in m/s."""
    if temperature < 0:
        raise ValueError("temperature must be non-negative")
    return math.sqrt(2.0 * k_B * temperature / mass)


@dataclass(frozen=True)
class VelocityGrid:
    """Uniform longitudinal velocity grid with Maxwell--Boltzmann weights.

    The grid spans ``[-span*v_th, span*v_th]`` with an odd number of classes,
    so ``v = 0`` is always a node.  Weights are ``P(v_k) dv`` with

    ``P(v) = exp(-v^2/v_th^2) / (sqrt(pi) v_th)``

    and are *not* renormalised: for ``span = 3`` they sum to ``erf(3)``.

    At ``v_th = 0`` the grid collapses to the single class ``v = 0`` with
    unit weight (delta-distribution limit).
    """

    v_th: float
    count: int = 301
    span: float = 3.0

    def __post_init__(self):
        if self.count < 1 or self.count % 2 == 0:
            raise ValueError(f"velocity grid size must be odd, got {self.count}")
        if self.v_th < 0 or self.span <= 0:
            raise ValueError("v_th must be >= 0 and span > 0")

    @classmethod
    def thermal(cls, temperature: float, mass: float, count: int = 301, span: float = 3.0) -> "VelocityGrid":
        return cls(thermal_velocity(temperature, mass), count, span)

    @classmethod
    def resolving(cls, v_th: float, linewidth: float, wavenumber: float, span: float = 3.0,
                  points_per_width: float = 4.0, max_count: int = 200_001) -> "VelocityGrid":
        """Grid fine enough that a Doppler-shifted line of ``linewidth``
        (rad/s) is sampled by ``points_per_width`` classes.

        ``wavenumber`` is the effective residual wavevector that maps a
        velocity step to a detuning step (``dDelta = k dv``).
        """
        if v_th == 0 or wavenumber == 0:
            return cls(v_th, 301, span)
        dv = linewidth / (abs(wavenumber) * points_per_width)
        n = int(math.ceil(2 * span * v_th / dv)) + 1
        n = max(301, min(n | 1, max_count | 1))
        return cls(v_th, n, span)

    @property
    def degenerate(self) -> bool:
        return self.v_th == 0.0

    @property
    def velocities(self) -> np.ndarray:
        if self.degenerate:
            return np.zeros(1)
        return np.linspace(-self.span * self.v_th, self.span * self.v_th, self.count)

    @property
    def step(self) -> float:
        if self.degenerate or self.count == 1:
            return 0.0
        return 2 * self.span * self.v_th / (self.count - 1)

    @property
    def weights(self) -> np.ndarray:
        if self.degenerate:
            return np.ones(1)
        v = self.velocities
        return np.exp(-((v / self.v_th) ** 2)) / (math.sqrt(math.pi) * self.v_th) * self.step

    def check_weights(self, tol: float = 1e-3) -> float:
        """Return the weight sum, warning if it deviates from ``erf(span)``."""
        total = float(self.weights.sum())
        expected = 1.0 if self.degenerate else float(erf(self.span))
        if abs(total - expected) > tol:
            warnings.warn(
                f"velocity weights sum to {total:.6f}, expected {expected:.6f}; refine the grid",
                QuadratureWarning,
                stacklevel=2,
            )
        return total
