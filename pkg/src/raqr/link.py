"""Link budgets, SNR for atomic and classical receivers, ergodic capacity and
a block-fading 16-QAM Monte Carlo BLER engine."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.constants import c, k as k_B

from .receiver import NoiseBudget

__all__ = [
    "LinkScenario",
    "ClassicalReceiver",
    "ModemConfig",
    "FadingModel",
    "BlerResult",
    "db",
    "from_db",
    "raqr_received_power",
    "raqr_snr",
    "classical_snr",
    "snr_gain_prediction",
    "ergodic_capacity",
    "qam16_constellation",
    "bler_simulation",
    "butterworth_response",
]


def db(x):
    """Power ratio to dB."""
    return 10 * np.log10(x)


def from_db(x):
    """dB to power ratio."""
    return 10 ** (np.asarray(x, dtype=float) / 10)


@dataclass(frozen=True)
class LinkScenario:
    """Transmitter/receiver geometry and bandwidths (SI, linear gains)."""

    tx_power: float
    tx_gain: float
    distance: float
    carrier: float
    bandwidth_raqr: float
    bandwidth_cl: float
    T_env: float = 290.0

    def __post_init__(self):
        for name in ("tx_power", "tx_gain", "distance", "carrier", "bandwidth_raqr", "bandwidth_cl", "T_env"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def wavelength(self) -> float:
        return c / self.carrier

    def power_density(self, h=1.0):
        """Incident power density ``P_t G_t |h|^2 / (4 pi L^2)`` (W/m^2)."""
        return self.tx_power * self.tx_gain * np.abs(h) ** 2 / (4 * math.pi * self.distance**2)


@dataclass(frozen=True)
class ClassicalReceiver:
    """Conductor-antenna receiver: gains and noise factor are linear."""

    rx_gain: float = float(from_db(5.5))
    lna_gain: float = float(from_db(60.0))
    noise_factor: float = 6.0
    filter_order: int = 4

    def __post_init__(self):
        if self.noise_factor < 1:
            raise ValueError("noise factor must be >= 1")
        if not (self.rx_gain > 0 and self.lna_gain > 0):
            raise ValueError("gains must be positive")
        if self.filter_order < 1:
            raise ValueError("filter order must be >= 1")


@dataclass(frozen=True)
class ModemConfig:
    """Uncoded block transmission: 16-QAM, one pilot per block."""

    block_length: int = 256
    block_count: int = 800
    pilots: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.block_length < self.pilots + 1:
            raise ValueError("block length must exceed the pilot count")
        if self.pilots < 1 or self.block_count < 1:
            raise ValueError("need at least one pilot and one block")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class FadingModel:
    """Channel model.

    ``kind="rayleigh"``: one ``CN(0,1)`` tap per block.  ``kind="awgn"``:
    unit tap.  ``perfect_csi`` bypasses the pilot estimate.
    """

    kind: str = "rayleigh"
    perfect_csi: bool = False

    def __post_init__(self):
        if self.kind not in ("rayleigh", "awgn"):
            raise ValueError("fading kind must be 'rayleigh' or 'awgn'")


@dataclass(frozen=True)
class BlerResult:
    bler: float
    errors: int
    blocks: int
    channel_power: float  # empirical E|h|^2 over the run


def raqr_received_power(scenario: LinkScenario, beta: float, h=1.0, Phi: complex = 1.0):
    """Baseband signal power ``beta |Phi|^2 P_t G_t |h|^2 / (4 pi L^2)``."""
    return beta * abs(Phi) ** 2 * scenario.power_density(h)


def raqr_snr(P_S, budget: NoiseBudget):
    """``P_S / (N_PSN + N_QPN + N_ITN)``."""
    total = budget.total
    if not total > 0:
        raise ValueError("total noise power is zero; check the receiver configuration")
    return P_S / total


def classical_snr(scenario: LinkScenario, rx: ClassicalReceiver):
    """``G_t G_r lambda^2 P_t / ((4 pi L)^2 k_B T F B_CL)``.

    The LNA gain scales signal and noise alike and cancels.
    """
    lam = scenario.wavelength
    return (scenario.tx_gain * rx.rx_gain * lam**2 * scenario.tx_power
            / ((4 * math.pi * scenario.distance) ** 2 * k_B * scenario.T_env * rx.noise_factor
               * scenario.bandwidth_cl))


def snr_gain_prediction(gamma_eit_4l, gamma_eit_5l, probe_power_ratio=1.0, regime: str = "PSL"):
    """Predicted 3C5L/2C4L SNR ratio.

    ``PSL``: ``(P0_5L/P0_4L) (Gamma_4L/Gamma_5L)^4``; ``SQL``:
    ``Gamma_4L/Gamma_5L``.
    """
    r = np.asarray(gamma_eit_4l, dtype=float) / np.asarray(gamma_eit_5l, dtype=float)
    if regime.upper() == "PSL":
        return probe_power_ratio * r**4
    if regime.upper() == "SQL":
        return r
    raise ValueError("regime must be 'PSL' or 'SQL'")


def ergodic_capacity(gamma, bandwidth, n_samples: int = 10**6, seed: int = 0):
    """``B E[log2(1 + gamma |h|^2)]`` over Rayleigh draws (bit/s).

    ``gamma`` may be an array; the same draws are reused for every entry
    so the result is monotone in ``gamma``.
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0xCA9A])))
    g2 = rng.exponential(1.0, n_samples)
    gam = np.asarray(gamma, dtype=float)
    out = np.array([np.mean(np.log2(1 + gv * g2)) for gv in gam.ravel()]).reshape(gam.shape)
    return bandwidth * (out[()] if out.ndim == 0 else out)


def qam16_constellation() -> tuple[np.ndarray, np.ndarray]:
    """Unit-average-power Gray-mapped 16-QAM.

    Returns ``(points, bits)`` where ``bits[k]`` is the 4-bit label of
    ``points[k]``; adjacent points differ in exactly one bit.
    """
    gray = np.array([0, 1, 3, 2])  # 2-bit Gray code along each axis
    levels = np.array([-3.0, -1.0, 1.0, 3.0])
    pts, labels = [], []
    for i in range(4):
        for q in range(4):
            pts.append(levels[i] + 1j * levels[q])
            labels.append((gray[i] << 2) | gray[q])
    pts = np.array(pts) / math.sqrt(10.0)
    bits = np.array([[(lab >> b) & 1 for b in (3, 2, 1, 0)] for lab in labels])
    return pts, bits


_QAM, _QAM_BITS = qam16_constellation()
_PILOT = (1 + 1j) / math.sqrt(2)


def _block_stream(seed: int, block: int) -> np.random.Generator:
    # Counter-based generator keyed by (seed, block): order-independent.
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block])))


def _simulate_block(block: int, modem: ModemConfig, fading: FadingModel, noise_var: float):
    rng = _block_stream(modem.seed, block)
    n_data = modem.block_length - modem.pilots
    if fading.kind == "rayleigh":
        h = (rng.standard_normal() + 1j * rng.standard_normal()) / math.sqrt(2)
    else:
        h = 1.0 + 0j
    idx = rng.integers(0, 16, n_data)
    s = np.concatenate([np.full(modem.pilots, _PILOT), _QAM[idx]])
    w = (rng.standard_normal(s.size) + 1j * rng.standard_normal(s.size)) * math.sqrt(noise_var / 2)
    y = h * s + w
    if fading.perfect_csi:
        h_hat = h
    else:
        h_hat = np.mean(y[: modem.pilots] / s[: modem.pilots])  # least-squares estimate
    # Per-symbol LMMSE equaliser followed by the usual bias removal so that
    # decisions use the unbiased estimate of the transmitted symbol.
    g = np.conj(h_hat) / (abs(h_hat) ** 2 + noise_var)
    bias = abs(h_hat) ** 2 / (abs(h_hat) ** 2 + noise_var)
    z = g * y[modem.pilots:] / bias if bias > 0 else np.zeros(n_data, complex)
    decided = np.argmin(np.abs(z[:, None] - _QAM[None, :]), axis=1)
    return bool(np.any(decided != idx)), abs(h) ** 2


def bler_simulation(modem: ModemConfig, fading: FadingModel, gamma: float, jobs: int = 1) -> BlerResult:
    """Monte Carlo block error rate at average SNR ``gamma`` (linear).

    Each block draws its channel, one known pilot and ``block_length - 1``
    16-QAM data symbols from its own counter-based stream keyed by
    ``(seed, block)``, so serial and threaded runs agree exactly.  A block
    is in error if any data symbol decision is wrong.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    noise_var = 1.0 / gamma
    blocks = range(modem.block_count)
    run = lambda b: _simulate_block(b, modem, fading, noise_var)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, blocks))
    else:
        results = [run(b) for b in blocks]
    errors = sum(r[0] for r in results)
    power = float(np.mean([r[1] for r in results]))
    return BlerResult(errors / modem.block_count, int(errors), modem.block_count, power)


def butterworth_response(B_cl, order: int, df):
    """Butterworth magnitude ``1/sqrt(1 + (df/B)^(2 order))``."""
    if order < 1:
        raise ValueError("order must be >= 1")
    return 1.0 / np.sqrt(1.0 + (np.asarray(df, dtype=float) / B_cl) ** (2 * order))
