"""Monte Carlo block error rate of uncoded 16-QAM over Rayleigh block fading.

Compares the pilot-based and perfect-CSI detectors against the closed-form
AWGN curve, showing the diversity loss of fading.

Run with ``python3 demos/bler_waterfall.py``.
"""
import math

from scipy.special import erfc

from raqr.link import FadingModel, ModemConfig, bler_simulation

modem = ModemConfig(block_count=400, seed=2024)
print(f"{'SNR dB':>7s} {'AWGN (closed)':>14s} {'Rayleigh pilot':>15s} {'Rayleigh CSI':>13s}")
for snr_db in range(10, 42, 4):
    g = 10 ** (snr_db / 10)
    p = 0.75 * erfc(math.sqrt(g / 10))
    awgn = 1 - (1 - p) ** (2 * 255)
    pilot = bler_simulation(modem, FadingModel("rayleigh"), g).bler
    csi = bler_simulation(modem, FadingModel("rayleigh", perfect_csi=True), g).bler
    print(f"{snr_db:7d} {awgn:14.4f} {pilot:15.4f} {csi:13.4f}")
