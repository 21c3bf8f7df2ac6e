"""SNR of both atomic receivers and a conventional receiver vs transmit power.

Uses the shipped ``fig_snr`` scenario: the atomic SNR grows 10 dB per decade
until the signal Rabi frequency reaches the linear bound, after which it is
clamped flat.

Run with ``python3 demos/snr_vs_power.py``.
"""
import numpy as np

from raqr.cli import load_scenario, run_scenario

table = run_scenario(load_scenario("fig_snr"))
print("  ".join(f"{c:>16s}" for c in table.columns))
for row in table.rows:
    print("  ".join(f"{x:16.4g}" for x in row))

cols = list(table.columns)
classical = table.rows[:, cols.index("snr_classical_dB")]
for name in ("cs_2c4l", "cs_3c5l"):
    gain = table.rows[:, cols.index(f"snr_{name}_dB")] - classical
    print(f"\nSNR gain of {name} over the classical receiver (dB):")
    print(np.round(gain, 2))
