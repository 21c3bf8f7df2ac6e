"""Why the three-colour ladder has a narrower EIT window.

Prints the residual Doppler width, the transit and dephasing terms and the
total EIT linewidth of both shipped presets, then the analytic transconductance
|chi'_s| that sets the receiver gain.

Run with ``python3 demos/linewidth_budget.py``.
"""
import math

from raqr.atomdata import load_parameter_table
from raqr.pipeline import Receiver

TWO_PI = 2 * math.pi

for name in ("cs_2c4l", "cs_3c5l"):
    rx = Receiver(load_parameter_table(name))
    c = rx.linewidth_components()
    print(f"{name} ({rx.table.architecture})")
    print(f"  residual Doppler width  {c.gamma_res / TWO_PI / 1e3:10.2f} kHz")
    print(f"  Autler-Townes term      {c.omega_at / c.gamma2 / TWO_PI / 1e3:10.2f} kHz")
    print(f"  transit                 {c.transit / TWO_PI / 1e3:10.2f} kHz")
    print(f"  dephasing               {c.dephasing / TWO_PI / 1e3:10.2f} kHz")
    print(f"  Gamma_EIT / 2 pi        {rx.gamma_eit() / TWO_PI / 1e6:10.3f} MHz")
    resp = rx.response("analytic")
    print(f"  |chi'_s| (Doppler avg)  {abs(resp.chi_prime):10.3e} s/rad")
    print()
