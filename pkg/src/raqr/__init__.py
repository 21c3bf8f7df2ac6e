"""Rydberg atomic quantum receiver models.

Submodules
----------
atomdata     species constants, quantum defects, parameter presets
analytic     weak-probe continued fractions, transconductance, linewidths
liouvillian  exact Lindblad steady states, Doppler averaging, transients
receiver     superheterodyne optical readout chain and noise budget
link         link budgets, SNR, capacity and the BLER Monte Carlo
cli          scenario-driven command-line front end
"""
__version__ = "0.1.0"
