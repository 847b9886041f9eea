"""Vetting pipeline, simulator and runtime guardian for third-party vehicle apps."""

__version__ = "0.1.0"

# the episode loop imports the watchdog, which imports sim.dynamics; loading
# sim first keeps that cycle well ordered whichever module is imported first
from . import sim as _sim  # noqa: E402,F401
