"""Single-shot dispersive parity measurement: circuit models, coupler elimination,
n-body dispersive shifts, driven gate simulation and scoring."""

__version__ = "0.1.0"
