"""Time-delay reservoir computing: simulation, VAR(1) surrogate and memory capacity."""

__version__ = "0.1.0"
