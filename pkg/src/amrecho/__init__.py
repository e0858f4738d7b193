"""Raman echo quantum memory with an active rephasing control pulse.

Spectral (frequency-domain) and time-domain Maxwell-Bloch solvers for the
write, storage, rephase and read stages, plus the metrics used to compare
the retrieved echo with the input.
"""

__version__ = "0.1.0"
