"""
Services module for frameprobe.
Frame grammar, error taxonomy, oracles, perturbation, confidence estimation
and corpus I/O.
"""

__version__ = "0.1.0"
