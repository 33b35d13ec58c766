"""Dephasing mixtures - realisations and divisibility of mixed Pauli dephasing dynamics."""

__version__ = "0.1.0"
