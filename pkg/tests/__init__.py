"""Test suite for Dephasing Mixtures."""
