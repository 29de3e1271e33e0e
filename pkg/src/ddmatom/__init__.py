"""Discrete density matrix theory of heavy atoms in strong magnetic fields."""

__version__ = "0.1.0"
