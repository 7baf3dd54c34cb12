"""Pulse-level simulation of EIT-based CNOT gates with a transported control atom."""
