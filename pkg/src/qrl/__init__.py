"""Simulation lab for quantum-enhanced reinforcement learning and metalearning."""

__version__ = "0.1.0"
