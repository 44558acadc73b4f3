"""Geometric Lévy models: exponents, power-payoff pricing, recovery up to gauge, MC oracle."""

__version__ = "0.1.0"
