"""Hierarchical planning stack: hypernet-generated options, a learned
high-level transition model, and random-shooting MPC over a compositional
multi-rooms gridworld."""

__version__ = "0.1.0"
