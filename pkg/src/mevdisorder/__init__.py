"""Entropy formulation of MEV on a two-pool AMM."""
