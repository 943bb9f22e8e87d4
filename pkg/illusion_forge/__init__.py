"""Geometric-illusion dataset generation, label-fusion training and analysis."""
