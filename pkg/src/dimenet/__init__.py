"""Directional message passing neural network for molecules."""
