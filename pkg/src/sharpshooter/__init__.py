"""Counterfactual explanations by latent interpolation between two VAEs."""

__version__ = "0.1.0"
