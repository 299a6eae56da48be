"""Evaluation metrics: Parzen log-likelihood, FID and the FactorVAE score."""
