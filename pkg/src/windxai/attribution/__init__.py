"""Exact Shapley attributions with domain-specific reference points."""
