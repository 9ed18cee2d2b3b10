"""Experiment harnesses built on models and attributions."""
