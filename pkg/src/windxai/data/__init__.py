"""Ingestion, validation, splitting, augmentation and synthesis of SCADA data."""
