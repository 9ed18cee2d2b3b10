"""Trainable power curve regressors behind a uniform prediction contract."""
