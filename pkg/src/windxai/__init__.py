"""Wind turbine power curve models with physically meaningful attributions."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("windxai")
except PackageNotFoundError:  # pragma: no cover - source checkout
    __version__ = "0.1.0"
