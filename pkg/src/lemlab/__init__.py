"""Random polynomial lemniscates: sampling, critical points, component counts."""

__version__ = "0.1.0"
