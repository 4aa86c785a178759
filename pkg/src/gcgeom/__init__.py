"""Chart-level numerical generalized complex geometry and twistor integrability checks."""

__version__ = "0.1.0"
