"""Temperature-aware VDC embedding on a VL2-style data center."""

__version__ = "0.1.0"
