"""EQM: bitstream-based video quality estimation."""

__version__ = "1.0.0"
