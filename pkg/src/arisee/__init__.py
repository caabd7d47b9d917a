"""Energy-efficient multi-ARIS downlink optimization."""
__version__ = "0.1.0"
