"""Repair missing AIS ship attributes with CRBM-encoded trace windows and
estimate the exhaust emissions they account for."""

__version__ = "0.1.0"
