"""Data harvesting, validation and analytics workbench for e-commerce market data."""

__version__ = "0.1.0"
