"""screenforge: synthetic web-UI screenshot datasets for visual PII detection."""

__version__ = "0.1.0"
