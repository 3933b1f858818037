"""Single source of truth for application version."""

__version__ = "0.1.0"
