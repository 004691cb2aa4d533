"""Version information for gru-enhance."""

__version__ = "0.3.0"
