"""Search-based generation and cross-simulator replay of pedestrian-warning test scenarios."""

__version__ = "0.1.0"
