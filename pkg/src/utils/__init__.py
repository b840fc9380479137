"""
Utilities package: helpers and logging configuration.
"""

from src.utils.logging_config import configure_logging

__all__ = ["configure_logging"]
