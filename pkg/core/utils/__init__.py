"""
Utility modules for logging, error handling, and configuration.
"""
from .logging_utils import get_logger, set_level
from .error_handler import ErrorHandler, ResourceManagerError, ConfigError

__all__ = ['get_logger', 'set_level', 'ErrorHandler', 'ResourceManagerError', 'ConfigError']
