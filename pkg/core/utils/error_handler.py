"""
Centralized error handling utilities.
Follows DRY principle - one exception hierarchy and consistent reporting across commands.
"""
import sys
from typing import Any, Callable, List, Optional

from core.utils.logging_utils import get_logger

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


class ResourceManagerError(Exception):
    """Base class for every error raised by the simulator."""

    exit_code = EXIT_RUNTIME


class ConfigError(ResourceManagerError, ValueError):
    """Invalid configuration or command-line usage."""

    exit_code = EXIT_CONFIG

    def __init__(self, message: str, details: Optional[List[str]] = None):
        self.details = details or []
        if self.details:
            message = f"{message}: " + "; ".join(self.details)
        super().__init__(message)


class TraceFormatError(ResourceManagerError, ValueError):
    """Malformed trace input (bad header, row, value or ordering)."""

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TraceGapError(ResourceManagerError, ValueError):
    """A series is missing timestamps inside its span."""


class PredictorError(ResourceManagerError, ValueError):
    """Bad predictor input or use of an untrained predictor."""


class TrainingError(ResourceManagerError, ValueError):
    """Training could not run or diverged."""


class ClusteringError(ResourceManagerError, ValueError):
    """Invalid clustering request or a violated Lloyd invariant."""


class CapacityError(ResourceManagerError, ValueError):
    """Demand exceeds the largest VM instance in the catalog."""


class PlacementError(ResourceManagerError, ValueError):
    """Malformed allocation or placement request."""


class InfeasibleInstanceError(PlacementError):
    """VMs cannot be packed onto the server fleet."""


class ScenarioError(ResourceManagerError, ValueError):
    """Scenario inputs are inconsistent."""


class ReportWriteError(ResourceManagerError):
    """An output file could not be written."""


class ErrorHandler:
    """Centralized error handling with consistent patterns."""

    @staticmethod
    def exit_code_for(error: BaseException) -> int:
        if isinstance(error, ResourceManagerError):
            return error.exit_code
        if isinstance(error, (FileNotFoundError, PermissionError, IsADirectoryError)):
            return EXIT_CONFIG
        return EXIT_RUNTIME

    @staticmethod
    def handle_config_error(error: Exception) -> int:
        """Report a configuration problem naming each offending field."""
        logger.error(f"Configuration Error: {error}")
        ErrorHandler._echo(f"error: {error}")
        return EXIT_CONFIG

    @staticmethod
    def handle_runtime_error(error: Exception, user_message: str = None) -> int:
        """Report a failure that happened while a command was running."""
        message = user_message or f"error: {error}"
        logger.error(f"Runtime Error: {error}")
        ErrorHandler._echo(message)
        return ErrorHandler.exit_code_for(error)

    @staticmethod
    def handle(error: Exception) -> int:
        """Dispatch on the error family and return the process exit code."""
        if ErrorHandler.exit_code_for(error) == EXIT_CONFIG:
            return ErrorHandler.handle_config_error(error)
        return ErrorHandler.handle_runtime_error(error)

    @staticmethod
    def safe_execute(
        func: Callable,
        *args,
        error_message: str = None,
        fallback_value: Any = None,
        **kwargs
    ) -> Any:
        """
        Safely execute a function with automatic error handling.
        Returns fallback_value if a simulator error occurs.
        """
        try:
            return func(*args, **kwargs)
        except ResourceManagerError as e:
            logger.warning(f"Error in {getattr(func, '__name__', func)}: {e}")
            if error_message:
                ErrorHandler._echo(error_message)
            return fallback_value

    @staticmethod
    def log_and_display(
        message: str,
        level: str = "info",
        display_to_user: bool = True
    ) -> None:
        """
        Log a message and optionally echo it on stderr.

        Args:
            message: The message to log/display
            level: Log level ('info', 'warning', 'error')
            display_to_user: Whether to echo it on the terminal
        """
        log_func = getattr(logger, level.lower(), logger.info)
        log_func(message)
        if display_to_user:
            prefix = "" if level in ("info", "success") else f"{level}: "
            ErrorHandler._echo(f"{prefix}{message}")

    @staticmethod
    def format_validation_errors(errors: List[dict]) -> List[str]:
        """Turn pydantic error dicts into 'field.path: message' lines."""
        lines = []
        for err in errors:
            location = ".".join(str(part) for part in err.get("loc", ())) or "<root>"
            lines.append(f"{location}: {err.get('msg', 'invalid value')}")
        return lines

    @staticmethod
    def _echo(message: str) -> None:
        print(message, file=sys.stderr)
