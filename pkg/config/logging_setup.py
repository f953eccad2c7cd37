import logging
import os
import sys

from config.settings import LOG_FILE, LOG_LEVEL

# ----- LOGGING CONFIGURATION -----

# Set up logging formatter
log_formatter = logging.Formatter("%(asctime)s - [%(levelname)s] %(name)s: %(message)s")

# Logs always go to standard error; standard output is reserved for data
stream_handler = logging.StreamHandler(sys.stderr)
stream_handler.setFormatter(log_formatter)

# Configure root logger
root_logger = logging.getLogger("viewquality")
root_logger.setLevel(getattr(logging, LOG_LEVEL, logging.INFO))
root_logger.addHandler(stream_handler)
root_logger.propagate = False

# Optional file handler
file_handler = None
if LOG_FILE:
    log_dir = os.path.dirname(LOG_FILE)
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
    file_handler = logging.FileHandler(LOG_FILE)
    file_handler.setFormatter(log_formatter)
    root_logger.addHandler(file_handler)


# Function to get child loggers
def get_logger(name):
    """
    Get a properly configured logger that inherits from the root logger
    without adding duplicate handlers.

    Args:
        name: Logger name suffix (e.g., 'mesh' becomes 'viewquality.mesh')

    Returns:
        Configured logger instance
    """
    if not name.startswith("viewquality."):
        name = f"viewquality.{name}"
    return logging.getLogger(name)


def set_level(level_name):
    """Change the level of the package logger (used by the --log-level flag)"""
    root_logger.setLevel(getattr(logging, level_name.upper(), logging.INFO))


# Create the main logger
logger = get_logger("main")
