from __future__ import annotations

import json
import os

import filelock

from config import LOCK_TIMEOUT, get_logger
from utils.errors import ArtifactFormatError, ArtifactNotFoundError, InputError

logger = get_logger("storage")


def _lock_for(path: str) -> filelock.FileLock:
    return filelock.FileLock(f"{path}.lock", timeout=LOCK_TIMEOUT)


def write_json(path: str, data: dict) -> None:
    """
    Write a JSON document atomically under a file lock.

    The document goes to a temporary sibling first and is renamed into place,
    so readers never see a half-written file. NaN and Inf are refused.

    Args:
        path: Destination file
        data: JSON-serializable dictionary
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    temporary = f"{path}.tmp"

    try:
        with _lock_for(path):
            with open(temporary, "w") as f:
                json.dump(data, f, indent=2, allow_nan=False)
                f.write("\n")
            os.replace(temporary, path)
    except filelock.Timeout:
        logger.error(f"STORAGE_ERROR: Timeout acquiring lock for {path}")
        raise InputError(f"Timeout acquiring file lock for {path} - file may be in use")
    except ValueError as e:
        # allow_nan=False
        raise ArtifactFormatError(f"Refusing to write non-finite values to {path}: {e}") from e
    except OSError as e:
        logger.error(f"STORAGE_ERROR: Failed to write {path}: {e}")
        raise InputError(f"Cannot write {path}: {e}") from e
    finally:
        if os.path.exists(temporary):
            os.remove(temporary)

    logger.info(f"STORAGE: Saved {path}")


def read_json(path: str) -> dict:
    """
    Read a JSON document under a file lock.

    Returns:
        Parsed dictionary
    """
    if not os.path.isfile(path):
        raise ArtifactNotFoundError(f"File not found: {path}")

    try:
        with _lock_for(path):
            with open(path, "r") as f:
                data = json.load(f)
    except filelock.Timeout:
        logger.error(f"STORAGE_ERROR: Timeout acquiring lock for {path}")
        raise InputError(f"Timeout acquiring file lock for {path} - file may be in use")
    except json.JSONDecodeError as e:
        logger.error(f"STORAGE_ERROR: Invalid JSON in {path}: {e}")
        raise ArtifactFormatError(f"Invalid JSON in {path}: {e}") from e
    except OSError as e:
        raise InputError(f"Cannot read {path}: {e}") from e

    if not isinstance(data, dict):
        raise ArtifactFormatError(f"{path} does not contain a JSON object")
    logger.debug(f"STORAGE: Loaded {path}")
    return data


def remove_lock_files(directory: str) -> int:
    """
    Remove stale *.lock files left next to artefacts in a directory

    Returns:
        Number of removed lock files
    """
    removed = 0
    try:
        for filename in os.listdir(directory):
            if filename.endswith(".lock"):
                os.remove(os.path.join(directory, filename))
                removed += 1
    except OSError as e:
        logger.error(f"STORAGE_ERROR: Failed to clean up lock files in {directory}: {e}")
    if removed:
        logger.debug(f"CLEANUP: Removed {removed} lock files from {directory}")
    return removed


def discard_lock(path: str) -> None:
    """Remove the lock file of one artefact once nothing else is writing it"""
    try:
        os.remove(f"{path}.lock")
    except FileNotFoundError:
        pass
    except OSError as e:
        logger.debug(f"CLEANUP: Could not remove lock for {path}: {e}")
