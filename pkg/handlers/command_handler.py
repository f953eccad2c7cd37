from config import INVALID_SETTINGS, get_logger
from config.run_config import RunConfig
from utils.errors import InvalidParameterError, ViewQualityError

from handlers.commands.compute_commands import (
    handle_compute_command,
    handle_batch_command,
    handle_render_command,
)
from handlers.commands.optimize_commands import (
    handle_optimize_command,
    handle_evaluate_command,
)
from handlers.commands.analysis_commands import (
    handle_compare_command,
    handle_heatmap_command,
)

logger = get_logger("commands")

EXIT_OK = 0
EXIT_INTERNAL = 3


def handle_command(args) -> int:
    """
    Validate the run configuration and dispatch a parsed subcommand.

    Library errors are logged here and turned into exit codes:
    0 success, 1 IO/parse, 2 configuration, 3 internal.

    Returns:
        Process exit code
    """
    command = args.command
    try:
        if INVALID_SETTINGS:
            raise InvalidParameterError(f"Bad environment settings: {'; '.join(INVALID_SETTINGS)}")
        config = RunConfig.from_args(args).validate()
        logger.info(f"CLI: {command} with {config.to_dict()}")

        if command == "compute":
            return handle_compute_command(args, config)
        elif command == "batch":
            return handle_batch_command(args, config)
        elif command == "render":
            return handle_render_command(args, config)
        elif command == "optimize":
            return handle_optimize_command(args, config)
        elif command == "evaluate":
            return handle_evaluate_command(args, config)
        elif command == "compare":
            return handle_compare_command(args, config)
        elif command == "heatmap":
            return handle_heatmap_command(args, config)

        logger.error(f"CLI_ERROR: Unknown command '{command}'")
        return EXIT_INTERNAL
    except ViewQualityError as e:
        logger.error(f"CLI_ERROR: {command} failed ({type(e).__name__}): {e}")
        return e.exit_code
    except Exception as e:
        logger.exception(f"CLI_ERROR: Unexpected error in {command}: {e}")
        return EXIT_INTERNAL
