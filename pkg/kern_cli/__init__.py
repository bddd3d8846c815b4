#!/usr/bin/python3
import sys
import traceback
from typing import List, Optional

from loguru import logger

from kern_cli.arguments import apply_overrides, parse_arguments
from kern_cli.commands import COMMANDS, CommandRun
from kern_core.app_paths import LOG_FILE_NAME, MANIFEST_FILE_NAME, get_output_file_path
from kern_core.configuration.json_config import JsonConfig
from kern_core.exceptions.ContractException import ContractException
from kern_core.exceptions.DimensionException import DimensionException
from kern_core.exceptions.FormatException import FormatException
from kern_core.exceptions.NumericalException import NumericalException
from kern_core.exceptions.ValidationException import ValidationException
from kern_core.storage.manifest_storage import ManifestStorage
from kern_core.tensor import set_debug_mode

EXIT_OK = 0
EXIT_FORMAT = 2
EXIT_VALIDATION = 3
EXIT_NUMERICAL = 4

FILE_LOG_FORMAT = "{time:YYYY-MM-DD HH:mm:ss.SSS}" \
    + "| {level: <8} | {name} | {message} | {exception}"


def handle_exception(exc_type, exc_value, exc_traceback):
    """ catch unhandled exceptions """

    # KeyboardInterrupt is a special case.
    if issubclass(exc_type, KeyboardInterrupt):
        return

    message = "Closed due to an error. This is the full error report: {0}"\
        .format(traceback.format_exception(exc_type, exc_value, exc_traceback))
    message = str.replace(message, "\\n", "\n")

    logger.error(message)

    sys.exit(1)


def setup_logging(level: str) -> List[int]:
    logger.remove()
    return [logger.add(sys.stderr, level=level)]


def add_log_file(out_dir: str) -> int:
    return logger.add(get_output_file_path(out_dir, LOG_FILE_NAME), level="DEBUG", format=FILE_LOG_FORMAT)


def run_cli(argv: Optional[List[str]] = None) -> int:
    args = parse_arguments(argv)
    sinks = setup_logging(args.log_level)

    try:
        if args.out_dir is not None:
            sinks.append(add_log_file(args.out_dir))

        config = JsonConfig(args.config)
        config.load()
        apply_overrides(config, args)
        set_debug_mode(config.runtime.debug)

        run = CommandRun(args.command, args, config)
        COMMANDS[args.command](run)

        manifest = run.finish()
        ManifestStorage(get_output_file_path(args.out_dir, MANIFEST_FILE_NAME)).save(manifest)
        logger.info(f"'{args.command}' finished in {manifest.wall_clock_seconds:.1f} s, outputs in '{args.out_dir}'")

        return EXIT_OK
    except FormatException as e:
        logger.error(f"Parse error: {e.message}")
        return EXIT_FORMAT
    except (ValidationException, DimensionException, ContractException) as e:
        logger.error(f"Validation error: {e.message}")
        return EXIT_VALIDATION
    except NumericalException as e:
        logger.error(f"Numerical failure: {e.message}")
        return EXIT_NUMERICAL
    finally:
        set_debug_mode(False)
        for sink in sinks:
            logger.remove(sink)


def start_cli():
    sys.excepthook = handle_exception
    sys.exit(run_cli())
