"""Command line entry point, runs one subcommand and exits with its status"""
import logging
import sys

from report_tools.commands import run


def main() -> None:
    """Configure logging on stderr and run the command line given to the interpreter"""
    logging.basicConfig(
        level=logging.INFO, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )
    code, _ = run(sys.argv[1:])
    sys.exit(code)


if __name__ == "__main__":
    main()
