"""Entry point for running the toolkit as a module."""

import sys

from .cli import main as cli_main


def main():
    """Synchronous entry point for the command-line interface."""
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
