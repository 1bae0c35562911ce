"""CLI entrypoints in spillseg namespace."""

import sys

from spillseg.interfaces.cli.bootstrap import main


def run():
    sys.exit(main())


__all__ = ["main", "run"]
