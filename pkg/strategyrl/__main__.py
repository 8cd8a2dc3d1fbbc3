"""Run the command line interface with python -m strategyrl."""

import sys

from .cli import main

sys.exit(main())
