"""Module entry point for `python -m waferspr`."""

import sys

from .cli import main

sys.exit(main())
