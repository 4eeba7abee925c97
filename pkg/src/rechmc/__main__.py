"""``python -m rechmc``."""

import sys

from .cli import main

sys.exit(main())
