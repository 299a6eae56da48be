"""Allow running as `python -m src`."""
import sys

from .main import main

sys.exit(main())
