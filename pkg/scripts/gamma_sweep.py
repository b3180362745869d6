"""Lieb-Robinson ratios across damping strengths; points run in parallel with --jobs."""
import sys

from _common import main

if __name__ == "__main__":
    sys.exit(main("sweep_gamma.toml", "sweep", ["sweep_value", "duration", "measured", "bound", "ratio"], __doc__))
