"""Truncated versus full Heisenberg evolution for growing balls around Y, against the quasi-locality bound."""
import sys

from _common import main

if __name__ == "__main__":
    sys.exit(main("quasilocal_chain8.toml", "quasilocal",
                  ["radius", "D", "duration", "measured", "bound", "status"], __doc__))
