"""Light-cone Trotter circuit error over a dt-halving sweep, against the circuit error bound.

Pass --config configs/trotter_quench.toml for the time-dependent, averaged variant.
"""
import sys

from _common import main

if __name__ == "__main__":
    sys.exit(main("trotter_chain8.toml", "trotter",
                  ["dt", "N", "observed_sup", "bound", "ratio_to_previous"], __doc__))
