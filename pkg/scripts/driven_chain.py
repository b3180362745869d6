"""Expectation values of a periodically driven damped chain started in the all-excited state."""
import sys

from _common import main

if __name__ == "__main__":
    sys.exit(main("simulate_chain6.toml", "simulate", ["t", "observable", "expectation", "trace"], __doc__))
