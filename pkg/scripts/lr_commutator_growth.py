"""Commutator norm ||[O_X, tau(r,t) O_Y]|| on the damped Ising chain against the Lieb-Robinson bound."""
import sys

from _common import main

if __name__ == "__main__":
    sys.exit(main("lr_chain8.toml", "lr", ["x_sites", "duration", "measured", "bound", "ratio"], __doc__))
