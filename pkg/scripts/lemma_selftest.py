"""Series lemma grids, norm duality and CPT spot checks."""
import sys

from _common import main

if __name__ == "__main__":
    sys.exit(main("selftest.toml", "selftest", ["check", "case", "value", "reference", "passed"], __doc__))
