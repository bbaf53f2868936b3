"""
Compute optimal (c, L) verifier parameters for an adversary budget.
"""

import sys

from flyclient_sim.commands import ParamsSolve


def main():
    sys.exit(ParamsSolve().run())


if __name__ == "__main__":
    main()
