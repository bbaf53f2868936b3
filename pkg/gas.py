"""
Estimate the calldata gas cost of submitting a proof.
"""

import sys

from flyclient_sim.commands import Gas


def main():
    sys.exit(Gas().run())


if __name__ == "__main__":
    main()
