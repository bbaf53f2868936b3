"""
Forge an adversarial fork of a saved chain.
"""

import sys

from flyclient_sim.commands import ChainFork


def main():
    sys.exit(ChainFork().run())


if __name__ == "__main__":
    main()
