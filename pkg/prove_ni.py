"""
Write a non-interactive FlyClient proof for a saved chain.
"""

import sys

from flyclient_sim.commands import ProveNi


def main():
    sys.exit(ProveNi().run())


if __name__ == "__main__":
    main()
