"""
Mine a synthetic honest chain into a directory.
"""

import sys

from flyclient_sim.commands import ChainGen


def main():
    sys.exit(ChainGen().run())


if __name__ == "__main__":
    main()
