"""
Benchmark proof sizes over repeated verification runs.
"""

import sys

from flyclient_sim.commands import BenchProofSize


def main():
    sys.exit(BenchProofSize().run())


if __name__ == "__main__":
    main()
