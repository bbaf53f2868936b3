"""
Measure how often adversarial forks get past the verifier.
"""

import sys

from flyclient_sim.commands import BenchSoundness


def main():
    sys.exit(BenchSoundness().run())


if __name__ == "__main__":
    main()
