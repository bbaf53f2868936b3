"""
Verify a non-interactive FlyClient proof file.
"""

import sys

from flyclient_sim.commands import VerifyNi


def main():
    sys.exit(VerifyNi().run())


if __name__ == "__main__":
    main()
