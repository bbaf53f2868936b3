"""
Run the FlyClient verifier against one or more provers.
"""

import sys

from flyclient_sim.commands import Verify


def main():
    sys.exit(Verify().run())


if __name__ == "__main__":
    main()
