"""
Serve a saved chain to FlyClient verifiers over JSON-RPC.
"""

import sys

from flyclient_sim.commands import ProverServe


def main():
    sys.exit(ProverServe().run())


if __name__ == "__main__":
    main()
