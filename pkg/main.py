"""The main routine for kregcore, to be run from the command line.

    python main.py build --method ga --gamma 2 --in fig2.csv
"""
import sys

from kregcore.cli import run

if __name__ == '__main__':
    sys.exit(run())
