"""Run the kregcore command line with ``python -m kregcore``."""
from kregcore.cli import main

main()
