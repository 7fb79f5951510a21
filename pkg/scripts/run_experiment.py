"""Run one experiment kind with an optional config file.

    python3 scripts/run_experiment.py converge --config scripts/configs/converge_small.toml
"""
import sys

from boussinesq_lab.cli import main

if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
