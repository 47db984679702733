#!/usr/bin/env python3
"""Launcher for the rnls-lab command line.

    python run_lab.py classify --d 1 --k 0 --p 6
    python run_lab.py masscurve --d 1 --k 1 --p 6 --omega-min 0.01 --omega-max 2 --num 200
    python run_lab.py sweep --ds 1 --ks 0,1 --ps 2,6 --omegas 0.3,1,5 --jobs 4
"""

import sys

from rnls_lab.main import run

if __name__ == "__main__":
    sys.exit(run(sys.argv[1:]))
