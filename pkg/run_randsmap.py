#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Launcher for the RANDSMAP command line

    python run_randsmap.py gen --benchmark lwr --traj 10 --snaps 50
    python run_randsmap.py repro --benchmark swiss --scale 1.0
"""
import sys

from src.cli import main

if __name__ == "__main__":
    sys.exit(main())
