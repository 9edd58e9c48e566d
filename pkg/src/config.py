# -*- coding: utf-8 -*-
"""
Numerical defaults and tolerances for RANDSMAP
"""
import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Global seed fallback used when a command gets no --seed
RANDSMAP_SEED = int(os.getenv("RANDSMAP_SEED", "0"))

# Regularization and truncation
RANDSMAP_LAMBDA = float(os.getenv("RANDSMAP_LAMBDA", "1e-3"))
RANDSMAP_DELTA_S = float(os.getenv("RANDSMAP_DELTA_S", "1e-8"))

# k-NN convex interpolation solver
RANDSMAP_KNN_TOL = float(os.getenv("RANDSMAP_KNN_TOL", "1e-8"))
RANDSMAP_KNN_MAX_ITER = int(os.getenv("RANDSMAP_KNN_MAX_ITER", "500"))

# Eikonal solver (pedestrian model)
RANDSMAP_EIKONAL_TOL = float(os.getenv("RANDSMAP_EIKONAL_TOL", "1e-8"))
RANDSMAP_EIKONAL_MAX_SWEEPS = int(os.getenv("RANDSMAP_EIKONAL_MAX_SWEEPS", "200"))
RANDSMAP_SPEED_FLOOR = float(os.getenv("RANDSMAP_SPEED_FLOOR", "1e-10"))

# Multi-scale feature lower scale bound
MSRFF_SIGMA_LB = 0.001

# Runs
RANDSMAP_OUTPUT_DIR = os.getenv("RANDSMAP_OUTPUT_DIR", "output")
RANDSMAP_JOBS = int(os.getenv("RANDSMAP_JOBS", "1"))

# Unit roundoff used by the DDM truncation rule
UNIT_ROUNDOFF = 2.0 ** -53


def validate_environment():
    """Validate numerical settings coming from the environment"""
    positive_vars = {
        "RANDSMAP_DELTA_S": RANDSMAP_DELTA_S,
        "RANDSMAP_KNN_TOL": RANDSMAP_KNN_TOL,
        "RANDSMAP_KNN_MAX_ITER": RANDSMAP_KNN_MAX_ITER,
        "RANDSMAP_EIKONAL_TOL": RANDSMAP_EIKONAL_TOL,
        "RANDSMAP_EIKONAL_MAX_SWEEPS": RANDSMAP_EIKONAL_MAX_SWEEPS,
        "RANDSMAP_SPEED_FLOOR": RANDSMAP_SPEED_FLOOR,
        "RANDSMAP_JOBS": RANDSMAP_JOBS,
    }

    bad_vars = [var for var, value in positive_vars.items() if not value > 0]
    if RANDSMAP_LAMBDA < 0:
        bad_vars.append("RANDSMAP_LAMBDA")
    if RANDSMAP_SEED < 0:
        bad_vars.append("RANDSMAP_SEED")

    if bad_vars:
        raise EnvironmentError(
            f"Invalid numerical settings: {', '.join(bad_vars)}. "
            f"Please fix these in your .env file or environment."
        )

    return True


# Validate on import
validate_environment()
