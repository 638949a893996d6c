"""Weak KAM numerics for Hamiltonians on the circle.

Critical values, Lax-Oleinik solutions, strict and smooth critical
sub-solutions, Aubry sets and hyperbolicity checks.

Set WEAKKAMLAB_THREADS before the first import to cap the BLAS/OpenMP
thread pools.
"""

import os

_threads = os.environ.get("WEAKKAMLAB_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

from .errors import *  # noqa: E402,F401,F403
from .model import (HamiltonianModel, TrigSeries, custom, load_model, mechanical, parse_model_text,  # noqa: E402
                    pendulum)
from .grid import GridField, nodes  # noqa: E402
from .weakkam import LaxOleinik, backward_curve, calibration_defect, weak_kam_solve  # noqa: E402
from .critical import AlphaEstimate, alpha, alpha_branch, alpha_lo  # noqa: E402
from .subsol import (mollify_subsolution, sharp_potential, strict_subsolution,  # noqa: E402
                     verify_subsolution)
from .aubry import aubry_estimate, classify_aubry  # noqa: E402
from .hyper import analyze_fixed_point, analyze_monodromy, find_fixed_points, unstable_oneform  # noqa: E402
from .smooth import smooth_subsolution  # noqa: E402

__version__ = "0.1.0"
