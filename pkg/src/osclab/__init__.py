"""osclab: numerics for trilinear oscillatory integral forms and sublevel sets.

Subpackages by task:

    phases      exact-derivative phase descriptors and the named registry
    witnesses   piecewise lower-bound test functions and the adapted norm
    quadrature  oscillation-resolving evaluation of T_lambda and S_lambda
    decay       lambda-ladder experiments and decay-exponent fits
    webgeom     3-web curvature and rank-one degeneracy diagnostics
    microlocal  phase-space decomposition into structured + pseudorandom parts
    sublevel    sublevel-set measures, extremal witnesses, H^sigma energies
    cli         reproducible experiment runner
"""

from .backend import backend_name
from .phases import PhaseDescriptor, PhaseRegistryEntry, eval_partial, poly_phase, registry_get, registry_names
from .quadrature import IntegralResult, QuadConfig, eval_S2, eval_T3, eval_oracle_S2, eval_oracle_T3
from .witnesses import TestFunction1D, make_chirp, make_constant, make_indicator, make_log_chirp, norm_N_lambda

__version__ = "0.1.0"
