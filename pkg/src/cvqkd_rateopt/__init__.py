"""Rate-adaptive reconciliation for Gaussian-modulated CV-QKD.

Jointly chooses modulation variance and reconciliation efficiency from a
Monte-Carlo FER surface of a raptor-like protograph LDPC code family.
"""

__version__ = "0.1.0"

from .channel import SystemParams, OperatingPoint, holevo_bound_be, link_metrics, quadrature_snr  # noqa: E402
from .protograph import Protograph, load_protograph, parse_protograph  # noqa: E402
from .raptor import RateAdaptiveCode, encode, extend_to_rate, lift  # noqa: E402
from .sim import FerSample, LadderPolicy, SimConfig, run_fer_grid, run_fer_point  # noqa: E402
from .surface import FerSurface, FerSurfaceRegressor, build_surface, eval_fer, fit_rate_curve  # noqa: E402
from .optimizer import SearchSpace, distance_sweep, fixed_beta_baseline, grid_search, local_refine  # noqa: E402
