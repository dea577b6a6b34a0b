"""Value estimation for repeated position auctions from bid logs alone."""
__version__ = "0.1.0"

from .auction import DEFAULT_CTRS, DEFAULT_VALUES, CtrProfile, Mechanism, resolve
from .best_response import Variant, estimate_best_response, response_curves
from .estimators import (EstimateRecord, Method, combine_mean, estimate_average_bid,
                         estimate_regret_min, estimate_regret_weighted)
from .evaluation import evaluate
from .regret import BidSequence, BidderReplay, Window, regret, regret_curve
from .sim import SessionConfig, run_session
from .vcg_ne import estimate_vcg_like_ne

__all__ = [
    "BidSequence", "BidderReplay", "CtrProfile", "DEFAULT_CTRS", "DEFAULT_VALUES", "EstimateRecord",
    "Mechanism", "Method", "SessionConfig", "Variant", "Window", "combine_mean", "estimate_average_bid",
    "estimate_best_response", "estimate_regret_min", "estimate_regret_weighted", "estimate_vcg_like_ne",
    "evaluate", "regret", "regret_curve", "resolve", "response_curves", "run_session",
]
