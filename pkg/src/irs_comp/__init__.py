"""Joint BS beamforming and IRS phase design for multicell JP-CoMP downlinks."""

from .config import SystemConfig, db_to_linear, dbm_to_watts, load_config_file, parse_config_text
from .estimators import JointBeamformer
from .metrics import LN2, effective_channel, effective_channels, min_rate, user_rate
from .multi_user import optimize_multi_user
from .relay import af_rate, optimize_af
from .scenario import ChannelSet, PhaseProfile, draw_realization, make_rng, quantize_phases
from .single_user import optimize_single_user

__version__ = "0.1.0"

__all__ = [
    "SystemConfig", "db_to_linear", "dbm_to_watts", "load_config_file", "parse_config_text",
    "JointBeamformer", "LN2", "effective_channel", "effective_channels", "min_rate", "user_rate",
    "optimize_multi_user", "af_rate", "optimize_af", "ChannelSet", "PhaseProfile",
    "draw_realization", "make_rng", "quantize_phases", "optimize_single_user",
]
