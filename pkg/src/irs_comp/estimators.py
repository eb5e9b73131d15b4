"""scikit-learn style wrapper around the joint beamforming solvers.

``fit`` takes one :class:`ChannelSet` (the "data") and stores the design;
``score`` reports the max-min rate of that design in bps/Hz, optionally on
other channels of the same shape.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .config import SystemConfig
from .metrics import LN2, min_rate
from .multi_user import optimize_multi_user
from .scenario import ChannelSet, PhaseProfile, make_rng, quantize_phases
from .single_user import optimize_single_user


class JointBeamformer(BaseEstimator):
    """Max-min joint BS beamforming and IRS phase design.

    Parameters
    ----------
    preset : "single-user" or "multi-user"
        Reference layout whose constants fill everything not given here.
    phases : "optimized", "random" or "fixed"
        ``fixed`` keeps ``phase0`` (or all-zero phases) and designs
        beamforming only.
    bits : None or int
        Snap optimized phases to ``2**bits`` levels and redo beamforming.
    """

    def __init__(self, preset="single-user", phases="optimized", bits=None, max_power=None,
                 tol=1e-3, max_outer_iterations=100, randomization_count=1000, seed=0, phase0=None):
        self.preset = preset
        self.phases = phases
        self.bits = bits
        self.max_power = max_power
        self.tol = tol
        self.max_outer_iterations = max_outer_iterations
        self.randomization_count = randomization_count
        self.seed = seed
        self.phase0 = phase0

    def _config(self, channels: ChannelSet) -> SystemConfig:
        """Preset constants with the dimensions read off ``channels``."""
        base = SystemConfig.from_preset(self.preset)
        if channels.num_bs != base.num_bs:
            raise ValueError(f"preset {self.preset!r} has {base.num_bs} BSs, channels have {channels.num_bs}")
        over = dict(num_users=channels.num_users, num_irs_elements=channels.num_irs_elements,
                    tx_antennas=channels.tx_antennas, rx_antennas=channels.rx_antennas,
                    streams=min(base.streams, channels.rx_antennas), tol=self.tol,
                    max_outer_iterations=self.max_outer_iterations,
                    randomization_count=self.randomization_count, seed=self.seed)
        if self.max_power is not None:
            over["max_power"] = self.max_power
        return SystemConfig.from_preset(self.preset, **over)

    def _solve(self, config, channels, phase0, optimize_phase, rng):
        if config.preset == "single-user" and channels.num_users == 1:
            return optimize_single_user(config, channels, phase0=phase0, optimize_phase=optimize_phase, rng=rng)
        return optimize_multi_user(config, channels, phase0=phase0, optimize_phase=optimize_phase, rng=rng)

    def fit(self, X: ChannelSet, y=None):
        if not isinstance(X, ChannelSet):
            raise TypeError("fit expects a ChannelSet")
        if self.phases not in ("optimized", "random", "fixed"):
            raise ValueError(f"unknown phases mode {self.phases!r}")
        config = self._config(X)
        rng = make_rng(self.seed, 0xE5)
        m = X.num_irs_elements
        if self.phases == "random":
            phase0 = PhaseProfile.random(m, rng)
        elif self.phase0 is not None:
            phase0 = PhaseProfile(np.asarray(self.phase0, dtype=float))
        else:
            phase0 = PhaseProfile(np.zeros(m)) if self.phases == "fixed" else None
        res = self._solve(config, X, phase0, self.phases == "optimized", rng)
        iters = res.iterations
        if self.bits is not None and self.phases == "optimized":
            snapped = PhaseProfile(quantize_phases(res.phase.theta, self.bits))
            res = self._solve(config, X, snapped, False, rng)
            iters += res.iterations
        self.config_ = config
        self.w_ = res.w
        self.phase_ = res.phase
        self.rate_ = res.rate
        self.n_iter_ = iters
        self.trajectory_ = res.trajectory
        return self

    def score(self, X: ChannelSet = None, y=None) -> float:
        """Max-min rate in bps/Hz of the fitted design."""
        if not hasattr(self, "w_"):
            raise NotFittedError("call fit before score")
        if X is None:
            return self.rate_ / LN2
        return min_rate(X, self.phase_.phi, self.w_, self.config_.noise_power) / LN2
