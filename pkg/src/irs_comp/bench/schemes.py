"""Scheme runners shared by the experiment harness.

Every runner takes a config, one channel realization and a generator and
returns an :class:`Outcome` with the max-min rate in nats.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..config import SystemConfig
from ..multi_user import optimize_multi_user
from ..relay import optimize_af
from ..scenario import ChannelSet, PhaseProfile, quantize_phases
from ..single_user import optimize_single_user

SCHEMES = ("optimized-continuous", "quantized-b1", "quantized-b2", "random-phase", "no-irs", "af-relay")


@dataclass
class Outcome:
    rate: float  # nats
    iterations: int
    trajectory: list = field(default_factory=list)  # per-iteration objective, nats


def _solve(config: SystemConfig, channels: ChannelSet, rng, phase0=None, optimize_phase=True) -> Outcome:
    if config.preset == "single-user" and channels.num_users == 1:
        res = optimize_single_user(config, channels, phase0=phase0, optimize_phase=optimize_phase, rng=rng)
    else:
        res = optimize_multi_user(config, channels, phase0=phase0, optimize_phase=optimize_phase, rng=rng)
    traj = [float(t["objective"]) for t in res.trajectory]
    out = Outcome(float(res.rate), int(res.iterations), traj)
    out.phase = res.phase  # type: ignore[attr-defined]
    return out


def without_irs(channels: ChannelSet) -> ChannelSet:
    """Same direct links, no reflecting elements."""
    n, k, nr, nt = channels.direct.shape
    return ChannelSet(channels.direct, np.zeros((n, 0, nt), dtype=complex), np.zeros((k, nr, 0), dtype=complex))


def optimized_continuous(config, channels, rng) -> Outcome:
    return _solve(config, channels, rng)


def baseline_random_phase(config, channels, rng) -> Outcome:
    """Uniform random phases held fixed; beamforming optimized."""
    phase = PhaseProfile.random(channels.num_irs_elements, rng)
    return _solve(config, channels, rng, phase0=phase, optimize_phase=False)


def baseline_no_irs(config, channels, rng=None) -> Outcome:
    return _solve(config, without_irs(channels), rng, phase0=PhaseProfile(np.zeros(0)), optimize_phase=False)


def quantized(config, channels, rng, bits: int, continuous: Optional[Outcome] = None) -> Outcome:
    """Continuous design, phases snapped to ``2**bits`` levels, then
    beamforming re-optimized with the snapped phases.

    ``continuous`` may carry a design already computed on the same stream;
    it is then reused instead of solved again.
    """
    cont = continuous if continuous is not None else _solve(config, channels, rng)
    snapped = PhaseProfile(quantize_phases(cont.phase.theta, bits))  # type: ignore[attr-defined]
    out = _solve(config, channels, rng, phase0=snapped, optimize_phase=False)
    out.iterations += cont.iterations
    return out


def af_relay(config, channels, rng) -> Outcome:
    res = optimize_af(config, channels, rng=rng)
    return Outcome(float(res.rate), int(res.iterations), [float(t["objective"]) for t in res.trajectory])


def run_scheme(name: str, config: SystemConfig, channels: ChannelSet, rng: np.random.Generator,
               continuous: Optional[Outcome] = None) -> Outcome:
    """Dispatch by scheme name; ``continuous`` is only read by the quantized schemes."""
    if name == "optimized-continuous":
        return optimized_continuous(config, channels, rng)
    if name == "quantized-b1":
        return quantized(config, channels, rng, 1, continuous)
    if name == "quantized-b2":
        return quantized(config, channels, rng, 2, continuous)
    if name == "random-phase":
        return baseline_random_phase(config, channels, rng)
    if name == "no-irs":
        return baseline_no_irs(config, channels, rng)
    if name == "af-relay":
        return af_relay(config, channels, rng)
    raise ValueError(f"unknown scheme {name!r}; choose from {', '.join(SCHEMES)}")
