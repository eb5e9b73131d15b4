"""Geometry, large-scale path loss, fading channels and phase quantization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, *keys)``.

    Philox streams derived from distinct key tuples are independent, so every
    (sweep point, realization) pair gets its own reproducible stream no matter
    which worker runs it.
    """
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *map(int, keys)])
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class Placement:
    bs_coords: np.ndarray  # (N, 3)
    irs_coord: np.ndarray  # (3,)
    user_coords: np.ndarray  # (K, 3)


@dataclass(frozen=True)
class ChannelSet:
    """One channel realization.

    Attributes
    ----------
    direct : (N, K, N_r, N_t) complex
        BS n -> user k links.
    bs_irs : (N, M, N_t) complex
        BS n -> IRS links.
    irs_user : (K, N_r, M) complex
        IRS -> user k links.
    """

    direct: np.ndarray
    bs_irs: np.ndarray
    irs_user: np.ndarray

    def __post_init__(self):
        n, k, nr, nt = self.direct.shape
        if self.bs_irs.ndim != 3 or self.bs_irs.shape[0] != n or self.bs_irs.shape[2] != nt:
            raise ValueError(f"bs_irs shape {self.bs_irs.shape} inconsistent with direct {self.direct.shape}")
        m = self.bs_irs.shape[1]
        if self.irs_user.shape != (k, nr, m):
            raise ValueError(f"irs_user shape {self.irs_user.shape} != {(k, nr, m)}")
        for a in (self.direct, self.bs_irs, self.irs_user):
            if not np.all(np.isfinite(a)):
                raise ValueError("channel entries must be finite")

    @property
    def num_bs(self) -> int:
        return self.direct.shape[0]

    @property
    def num_users(self) -> int:
        return self.direct.shape[1]

    @property
    def rx_antennas(self) -> int:
        return self.direct.shape[2]

    @property
    def tx_antennas(self) -> int:
        return self.direct.shape[3]

    @property
    def num_irs_elements(self) -> int:
        return self.bs_irs.shape[1]

    def scaled(self, factor: float) -> "ChannelSet":
        """Every link times ``factor`` (the cascade picks up ``factor**2``)."""
        return ChannelSet(self.direct * factor, self.bs_irs * factor, self.irs_user * factor)

    def without_irs(self) -> "ChannelSet":
        return ChannelSet(self.direct, np.zeros_like(self.bs_irs), np.zeros_like(self.irs_user))

    def without_direct(self) -> "ChannelSet":
        return ChannelSet(np.zeros_like(self.direct), self.bs_irs, self.irs_user)

    def user(self, k: int) -> "ChannelSet":
        """Single-user view of user ``k``."""
        return ChannelSet(self.direct[:, k : k + 1], self.bs_irs, self.irs_user[k : k + 1])


@dataclass(frozen=True)
class PhaseProfile:
    theta: np.ndarray

    def __post_init__(self):
        theta = np.mod(np.asarray(self.theta, dtype=float), 2 * np.pi)
        object.__setattr__(self, "theta", theta)

    @classmethod
    def from_phi(cls, phi: np.ndarray) -> "PhaseProfile":
        return cls(np.angle(phi))

    @classmethod
    def random(cls, m: int, rng: np.random.Generator) -> "PhaseProfile":
        return cls(rng.uniform(0.0, 2 * np.pi, size=m))

    @property
    def phi(self) -> np.ndarray:
        return np.exp(1j * self.theta)

    @property
    def Phi(self) -> np.ndarray:
        return np.diag(self.phi)

    def __len__(self) -> int:
        return self.theta.size


# -- geometry ----------------------------------------------------------------

def build_geometry(config: SystemConfig, rng: np.random.Generator) -> Placement:
    """Place BSs, IRS and users.

    Users are spread uniformly over a horizontal disc of ``user_radius``
    around ``user_center``; a zero radius puts every user at the center.
    """
    bs = np.asarray(config.bs_positions, dtype=float)
    irs = np.asarray(config.irs_position, dtype=float)
    center = np.asarray(config.user_center, dtype=float)
    k = config.num_users
    r = config.user_radius * np.sqrt(rng.uniform(0.0, 1.0, size=k))
    ang = rng.uniform(0.0, 2 * np.pi, size=k)
    users = np.tile(center, (k, 1))
    users[:, 0] += r * np.cos(ang)
    users[:, 1] += r * np.sin(ang)
    d = np.linalg.norm(bs[:, None, :] - users[None, :, :], axis=-1)
    if np.any(d <= config.ref_distance):
        raise ValueError("every BS-user distance must exceed the reference distance")
    return Placement(bs, irs, users)


def path_loss(distance, exponent: float, config: SystemConfig):
    """Large-scale power gain ``L_0 (d / d_0) ** -alpha``."""
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = config.ref_gain * (d / config.ref_distance) ** (-exponent)
    return float(out) if out.ndim == 0 else out


def steering_vector(n: int, angle: float) -> np.ndarray:
    """Half-wavelength uniform linear array response."""
    return np.exp(1j * np.pi * np.arange(n) * np.sin(angle))


def _cn(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def rician_channel(n_rx, n_tx, gain, kappa, rng) -> np.ndarray:
    """``sqrt(gain) (sqrt(k/(1+k)) LoS + sqrt(1/(1+k)) NLoS)`` with random AoA/AoD."""
    aoa, aod = rng.uniform(0.0, 2 * np.pi, size=2)
    los = np.outer(steering_vector(n_rx, aoa), steering_vector(n_tx, aod).conj())
    nlos = _cn(rng, (n_rx, n_tx))
    if np.isinf(kappa):
        return np.sqrt(gain) * los
    return np.sqrt(gain) * (np.sqrt(kappa / (1 + kappa)) * los + np.sqrt(1 / (1 + kappa)) * nlos)


def sample_channels(config: SystemConfig, placement: Placement, rng: np.random.Generator) -> ChannelSet:
    n, k, m = config.num_bs, config.num_users, config.num_irs_elements
    nt, nr = config.tx_antennas, config.rx_antennas
    bs, irs, users = placement.bs_coords, placement.irs_coord, placement.user_coords
    if bs.shape != (n, 3) or users.shape != (k, 3):
        raise ValueError("placement inconsistent with config")

    d_bu = np.linalg.norm(bs[:, None, :] - users[None, :, :], axis=-1)
    pl_bu = path_loss(d_bu, config.alpha_bu, config)
    direct = np.sqrt(pl_bu)[:, :, None, None] * _cn(rng, (n, k, nr, nt))
    if not config.direct_links:
        direct = np.zeros_like(direct)

    bs_irs = np.zeros((n, m, nt), dtype=complex)
    irs_user = np.zeros((k, nr, m), dtype=complex)
    if m > 0:
        d_br = np.linalg.norm(bs - irs, axis=-1)
        d_ru = np.linalg.norm(users - irs, axis=-1)
        for i in range(n):
            bs_irs[i] = rician_channel(m, nt, path_loss(d_br[i], config.alpha_br, config),
                                       config.rician_factor, rng)
        for j in range(k):
            irs_user[j] = rician_channel(nr, m, path_loss(d_ru[j], config.alpha_ru, config),
                                         config.rician_factor, rng)
    return ChannelSet(direct, bs_irs, irs_user)


def draw_realization(config: SystemConfig, *keys: int) -> tuple[Placement, ChannelSet]:
    """Placement and channels for the stream keyed by ``(config.seed, *keys)``."""
    rng = make_rng(config.seed, *keys)
    placement = build_geometry(config, rng)
    return placement, sample_channels(config, placement, rng)


# -- phase quantization ------------------------------------------------------

def quantize_phases(theta, bits: int) -> np.ndarray:
    """Map each angle to the nearest point of the ``2**bits`` uniform grid.

    Nearness is chordal distance on the unit circle; exact ties go to the
    smaller grid angle.
    """
    if bits < 1:
        raise ValueError("bits must be >= 1")
    theta = np.mod(np.asarray(theta, dtype=float), 2 * np.pi)
    levels = 2**bits
    grid = 2 * np.pi * np.arange(levels) / levels
    diff = np.angle(np.exp(1j * (theta[..., None] - grid)))
    dist = 2 * np.abs(np.sin(diff / 2))
    best = dist.min(axis=-1, keepdims=True)
    # first index within round-off of the minimum is the smallest angle
    idx = np.argmax(dist <= best + 1e-12, axis=-1)
    return grid[idx]
