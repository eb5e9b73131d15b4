"""Scenario constants, presets and the flat ``key=value`` config format."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Optional

SQRT3 = math.sqrt(3.0)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    return 10.0 * math.log10(watts) + 30.0


Point = tuple[float, float, float]


@dataclass(frozen=True)
class SystemConfig:
    """All constants of one simulated scenario.

    Powers are in watts and gains are linear. Use :meth:`single_user` or
    :meth:`multi_user` for the two reference layouts; any field can be
    overridden through keyword arguments.
    """

    preset: str = "single-user"
    num_bs: int = 2
    num_users: int = 1
    num_irs_elements: int = 50
    tx_antennas: int = 2
    rx_antennas: int = 2
    streams: int = 2
    max_power: float = 1.0
    noise_power: float = dbm_to_watts(-80.0)
    ref_gain: float = db_to_linear(-30.0)
    ref_distance: float = 1.0
    alpha_br: float = 2.2
    alpha_ru: float = 2.2
    alpha_bu: float = 3.6
    rician_factor: float = db_to_linear(10.0)
    bs_positions: tuple[Point, ...] = ((-300.0, 0.0, 10.0), (300.0, 0.0, 10.0))
    # x is not fixed by the reference layout; 10 m matches the M = 50 rates
    irs_position: Point = (10.0, 0.0, 10.0)
    user_center: Point = (0.0, 0.0, 0.0)
    user_radius: float = 0.0
    direct_links: bool = True
    quantizer_bits: Optional[int] = None
    randomization_count: int = 1000
    tol: float = 1e-3
    inner_tol: float = 1e-7
    max_outer_iterations: int = 100
    max_subgradient_iterations: int = 500
    max_mm_iterations: int = 500
    subgradient_step: float = 0.1
    relay_grid_points: int = 64
    seed: int = 0

    def __post_init__(self):
        self.validate()

    @classmethod
    def single_user(cls, **overrides) -> "SystemConfig":
        return cls(**overrides)

    @classmethod
    def multi_user(cls, **overrides) -> "SystemConfig":
        base = dict(
            preset="multi-user",
            num_bs=3,
            num_users=3,
            num_irs_elements=100,
            tx_antennas=6,
            rx_antennas=2,
            streams=2,
            bs_positions=(
                (-300.0, 0.0, 10.0),
                (300.0, 0.0, 10.0),
                (0.0, 300.0 * SQRT3, 10.0),
            ),
            irs_position=(0.0, 100.0 * SQRT3, 10.0),
            user_center=(0.0, 100.0 * SQRT3, 0.0),
            user_radius=30.0,
        )
        base.update(overrides)
        return cls(**base)

    @classmethod
    def from_preset(cls, name: str, **overrides) -> "SystemConfig":
        if name == "single-user":
            return cls.single_user(**overrides)
        if name == "multi-user":
            return cls.multi_user(**overrides)
        raise ValueError(f"unknown preset {name!r}")

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def validate(self) -> None:
        n, k, m = self.num_bs, self.num_users, self.num_irs_elements
        if n < 1 or k < 1 or m < 0:
            raise ValueError("need num_bs >= 1, num_users >= 1, num_irs_elements >= 0")
        if self.tx_antennas < 1 or self.rx_antennas < 1:
            raise ValueError("antenna counts must be positive")
        if not 1 <= self.streams <= min(self.tx_antennas * n, self.rx_antennas):
            raise ValueError(
                f"streams={self.streams} must lie in [1, min(N*N_t, N_r)]"
            )
        for name in ("max_power", "noise_power", "ref_gain", "ref_distance", "tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.rician_factor < 0:
            raise ValueError("rician_factor must be nonnegative")
        if len(self.bs_positions) != n:
            raise ValueError(f"expected {n} BS positions, got {len(self.bs_positions)}")
        for p in (*self.bs_positions, self.irs_position, self.user_center):
            if len(p) != 3 or p[2] < 0:
                raise ValueError(f"position {p} must be 3-D with nonnegative altitude")
        if self.quantizer_bits is not None and self.quantizer_bits < 1:
            raise ValueError("quantizer_bits must be >= 1 or None")
        if self.randomization_count < 1:
            raise ValueError("randomization_count must be >= 1")


# -- flat key=value files ----------------------------------------------------

_FIELD_TYPES = {f.name: f.type for f in fields(SystemConfig)}


def _parse_value(key: str, raw: str) -> Any:
    raw = raw.strip()
    kind = _FIELD_TYPES[key]
    if key in ("bs_positions",):
        pts = [p for p in raw.split(";") if p.strip()]
        return tuple(tuple(float(c) for c in p.split(",")) for p in pts)
    if key in ("irs_position", "user_center"):
        return tuple(float(c) for c in raw.split(","))
    if key == "quantizer_bits":
        return None if raw.lower() in ("continuous", "none", "") else int(raw)
    if key == "direct_links":
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"bad boolean for {key}: {raw!r}")
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw


def parse_config_text(text: str) -> dict[str, Any]:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    Unit-suffixed aliases are accepted for the powers and gains that are
    usually quoted in dB: ``max_power_dbm``, ``noise_power_dbm``,
    ``ref_gain_db`` and ``rician_factor_db``.
    """
    out: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key in ("max_power_dbm", "noise_power_dbm"):
            out[key[: -len("_dbm")]] = dbm_to_watts(float(raw))
        elif key in ("ref_gain_db", "rician_factor_db"):
            out[key[: -len("_db")]] = db_to_linear(float(raw))
        elif key in _FIELD_TYPES:
            out[key] = _parse_value(key, raw)
        else:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
    return out


def load_config_file(path: str | Path) -> dict[str, Any]:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))
