"""Solver-neutral descriptions of the SOCP and SDP instances."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

SOC = "soc"
ROTATED = "rotated"


@dataclass(frozen=True)
class Cone:
    """One conic constraint on the real variable vector ``x``.

    ``kind == "soc"``:      ``||A x + b||_2   <= f.x + g``
    ``kind == "rotated"``:  ``||A x + b||_2^2 <= f.x + g``
    """

    kind: str
    A: np.ndarray
    b: np.ndarray
    f: np.ndarray
    g: float

    def __post_init__(self):
        if self.kind not in (SOC, ROTATED):
            raise ValueError(f"unknown cone kind {self.kind!r}")
        m, n = self.A.shape
        if self.b.shape != (m,) or self.f.shape != (n,):
            raise ValueError("cone affine maps are dimensionally inconsistent")

    def slack(self, x: np.ndarray) -> float:
        """Positive inside the cone, negative outside."""
        u = self.A @ x + self.b
        s = self.f @ x + self.g
        if self.kind == SOC:
            return float(s - np.linalg.norm(u))
        return float(s - u @ u)


@dataclass(frozen=True)
class SocpProblem:
    """``maximize x[objective_index]`` subject to a list of cones."""

    num_vars: int
    objective_index: int
    cones: tuple[Cone, ...]
    x0: Optional[np.ndarray] = None

    def __post_init__(self):
        if not 0 <= self.objective_index < self.num_vars:
            raise ValueError("objective index out of range")
        for c in self.cones:
            if c.A.shape[1] != self.num_vars:
                raise ValueError("cone width does not match num_vars")

    def is_strictly_feasible(self, x: np.ndarray) -> bool:
        return all(c.slack(x) > 0 for c in self.cones) and all(
            c.kind != SOC or c.f @ x + c.g > 0 for c in self.cones
        )

    def max_violation(self, x: np.ndarray) -> float:
        return max([0.0] + [-c.slack(x) for c in self.cones])


@dataclass(frozen=True)
class SdpProblem:
    """``maximize R`` s.t. ``Tr(Psi_k Theta) + R <= const_k``, ``diag(Theta) = 1``, ``Theta >= 0``."""

    psi: np.ndarray  # (K, n, n) Hermitian
    const: np.ndarray  # (K,)

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=complex)
        if psi.ndim == 2:
            psi = psi[None]
        const = np.atleast_1d(np.asarray(self.const, dtype=float))
        if psi.shape[1] != psi.shape[2] or psi.shape[0] != const.size:
            raise ValueError("psi must be (K, n, n) with one constant per k")
        if not np.allclose(psi, np.swapaxes(psi, 1, 2).conj(), atol=1e-9 * (1 + np.abs(psi).max())):
            raise ValueError("psi matrices must be Hermitian")
        if not np.all(np.isfinite(const)):
            raise ValueError("constants must be finite")
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "const", const)

    @property
    def dim(self) -> int:
        return self.psi.shape[1]

    def objective_at(self, theta: np.ndarray) -> float:
        """Largest feasible ``R`` for a given ``Theta``."""
        vals = np.real(np.einsum("kij,ji->k", self.psi, theta))
        return float(np.min(self.const - vals))


OPTIMAL = "optimal"
MAX_ITER = "max-iterations"
INFEASIBLE = "infeasible"


@dataclass
class ConicSolution:
    status: str
    objective: float
    x: Optional[np.ndarray] = None
    theta: Optional[np.ndarray] = None
    primal_residual: float = 0.0
    gap: float = float("inf")
    iterations: int = 0
    info: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL
