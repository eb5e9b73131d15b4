"""Log-barrier path-following solver for small dense SOCPs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .problems import INFEASIBLE, MAX_ITER, OPTIMAL, ROTATED, SOC, Cone, ConicSolution, SocpProblem


@dataclass(frozen=True)
class BarrierOptions:
    mu0: float = 1.0
    shrink: float = 0.1
    gap_tol: float = 1e-9
    newton_tol: float = 1e-10
    alpha: float = 0.25
    beta: float = 0.5
    max_newton: int = 100
    max_outer: int = 60


class _Cones:
    """Cones grouped by kind with precomputed quadratic pieces."""

    def __init__(self, cones):
        self.cones = list(cones)
        self.ata = [c.A.T @ c.A for c in self.cones]
        self.nu = 2.0 * len(self.cones)

    def barrier(self, x):
        total = 0.0
        for c in self.cones:
            u = c.A @ x + c.b
            s = c.f @ x + c.g
            if c.kind == SOC:
                if s <= 0:
                    return np.inf
                phi = s * s - u @ u
            else:
                phi = s - u @ u
            if phi <= 0:
                return np.inf
            total -= np.log(phi)
        return total

    def derivatives(self, x):
        n = x.size
        grad = np.zeros(n)
        hess = np.zeros((n, n))
        for c, ata in zip(self.cones, self.ata):
            u = c.A @ x + c.b
            s = c.f @ x + c.g
            atu = c.A.T @ u
            if c.kind == SOC:
                phi = s * s - u @ u
                dphi = 2 * s * c.f - 2 * atu
                hess += np.outer(dphi, dphi) / phi**2 - (2 * np.outer(c.f, c.f) - 2 * ata) / phi
            else:
                phi = s - u @ u
                dphi = c.f - 2 * atu
                hess += np.outer(dphi, dphi) / phi**2 + 2 * ata / phi
            grad -= dphi / phi
        return grad, hess


def _newton_solve(hess, rhs):
    try:
        cf = sla.cho_factor(hess, check_finite=False)
        return sla.cho_solve(cf, rhs, check_finite=False)
    except np.linalg.LinAlgError:
        reg = 1e-12 * max(1.0, np.abs(np.diag(hess)).max())
        return np.linalg.lstsq(hess + reg * np.eye(hess.shape[0]), rhs, rcond=None)[0]


def _centering(cones: _Cones, c: np.ndarray, x: np.ndarray, t: float, opts: BarrierOptions):
    """Minimize ``t c.x + barrier(x)`` from a strictly feasible ``x``."""
    val = t * (c @ x) + cones.barrier(x)
    for it in range(1, opts.max_newton + 1):
        g, h = cones.derivatives(x)
        g = g + t * c
        dx = -_newton_solve(h, g)
        dec = -(g @ dx)
        if dec / 2 <= opts.newton_tol:
            return x, it, True
        step = 1.0
        while True:
            xn = x + step * dx
            vn = t * (c @ xn) + cones.barrier(xn)
            if vn <= val - opts.alpha * step * dec:
                break
            step *= opts.beta
            if step < 1e-14:
                return x, it, dec / 2 <= 1e-6
        if val - vn <= 1e-15 * (1 + abs(val)) and dec / 2 <= 1e-6:
            # round-off floor reached
            return xn, it, True
        x, val = xn, vn
    return x, opts.max_newton, False


def _barrier_path(cones, c, x, opts: BarrierOptions, stop=None):
    mu = opts.mu0
    newton = 0
    centered = True
    for _ in range(opts.max_outer):
        x, it, centered = _centering(cones, c, x, 1.0 / mu, opts)
        newton += it
        if stop is not None and stop(x):
            break
        if mu * cones.nu < opts.gap_tol:
            break
        mu *= opts.shrink
    return x, mu, newton, centered


def _phase_one(problem: SocpProblem, x: np.ndarray, opts: BarrierOptions):
    """Find a strictly feasible point by shrinking a shared slack ``tau``.

    Free directions (an objective variable that only appears on the slack
    side, say) make the barrier unbounded below, so the search is confined
    to a ball around the start that is widened if it turns out too small.
    """
    n = problem.num_vars
    viol = []
    for c in problem.cones:
        u = c.A @ x + c.b
        s = c.f @ x + c.g
        viol.append((np.linalg.norm(u) if c.kind == SOC else u @ u) - s)
    tau = max(viol) + 1.0
    aug = []
    for c in problem.cones:
        a = np.hstack([c.A, np.zeros((c.A.shape[0], 1))])
        aug.append(Cone(c.kind, a, c.b, np.append(c.f, 1.0), c.g))
    cost = np.zeros(n + 1)
    cost[-1] = 1.0
    ball = np.hstack([np.eye(n), np.zeros((n, 1))])
    radius = 1e3 * (1.0 + np.linalg.norm(x) + abs(tau))
    for _ in range(3):
        cones = _Cones(aug + [Cone(SOC, ball, -x, np.zeros(n + 1), radius)])
        z, *_ = _barrier_path(cones, cost, np.append(x, tau), opts, stop=lambda z: z[-1] < -1e-9)
        if problem.is_strictly_feasible(z[:n]):
            return z[:n]
        radius *= 100.0
    return None


def solve_socp(problem: SocpProblem, options: BarrierOptions | None = None) -> ConicSolution:
    """Maximize ``x[objective_index]`` over the cone constraints.

    A barrier method: for ``mu = mu0, mu0*shrink, ...`` minimize
    ``-R - mu * sum(log slack)`` by damped Newton, stopping once
    ``mu * nu`` (the duality-gap bound) drops below ``gap_tol``.
    """
    opts = options or BarrierOptions()
    n = problem.num_vars
    x = np.zeros(n) if problem.x0 is None else np.asarray(problem.x0, dtype=float).copy()
    if not problem.is_strictly_feasible(x):
        x = _phase_one(problem, x, opts)
        if x is None:
            return ConicSolution(INFEASIBLE, -np.inf, x=None)
    cones = _Cones(problem.cones)
    c = np.zeros(n)
    c[problem.objective_index] = -1.0
    x, mu, newton, centered = _barrier_path(cones, c, x, opts)
    gap = mu * cones.nu
    status = OPTIMAL if centered and gap < opts.gap_tol * 10 else MAX_ITER
    return ConicSolution(
        status,
        float(x[problem.objective_index]),
        x=x,
        primal_residual=problem.max_violation(x),
        gap=gap,
        iterations=newton,
    )
