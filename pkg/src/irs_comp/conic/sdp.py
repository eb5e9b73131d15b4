"""Barrier solver for unit-diagonal SDPs of the form

    maximize R  s.t.  Tr(Psi_k Theta) + R <= c_k,  diag(Theta) = 1,  Theta >= 0.

The path is followed in the dual

    minimize c.lam + 1.y  s.t.  sum(lam) = 1, lam >= 0,
                                S = Diag(y) + sum_k lam_k Psi_k >= 0,

which has only ``n + K`` unknowns. On the central path ``Theta = S^-1 / t``
has unit diagonal; the returned ``Theta`` is that matrix renormalized to an
exact unit diagonal, and the gap is certified as dual minus primal value.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg as sla

from .problems import MAX_ITER, OPTIMAL, ConicSolution, SdpProblem
from .socp import BarrierOptions


def _chol_inv(s):
    """``S^-1`` and ``log det S``; ``None`` if ``S`` is not positive definite."""
    try:
        c = sla.cholesky(s, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        return None, None
    logdet = 2.0 * np.sum(np.log(np.real(np.diag(c))))
    ci = sla.solve_triangular(c, np.eye(s.shape[0]), lower=True, check_finite=False)
    return ci.conj().T @ ci, logdet


class _Dual:
    def __init__(self, p: SdpProblem):
        self.psi = p.psi
        self.c = p.const
        self.n = p.dim
        self.k = p.const.size

    def matrix(self, y, lam):
        s = np.einsum("k,kij->ij", lam.astype(complex), self.psi)
        s[np.diag_indices(self.n)] += y
        return 0.5 * (s + s.conj().T)

    def objective(self, y, lam):
        return float(self.c @ lam + y.sum())

    def value(self, y, lam, t):
        if np.any(lam <= 0):
            return np.inf, None
        x, logdet = _chol_inv(self.matrix(y, lam))
        if x is None:
            return np.inf, None
        return t * self.objective(y, lam) - logdet - np.sum(np.log(lam)), x

    def derivatives(self, x, lam, t):
        n, k = self.n, self.k
        xp = x @ self.psi  # (K, n, n): X Psi_k
        g = np.empty(n + k)
        g[:n] = t - np.real(np.diag(x))
        g[n:] = t * self.c - np.real(np.einsum("kii->k", xp)) - 1.0 / lam
        h = np.empty((n + k, n + k))
        h[:n, :n] = np.abs(x) ** 2
        # (X Psi_k X)_mm
        cross = np.real(np.einsum("kmj,jm->km", xp, x))
        h[:n, n:] = cross.T
        h[n:, :n] = cross
        h[n:, n:] = np.real(np.einsum("kij,lji->kl", xp, xp)) + np.diag(1.0 / lam**2)
        return g, h


def _newton_step(h, g, n, k):
    """Newton direction under ``sum(d lam) = 0``."""
    a = np.zeros(n + k)
    a[n:] = 1.0
    kkt = np.zeros((n + k + 1, n + k + 1))
    kkt[: n + k, : n + k] = h
    kkt[: n + k, -1] = a
    kkt[-1, : n + k] = a
    rhs = np.append(-g, 0.0)
    try:
        sol = sla.solve(kkt, rhs, assume_a="sym", check_finite=False)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    return sol[: n + k]


def _recover_primal(p: SdpProblem, x, t):
    theta = x / t
    d = np.sqrt(np.clip(np.real(np.diag(theta)), 1e-300, None))
    theta = theta / np.outer(d, d)
    theta = 0.5 * (theta + theta.conj().T)
    theta[np.diag_indices(p.dim)] = 1.0
    return theta


def _center(d: _Dual, y, lam, t, opts: BarrierOptions):
    """Damped Newton on the dual barrier at fixed ``t``."""
    n, k = d.n, d.k
    val, x = d.value(y, lam, t)
    for it in range(1, opts.max_newton + 1):
        g, h = d.derivatives(x, lam, t)
        step_dir = _newton_step(h, g, n, k)
        dec = -(g @ step_dir)
        if dec / 2 <= opts.newton_tol:
            return y, lam, x, it, True
        step = 1.0
        while True:
            yn, ln = y + step * step_dir[:n], lam + step * step_dir[n:]
            vn, xn = d.value(yn, ln, t)
            if vn <= val - opts.alpha * step * dec:
                break
            step *= opts.beta
            if step < 1e-14:
                return y, lam, x, it, dec / 2 <= 1e-6
        if val - vn <= 1e-15 * (1 + abs(val)) and dec / 2 <= 1e-6:
            return yn, ln, xn, it, True
        y, lam, val, x = yn, ln, vn, xn
    return y, lam, x, opts.max_newton, False


def solve_sdp(problem: SdpProblem, options: BarrierOptions | None = None) -> ConicSolution:
    """Maximize ``R`` over unit-diagonal PSD ``Theta``.

    ``t`` grows by ``1/shrink`` per stage. The stage with the smallest
    certified gap is kept, since at very large ``t`` the recovered primal
    loses accuracy faster than the barrier gap shrinks.
    """
    opts = options or BarrierOptions(gap_tol=1e-9)
    d = _Dual(problem)
    n, k = d.n, d.k
    lam = np.full(k, 1.0 / k)
    base = d.matrix(np.zeros(n), lam)
    y = np.full(n, max(0.0, -np.linalg.eigvalsh(base)[0]) + 1.0)

    # start t so the linear and barrier terms are comparable
    scale = max(1.0, abs(d.objective(y, lam)))
    t = (n + k) / scale / opts.mu0
    newton = 0
    best = None
    stalls = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        for _ in range(opts.max_outer):
            y, lam, x, it, centered = _center(d, y, lam, t, opts)
            newton += it
            theta = _recover_primal(problem, x, t)
            primal = problem.objective_at(theta)
            dual = d.objective(y, lam)
            gap = dual - primal
            if best is None or gap < best[0]:
                best = (gap, theta, primal, dual, y, lam, centered)
                stalls = 0
            else:
                stalls += 1
            if gap < opts.gap_tol * (1 + abs(primal)) or stalls >= 2:
                break
            t /= opts.shrink

    gap, theta, primal, dual, y, lam, centered = best
    min_eig = float(np.linalg.eigvalsh(theta)[0])
    ok = gap <= max(opts.gap_tol, 1e-5) * (1 + abs(primal)) and min_eig >= -1e-8
    return ConicSolution(
        OPTIMAL if ok else MAX_ITER,
        primal,
        theta=theta,
        primal_residual=max(0.0, -min_eig),
        gap=max(gap, 0.0),
        iterations=newton,
        info={"dual_objective": dual, "dual_y": y, "dual_lambda": lam, "centered": centered},
    )
