"""Half-duplex amplify-and-forward relay placed where the IRS would be.

The relay sees ``G_r = [G_1, ..., G_N]`` (the BS-IRS links) and forwards
through ``H_{r,k}`` (the IRS-user links) with an analog matrix ``V`` whose
entries all have unit modulus. Direct links play no part.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np

from .config import SystemConfig
from .conic import solve_socp
from .metrics import stack, unstack, user_rate
from .multi_user import (
    DegenerateWeightError,
    SolverFailure,
    build_socp_problem,
    matched_filter_init_multi,
    mse_state_stacked,
    mse_values,
    socp_beamformers,
)
from .scenario import ChannelSet, make_rng
from .single_user import MonotonicityError, stacked_bs_irs, whiten


def relay_channels(channels: ChannelSet, v: np.ndarray):
    """Effective channels ``H_{r,k} V G_r`` ``(K, N_r, N*N_t)`` and the
    relay-noise part ``H_{r,k} V V^H H_{r,k}^H`` ``(K, N_r, N_r)``."""
    g = stacked_bs_irs(channels)  # (M, N*N_t)
    t = channels.irs_user @ v  # (K, N_r, M)
    return t @ g, t @ np.swapaxes(t.conj(), 1, 2)


def relay_noise(channels: ChannelSet, v: np.ndarray, noise_power: float) -> np.ndarray:
    _, amp = relay_channels(channels, v)
    return noise_power * (amp + np.eye(channels.rx_antennas))


def af_rate(channels: ChannelSet, w: np.ndarray, v: np.ndarray, noise_power: float, k: int) -> float:
    """Rate of user ``k`` in nats, half-duplex factor included.

    ``w`` is ``(N, K, N_t, d)``; the relay noise ``sigma^2 I_M`` is carried
    through ``H_{r,k} V`` and added to the user's own noise.
    """
    v = np.asarray(v)
    m = channels.num_irs_elements
    if v.shape != (m, m):
        raise ValueError(f"relay matrix shape {v.shape} != {(m, m)}")
    hbar, amp = relay_channels(channels, v)
    cov = noise_power * (amp[k] + np.eye(channels.rx_antennas))
    return 0.5 * user_rate(hbar[k], stack(w), k, cov)


def af_rates(channels: ChannelSet, w, v, noise_power: float) -> np.ndarray:
    return np.array([af_rate(channels, w, v, noise_power, k) for k in range(channels.num_users)])


# -- element-wise grid search on V -----------------------------------------

@numba.njit(cache=True)
def _logdet_h(a):
    """``ln det`` of a small Hermitian positive definite matrix (Cholesky)."""
    n = a.shape[0]
    l = np.zeros((n, n), dtype=np.complex128)
    out = 0.0
    for i in range(n):
        for j in range(i + 1):
            s = a[i, j]
            for p in range(j):
                s -= l[i, p] * np.conj(l[j, p])
            if i == j:
                r = s.real
                if r <= 0.0:
                    return -np.inf
                l[i, i] = np.sqrt(r)
                out += np.log(r)
            else:
                l[i, j] = s / l[j, j]
    return out


@numba.njit(cache=True)
def _min_rate(a, c, nr):
    """min_k of ``ln|I + C_k + sum_l A_kl A_kl^H| - ln|I + C_k + sum_{l!=k} ...|``."""
    k_users = a.shape[0]
    d = a.shape[3]
    best = np.inf
    for k in range(k_users):
        f = np.eye(nr, dtype=np.complex128) + c[k]
        s = np.zeros((nr, nr), dtype=np.complex128)
        for l in range(k_users):
            for r in range(nr):
                for q in range(nr):
                    acc = 0.0j
                    for e in range(d):
                        acc += a[k, l, r, e] * np.conj(a[k, l, q, e])
                    if l == k:
                        s[r, q] += acc
                    else:
                        f[r, q] += acc
        val = _logdet_h(f + s) - _logdet_h(f)
        if val < best:
            best = val
    return best


@numba.njit(cache=True)
def _sweep(v, hr, g, ws, grid):
    """One row-major pass over ``V``; each entry takes the best grid phase
    (or keeps its value if nothing on the grid is strictly better).
    Works in whitened units. Returns the min-rate after the pass."""
    k_users, nr, m = hr.shape
    d = ws.shape[2]
    t = np.zeros((k_users, nr, m), dtype=np.complex128)
    for k in range(k_users):
        t[k] = hr[k] @ v
    gw = np.zeros((k_users, m, d), dtype=np.complex128)
    for l in range(k_users):
        gw[l] = g @ ws[l]
    a = np.zeros((k_users, k_users, nr, d), dtype=np.complex128)
    c = np.zeros((k_users, nr, nr), dtype=np.complex128)
    for k in range(k_users):
        for l in range(k_users):
            a[k, l] = t[k] @ gw[l]
        c[k] = t[k] @ np.conj(t[k]).T
    current = _min_rate(a, c, nr)
    a2 = np.empty_like(a)
    c2 = np.empty_like(c)
    for i in range(m):
        for j in range(m):
            best_val = current
            best_z = v[i, j]
            for p in range(grid.size):
                delta = grid[p] - v[i, j]
                for k in range(k_users):
                    for r in range(nr):
                        h = delta * hr[k, r, i]
                        for l in range(k_users):
                            for e in range(d):
                                a2[k, l, r, e] = a[k, l, r, e] + h * gw[l, j, e]
                        for q in range(nr):
                            c2[k, r, q] = (c[k, r, q] + h * np.conj(t[k, q, j])
                                           + t[k, r, j] * np.conj(delta * hr[k, q, i])
                                           + h * np.conj(delta * hr[k, q, i]))
                val = _min_rate(a2, c2, nr)
                if val > best_val:
                    best_val = val
                    best_z = grid[p]
            if best_z != v[i, j]:
                delta = best_z - v[i, j]
                for k in range(k_users):
                    for r in range(nr):
                        h = delta * hr[k, r, i]
                        for l in range(k_users):
                            for e in range(d):
                                a[k, l, r, e] += h * gw[l, j, e]
                        for q in range(nr):
                            c[k, r, q] += (h * np.conj(t[k, q, j]) + t[k, r, j] * np.conj(delta * hr[k, q, i])
                                           + h * np.conj(delta * hr[k, q, i]))
                    for r in range(nr):
                        t[k, r, j] += delta * hr[k, r, i]
                v[i, j] = best_z
                current = best_val
    return current


def relay_phase_sweep(channels: ChannelSet, ws: np.ndarray, v: np.ndarray, grid_points: int = 64) -> float:
    """Coordinate pass over ``V`` in place; ``channels`` whitened, ``ws``
    stacked. Returns the full-duplex min-rate (nats, no 1/2)."""
    grid = np.exp(2j * np.pi * np.arange(grid_points) / grid_points)
    return float(_sweep(v, np.ascontiguousarray(channels.irs_user), np.ascontiguousarray(stacked_bs_irs(channels)),
                        np.ascontiguousarray(ws), grid))


# -- alternation -------------------------------------------------------------

@dataclass
class RelayResult:
    w: np.ndarray  # (N, K, N_t, d) in watts^(1/2)
    v: np.ndarray  # (M, M) unit modulus
    rate: float  # min-rate, nats, half-duplex
    trajectory: list
    iterations: int
    converged: bool


def optimize_af(
    config: SystemConfig,
    channels: ChannelSet,
    v0: Optional[np.ndarray] = None,
    rng: Optional[np.random.Generator] = None,
) -> RelayResult:
    """Max-min rate of the AF relay: SOCP beamforming with the relay noise
    folded into each user's covariance, then one grid pass over ``V``."""
    rng = rng if rng is not None else make_rng(config.seed, 0xF3)
    n, d = channels.num_bs, config.streams
    m = channels.num_irs_elements
    if v0 is None:
        v0 = np.exp(2j * np.pi * rng.random((m, m)))
    v = np.array(v0, dtype=np.complex128)
    if v.shape != (m, m) or not np.allclose(np.abs(v), 1.0):
        raise ValueError("relay matrix must be M x M with unit-modulus entries")
    # unit noise, unit power; irs_user is left alone so V V^H carries the relay noise
    ch = whiten(channels, config.max_power, config.noise_power)

    def state(v):
        hbar, amp = relay_channels(ch, v)
        return hbar, amp + np.eye(ch.rx_antennas)

    hbar, cov = state(v)
    ws = matched_filter_init_multi(hbar, n, d, 1.0)

    def rate_of(hbar, cov, ws):
        return min(user_rate(hbar[k], ws, k, cov[k]) for k in range(hbar.shape[0]))

    full = rate_of(hbar, cov, ws)
    traj = [{"iteration": 0, "objective": 0.5 * full}]
    converged = False
    it = 0
    for it in range(1, config.max_outer_iterations + 1):
        us, qs = mse_state_stacked(hbar, ws, cov)
        base = float(np.min(mse_values(hbar, ws, us, qs, cov)))
        try:
            prob = build_socp_problem(hbar, ws, us, qs, n, noise=cov)
        except DegenerateWeightError:
            qs = qs + 1e-10 * np.eye(d)
            prob = build_socp_problem(hbar, ws, us, qs, n, noise=cov)
        sol = solve_socp(prob)
        if sol.x is None:
            raise SolverFailure(f"SOCP failed at iteration {it}: {sol.status}")
        cand = socp_beamformers(sol.x, ws.shape)
        power = np.sum(np.abs(cand.reshape(cand.shape[0], n, -1, d)) ** 2, axis=(0, 2, 3))
        cand = cand / np.sqrt(max(1.0, power.max()))
        if float(np.min(mse_values(hbar, cand, us, qs, cov))) >= base:
            ws = cand
        after_w = rate_of(hbar, cov, ws)

        after_v = relay_phase_sweep(ch, ws, v, config.relay_grid_points)
        hbar, cov = state(v)
        new_full = rate_of(hbar, cov, ws)
        if after_v < after_w - 1e-8 * max(1.0, after_w) or new_full < full - 1e-8 * max(1.0, full):
            raise MonotonicityError(f"relay objective decreased: {full!r} -> {new_full!r}")
        traj.append({"iteration": it, "objective": 0.5 * new_full, "socp": float(sol.objective),
                     "after_w": 0.5 * after_w})
        gain = new_full - full
        full = new_full
        if gain <= config.tol * max(abs(full), 1e-12):
            converged = True
            break

    w_out = unstack(ws * np.sqrt(config.max_power), n)
    return RelayResult(w_out, v, 0.5 * full, traj, it, converged)
