"""Single-user solver: closed-form dual beamforming, MM phase design and
their alternation under the weighted-MSE reformulation.

Internally every solve works on *whitened* channels, scaled by
``sqrt(P_max / sigma^2)`` so the power budget and noise power are both 1.
Rates are invariant to this scaling; beamformers are scaled back by
``sqrt(P_max)`` on the way out.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .config import SystemConfig
from .metrics import (
    effective_channel,
    hermitian,
    mmse_receiver,
    mse_matrix,
    mse_objective,
    optimal_weight,
    user_rate,
)
from .scenario import ChannelSet, PhaseProfile, make_rng


class DegenerateDualError(np.linalg.LinAlgError):
    """The stationarity system is singular at the given multipliers."""


class MonotonicityError(AssertionError):
    """An ascent step made the objective worse beyond round-off."""


def whiten(channels: ChannelSet, max_power: float, noise_power: float) -> ChannelSet:
    """Scale every effective channel by ``sqrt(P / sigma^2)``.

    Only the first hop of the cascade is scaled, so ``H_r Phi G`` picks up the
    factor once.
    """
    s = np.sqrt(max_power / noise_power)
    return ChannelSet(channels.direct * s, channels.bs_irs * s, channels.irs_user)


def stacked_direct(channels: ChannelSet, k: int = 0) -> np.ndarray:
    """``[H_1k, ..., H_Nk]`` as ``(N_r, N*N_t)``."""
    return np.concatenate(list(channels.direct[:, k]), axis=1)


def stacked_bs_irs(channels: ChannelSet) -> np.ndarray:
    """``G_r = [G_1r, ..., G_Nr]`` as ``(M, N*N_t)``."""
    return np.concatenate(list(channels.bs_irs), axis=1)


# -- beamforming: dual subgradient ------------------------------------------

@dataclass
class DualState:
    mu: np.ndarray
    step: float
    iteration: int = 0

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        if np.any(self.mu < 0):
            raise ValueError("multipliers must be nonnegative")


@dataclass
class DualResult:
    w: np.ndarray  # stacked (N*N_t, d)
    mu: np.ndarray
    primal: float
    dual: float
    iterations: int
    converged: bool


def _blocks(w: np.ndarray, num_bs: int) -> np.ndarray:
    return w.reshape(num_bs, -1, w.shape[-1])


def _block_power(w: np.ndarray, num_bs: int) -> np.ndarray:
    return np.sum(np.abs(_blocks(w, num_bs)) ** 2, axis=(1, 2))


def _normal_equations(hbar, u, q):
    uq = u @ q
    gram = hermitian(hbar.conj().T @ uq @ u.conj().T @ hbar)
    return gram, hbar.conj().T @ uq


def _factor(gram, mu, nt):
    j1 = gram + np.diag(np.repeat(mu, nt))
    try:
        c = sla.cho_factor(j1, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise DegenerateDualError("stationarity matrix is singular") from exc
    piv = np.abs(np.diag(c[0])) ** 2
    if piv.min() <= 1e-14 * max(piv.max(), 1e-300):
        raise DegenerateDualError("stationarity matrix is numerically singular")
    return c


def beamformer_closed_form(mu, hbar: np.ndarray, u: np.ndarray, q: np.ndarray, tx_antennas: int) -> np.ndarray:
    """Minimizer of the Lagrangian at multipliers ``mu``.

    Solves ``(Hbar^H U Q U^H Hbar + blockdiag(mu_n I)) W = Hbar^H U Q``.
    ``hbar`` is the stacked effective channel ``(N_r, N*N_t)``.
    """
    mu = np.asarray(mu, dtype=float)
    gram, rhs = _normal_equations(hbar, u, q)
    c = _factor(gram, mu, tx_antennas)
    return sla.cho_solve(c, rhs, check_finite=False)


def beamforming_objective(w, hbar, u, q) -> float:
    """``Tr(Q U^H Hbar W W^H Hbar^H U) - 2 Re Tr(Q U^H Hbar W)``."""
    a = u.conj().T @ hbar @ w
    return float(np.real(np.trace(q @ a @ a.conj().T)) - 2 * np.real(np.trace(q @ a)))


def dual_subgradient(
    hbar: np.ndarray,
    u: np.ndarray,
    q: np.ndarray,
    num_bs: int,
    max_power: float = 1.0,
    tol: float = 1e-7,
    max_iter: int = 500,
    step: float = 0.1,
    step_rule: str = "scaled",
) -> DualResult:
    """Solve the power-constrained beamforming subproblem through its dual.

    Multipliers move along the projected subgradient
    ``mu_n <- [mu_n + pi_n (||W_n||^2 - P)]^+``. With ``step_rule="scaled"``
    (default) ``pi_n = step_scale / |d||W_n||^2 / d mu_n|``, halving
    ``step_scale`` whenever the dual value would drop; ``"diminishing"``
    uses ``pi_n = step / sqrt(t)``.

    The returned ``W`` is the Lagrangian minimizer at the final multipliers,
    with any block still over budget scaled back onto its constraint.
    """
    nt = hbar.shape[1] // num_bs
    gram, rhs = _normal_equations(hbar, u, q)

    def solve(mu):
        try:
            c = _factor(gram, mu, nt)
        except DegenerateDualError:
            mu = mu + 1e-9
            c = _factor(gram, mu, nt)
        w = sla.cho_solve(c, rhs, check_finite=False)
        g = -float(np.real(np.vdot(rhs, w))) - max_power * mu.sum()
        return mu, c, w, g

    mu = np.zeros(num_bs)
    mu, c, w, g = solve(mu)
    if np.all(_block_power(w, num_bs) <= max_power):
        # unconstrained optimum is feasible: mu = 0 satisfies KKT
        return DualResult(w, mu, beamforming_objective(w, hbar, u, q), g, 1, True)

    # start the multipliers where the unconstrained solution would shrink to budget
    mu = np.full(num_bs, 1e-6 * max(1.0, np.real(np.trace(gram)) / gram.shape[0]))
    mu, c, w, g = solve(mu)
    scale = 1.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        excess = _block_power(w, num_bs) - max_power
        if step_rule == "scaled":
            wb = _blocks(w, num_bs)
            slope = np.empty(num_bs)
            for n in range(num_bs):
                sel = np.zeros_like(w)
                sel[n * nt:(n + 1) * nt] = wb[n]
                dw = -sla.cho_solve(c, sel, check_finite=False)
                slope[n] = 2 * np.real(np.vdot(wb[n], dw[n * nt:(n + 1) * nt]))
            pi = 1.0 / np.maximum(np.abs(slope), 1e-300)
        elif step_rule == "diminishing":
            pi = np.full(num_bs, step * max_power / np.sqrt(it))
        else:
            raise ValueError(f"unknown step rule {step_rule!r}")

        while True:
            mu_new = np.maximum(mu + scale * pi * excess, 0.0)
            mu_new, c_new, w_new, g_new = solve(mu_new)
            if step_rule != "scaled" or g_new >= g - 1e-14 * (1 + abs(g)) or scale < 1e-6:
                break
            scale *= 0.5
        gain = g_new - g
        mu, c, w, g = mu_new, c_new, w_new, g_new
        if step_rule == "scaled":
            scale = min(1.0, 2 * scale)
        power = _block_power(w, num_bs)
        feasible = np.all(power <= max_power * (1 + 1e-9))
        slack = np.max(mu * np.abs(power - max_power))
        if abs(gain) <= tol * max(1.0, abs(g)) and feasible and slack <= 1e-6 * max_power * max(1.0, mu.max()):
            converged = True
            break

    power = _block_power(w, num_bs)
    fix = np.sqrt(np.minimum(1.0, max_power / power))
    w = (_blocks(w, num_bs) * fix[:, None, None]).reshape(w.shape)
    return DualResult(w, mu, beamforming_objective(w, hbar, u, q), g, it, converged)


# -- phases: quadratic form and MM ------------------------------------------

@dataclass
class QuadraticPhaseForm:
    """``f(phi) = phi^H (A o E~^T) phi + 2 Re(z^H phi)`` plus its constants.

    ``objective(phi) = f(phi) + c_2 - 2 Re c_1`` is the phase-dependent part
    of ``Tr(Q E)``.
    """

    A: np.ndarray
    E_tilde: np.ndarray
    D: np.ndarray
    B: np.ndarray
    z: np.ndarray
    c1: complex
    c2: float
    gamma: np.ndarray = field(init=False)
    lambda_max: float = field(init=False)

    def __post_init__(self):
        self.gamma = hermitian(self.A * self.E_tilde.T)
        m = self.gamma.shape[0]
        self.lambda_max = max(float(np.linalg.eigvalsh(self.gamma)[-1]), 0.0) if m else 0.0

    @property
    def size(self) -> int:
        return self.z.size

    def f(self, phi: np.ndarray) -> float:
        return float(np.real(np.vdot(phi, self.gamma @ phi)) + 2 * np.real(np.vdot(self.z, phi)))

    def objective(self, phi: np.ndarray) -> float:
        return self.f(phi) + self.c2 - 2 * float(np.real(self.c1))

    def surrogate(self, phi: np.ndarray, phi_r: np.ndarray) -> float:
        """Majorizer of ``f`` tangent at ``phi_r``."""
        lam = self.lambda_max
        rest = lam * phi_r - self.gamma @ phi_r
        return float(
            lam * np.real(np.vdot(phi, phi))
            - 2 * np.real(np.vdot(phi, rest))
            + np.real(np.vdot(phi_r, rest))
            + 2 * np.real(np.vdot(self.z, phi))
        )


def build_phase_form(channels: ChannelSet, ws: np.ndarray, u: np.ndarray, q: np.ndarray, k: int = 0) -> QuadraticPhaseForm:
    """Phase-dependent part of user ``k``'s weighted MSE.

    ``ws`` holds every user's stacked beamformer, ``(K, N*N_t, d)``; the
    interference terms from users ``j != k`` enter through ``E~``.
    """
    hr = channels.irs_user[k]
    gr = stacked_bs_irs(channels)
    hd = stacked_direct(channels, k)
    l1 = gr @ ws  # (K, M, d)
    l2 = hd @ ws  # (K, N_r, d)
    uqu = u @ q @ u.conj().T
    a = hermitian(hr.conj().T @ uqu @ hr)
    e = hermitian(np.einsum("jmd,jnd->mn", l1, l1.conj()))
    d_mat = hr.conj().T @ uqu @ np.einsum("jrd,jmd->rm", l2, l1.conj())
    b_mat = hr.conj().T @ u @ q @ l1[k].conj().T
    c1 = complex(np.trace(q @ l2[k].conj().T @ u))
    c2 = float(np.real(np.einsum("jrd,jsd,sr->", l2, l2.conj(), uqu)))
    z = np.diag(d_mat - b_mat).copy()
    return QuadraticPhaseForm(a, e, d_mat, b_mat, z, c1, c2)


def mm_phase_step(form: QuadraticPhaseForm, phi_r: np.ndarray) -> np.ndarray:
    """Exact minimizer of the surrogate over the unit-modulus set.

    The surrogate is ``const + 2 Re(phi^H q)`` with
    ``q = z - (lambda_max I - A o E~^T) phi_r``, minimized by
    ``phi = -q / |q|``; entries with ``q_m = 0`` keep their phase.
    """
    qv = form.z - (form.lambda_max * phi_r - form.gamma @ phi_r)
    mag = np.abs(qv)
    scale = np.max(mag) if mag.size else 0.0
    keep = mag <= 1e-300 + 1e-15 * scale
    out = np.where(keep, phi_r, -qv / np.where(keep, 1.0, mag))
    return out / np.abs(out)


@dataclass
class MMResult:
    phi: np.ndarray
    values: list
    iterations: int
    converged: bool


def mm_optimize_phase(form: QuadraticPhaseForm, phi0: np.ndarray, tol: float = 1e-7, max_iter: int = 500) -> MMResult:
    """Iterate :func:`mm_phase_step` until the fractional decrease of ``f`` < ``tol``."""
    phi = np.asarray(phi0, dtype=complex)
    phi = phi / np.abs(phi)
    values = [form.f(phi)]
    if form.size == 0:
        return MMResult(phi, values, 0, True)
    for it in range(1, max_iter + 1):
        nxt = mm_phase_step(form, phi)
        val = form.f(nxt)
        if val > values[-1] + 1e-10 * max(1.0, abs(values[-1])):
            raise MonotonicityError(f"MM step increased f: {values[-1]} -> {val}")
        drop = values[-1] - val
        phi = nxt
        values.append(val)
        if drop <= tol * max(abs(val), 1e-300):
            return MMResult(phi, values, it, True)
    return MMResult(phi, values, max_iter, False)


# -- alternation --------------------------------------------------------------

def matched_filter_init(hbar: np.ndarray, num_bs: int, d: int, max_power: float) -> np.ndarray:
    """Per-BS ``Hbar_n^H`` projected onto its ``d`` strongest receive
    directions, scaled to ``||W_n||_F^2 = P``. Returns stacked ``(N*N_t, d)``."""
    nt = hbar.shape[1] // num_bs
    out = np.zeros((num_bs, nt, d), dtype=complex)
    for n in range(num_bs):
        h = hbar[:, n * nt:(n + 1) * nt]
        left, _, _ = np.linalg.svd(h)
        w = h.conj().T @ left[:, :d]
        if w.shape[1] < d:
            w = np.hstack([w, np.zeros((nt, d - w.shape[1]))])
        norm = np.linalg.norm(w)
        if norm <= 1e-300:
            w = np.eye(nt, d, dtype=complex)
            norm = np.linalg.norm(w)
        out[n] = w * np.sqrt(max_power) / norm
    return out.reshape(num_bs * nt, d)


@dataclass
class SingleUserResult:
    w: np.ndarray  # (N, 1, N_t, d) in watts^(1/2)
    phase: PhaseProfile
    rate: float  # nats
    trajectory: list
    iterations: int
    converged: bool


def _check_nondecreasing(prev: float, new: float, what: str, rtol: float = 1e-8):
    if new < prev - rtol * max(1.0, abs(prev)):
        raise MonotonicityError(f"{what} decreased: {prev!r} -> {new!r}")


def optimize_single_user(
    config: SystemConfig,
    channels: ChannelSet,
    phase0: Optional[PhaseProfile] = None,
    optimize_phase: bool = True,
    rng: Optional[np.random.Generator] = None,
    step_rule: str = "scaled",
) -> SingleUserResult:
    """Alternate MMSE receiver, weight, beamformer and phase updates.

    The trajectory records, per outer iteration, the rate in nats (equal to
    the weighted-MSE objective at the closed-form ``U``, ``Q``) and the
    per-BS powers in watts. With ``optimize_phase=False`` the phases stay at
    ``phase0`` and only beamforming is optimized.
    """
    if channels.num_users != 1:
        raise ValueError("single-user solver needs exactly one user")
    n, d = channels.num_bs, config.streams
    m = channels.num_irs_elements
    if phase0 is None:
        rng = rng if rng is not None else make_rng(config.seed, 0xF1)
        phase0 = PhaseProfile.random(m, rng)
    if len(phase0) != m:
        raise ValueError("phase profile length does not match the IRS size")
    ch = whiten(channels, config.max_power, config.noise_power)
    phi = phase0.phi
    hbar = effective_channel(ch, phi, 0)
    w = matched_filter_init(hbar, n, d, 1.0)

    def state(hbar, w):
        ws = w[None]
        u = mmse_receiver(hbar, ws, 0, 1.0)
        q = optimal_weight(mse_matrix(hbar, ws, 0, u, 1.0))
        return u, q

    rate = user_rate(hbar, w[None], 0, 1.0)
    traj = [{"iteration": 0, "objective": rate,
             "power": (_block_power(w, n) * config.max_power).tolist()}]
    converged = False
    it = 0
    for it in range(1, config.max_outer_iterations + 1):
        u, q = state(hbar, w)
        base = mse_objective(q, mse_matrix(hbar, w[None], 0, u, 1.0))

        res = dual_subgradient(hbar, u, q, n, 1.0, config.inner_tol,
                               config.max_subgradient_iterations, config.subgradient_step, step_rule)
        cand = mse_objective(q, mse_matrix(hbar, res.w[None], 0, u, 1.0))
        if cand >= base:
            w, after_w = res.w, cand
        else:
            after_w = base  # keep the incumbent; the new iterate is no better
        _check_nondecreasing(base, after_w, "beamforming step")

        if optimize_phase and m > 0:
            form = build_phase_form(ch, w[None], u, q)
            mm = mm_optimize_phase(form, phi, config.inner_tol, config.max_mm_iterations)
            phi = mm.phi
            hbar = effective_channel(ch, phi, 0)
            after_phi = mse_objective(q, mse_matrix(hbar, w[None], 0, u, 1.0))
            _check_nondecreasing(after_w, after_phi, "phase step")

        new_rate = user_rate(hbar, w[None], 0, 1.0)
        _check_nondecreasing(rate, new_rate, "outer objective")
        traj.append({"iteration": it, "objective": new_rate,
                     "power": (_block_power(w, n) * config.max_power).tolist()})
        gain = new_rate - rate
        rate = new_rate
        if gain <= config.tol * max(abs(rate), 1e-12):
            converged = True
            break

    w_out = (w * np.sqrt(config.max_power)).reshape(n, 1, -1, d)
    return SingleUserResult(w_out, PhaseProfile.from_phi(phi), rate, traj, it, converged)
