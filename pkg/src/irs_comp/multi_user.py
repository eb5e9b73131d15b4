"""Multiuser max-min solver: SOCP beamforming and SDR phase design,
alternated with closed-form MMSE receivers and weights.

Like the single-user solver, work happens on whitened channels (unit
power budget, unit noise); beamformers are rescaled on output.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import SystemConfig
from .conic import Cone, SdpProblem, SocpProblem, solve_sdp, solve_socp
from .conic.problems import ROTATED, SOC
from .metrics import (
    effective_channels,
    hermitian,
    mmse_receiver,
    mse_matrix,
    mse_objective,
    optimal_weight,
    psd_sqrt,
    user_rate,
)
from .scenario import ChannelSet, PhaseProfile, make_rng
from .single_user import MonotonicityError, QuadraticPhaseForm, build_phase_form, whiten


class DegenerateWeightError(np.linalg.LinAlgError):
    pass


class SolverFailure(RuntimeError):
    pass


# -- receivers and weights -----------------------------------------------------

def user_noise(noise, k: int):
    """Noise of user ``k``: a scalar, or entry ``k`` of a ``(K, N_r, N_r)`` stack."""
    noise = np.asarray(noise)
    return noise[k] if noise.ndim == 3 else noise


def mse_state_stacked(hbar: np.ndarray, ws: np.ndarray, noise=1.0):
    """Closed-form ``U_k``, ``Q_k`` for stacked channels ``(K, N_r, N*N_t)``."""
    us, qs = [], []
    for k in range(hbar.shape[0]):
        nk = user_noise(noise, k)
        u = mmse_receiver(hbar[k], ws, k, nk)
        us.append(u)
        qs.append(optimal_weight(mse_matrix(hbar[k], ws, k, u, nk)))
    return np.array(us), np.array(qs)


def mse_values(hbar, ws, us, qs, noise=1.0) -> np.ndarray:
    return np.array([
        mse_objective(qs[k], mse_matrix(hbar[k], ws, k, us[k], user_noise(noise, k)))
        for k in range(hbar.shape[0])
    ])


def min_user_rate(hbar, ws, noise=1.0) -> float:
    return min(user_rate(hbar[k], ws, k, user_noise(noise, k)) for k in range(hbar.shape[0]))


# -- SOCP for beamforming ------------------------------------------------------

@dataclass
class SocpVectors:
    eta: list  # per BS, complex
    omega: list  # per user, complex
    rhs: np.ndarray  # per user


def _noise_matrix(noise, nr):
    noise = np.asarray(noise)
    return float(noise) * np.eye(nr) if noise.ndim == 0 else noise


def socp_vectors(hbar, ws, us, qs, num_bs: int, noise=1.0) -> SocpVectors:
    """``eta_n``, ``omega_k`` and the rate-cone right-hand sides.

    ``||omega_k||^2 + Tr(Q_k U_k^H N U_k) = Tr(Q_k E_k)`` where ``N`` is the
    noise covariance, so ``ln|Q_k| - Tr(Q_k E_k) + d >= R`` is
    ``||omega_k||^2 <= rhs_k - R``.
    """
    k_users, nnt, d = ws.shape
    nt = nnt // num_bs
    eta = [ws[:, n * nt:(n + 1) * nt, :].reshape(-1) for n in range(num_bs)]
    omega, rhs = [], []
    for k in range(k_users):
        qh = psd_sqrt(qs[k])
        ck = hbar[k].conj().T @ us[k] @ qh
        blocks = [ws[j].conj().T @ ck for j in range(k_users)]
        blocks[k] = blocks[k] - qh
        omega.append(np.concatenate([b.reshape(-1) for b in blocks]))
        nm = _noise_matrix(user_noise(noise, k), us.shape[1])
        _, logdet = np.linalg.slogdet(qs[k])
        rhs.append(logdet + d - np.real(np.trace(qs[k] @ us[k].conj().T @ nm @ us[k])))
    return SocpVectors(eta, omega, np.array(rhs))


def _realify(t: np.ndarray) -> np.ndarray:
    """Real matrix acting on ``[Re v; Im v]`` equal to complex ``t @ v``."""
    return np.block([[t.real, -t.imag], [t.imag, t.real]])


def build_socp_problem(hbar, ws, us, qs, num_bs: int, max_power: float = 1.0, noise=1.0) -> SocpProblem:
    """Max-min beamforming at fixed receivers and weights.

    Variables: ``[Re vec(W), Im vec(W), R]`` where ``vec`` flattens the
    stacked beamformers ``(K, N*N_t, d)`` in row-major order. The current
    ``ws`` (shrunk slightly) with ``R`` one below its implied rate bound is
    supplied as a strictly feasible start.
    """
    k_users, nnt, d = ws.shape
    nt = nnt // num_bs
    size = k_users * nnt * d
    nvar = 2 * size + 1
    for q in qs:
        if np.linalg.eigvalsh(hermitian(q))[0] <= 0:
            raise DegenerateWeightError("weight matrix is not positive definite")

    cones = []
    idx = np.arange(size).reshape(k_users, nnt, d)
    for n in range(num_bs):
        sel = idx[:, n * nt:(n + 1) * nt, :].reshape(-1)
        t = np.zeros((sel.size, size))
        t[np.arange(sel.size), sel] = 1.0
        a = np.hstack([_realify(t), np.zeros((2 * sel.size, 1))])
        cones.append(Cone(SOC, a, np.zeros(2 * sel.size), np.zeros(nvar), float(np.sqrt(max_power))))

    rhs = []
    for k in range(k_users):
        nm = _noise_matrix(user_noise(noise, k), us.shape[1])
        qh = psd_sqrt(qs[k])
        ck = hbar[k].conj().T @ us[k] @ qh  # (N*N_t, d)
        blk = np.kron(ck.conj().T, np.eye(d))  # vec(C^H W_j) from vec(W_j)
        t = np.zeros((k_users * d * d, size), dtype=complex)
        for j in range(k_users):
            t[j * d * d:(j + 1) * d * d, j * nnt * d:(j + 1) * nnt * d] = blk
        b = np.zeros(k_users * d * d, dtype=complex)
        b[k * d * d:(k + 1) * d * d] = -qh.reshape(-1)
        a = np.hstack([_realify(t), np.zeros((2 * t.shape[0], 1))])
        f = np.zeros(nvar)
        f[-1] = -1.0
        _, logdet = np.linalg.slogdet(qs[k])
        r = logdet + d - np.real(np.trace(qs[k] @ us[k].conj().T @ nm @ us[k]))
        rhs.append(r)
        cones.append(Cone(ROTATED, a, np.concatenate([b.real, b.imag]), f, float(r)))

    v = (ws * 0.999).reshape(-1)
    x0 = np.concatenate([v.real, v.imag, [0.0]])
    slack = min(c.slack(x0) for c in cones[num_bs:])
    x0[-1] = slack - 1.0
    return SocpProblem(nvar, nvar - 1, tuple(cones), x0)


def socp_beamformers(x: np.ndarray, shape) -> np.ndarray:
    size = int(np.prod(shape))
    return (x[:size] + 1j * x[size:2 * size]).reshape(shape)


# -- SDR for phases ----------------------------------------------------------

@dataclass
class SdrData:
    psi: np.ndarray  # (K, M+1, M+1)
    const: np.ndarray  # (K,)
    forms: list  # per-user QuadraticPhaseForm

    @property
    def num_elements(self) -> int:
        return self.psi.shape[1] - 1

    def objective(self, phi: np.ndarray) -> float:
        """``min_k (const_k - phi_aug^H Psi_k phi_aug)``."""
        return float(np.min(self.values(phi)))

    def values(self, phi: np.ndarray) -> np.ndarray:
        aug = np.append(phi, 1.0)
        return self.const - np.real(np.einsum("i,kij,j->k", aug.conj(), self.psi, aug))


def build_sdr_data(channels: ChannelSet, ws, us, qs, noise=1.0) -> SdrData:
    """Per-user phase quadratics lifted to ``(M+1) x (M+1)`` matrices.

    The rate-constraint value of user ``k`` at phases ``phi`` is
    ``const_k - phi_aug^H Psi_k phi_aug``.
    """
    k_users, _, d = ws.shape
    m = channels.num_irs_elements
    psi = np.zeros((k_users, m + 1, m + 1), dtype=complex)
    const = np.zeros(k_users)
    forms = []
    nm = _noise_matrix(noise, us.shape[1])
    for k in range(k_users):
        form = build_phase_form(channels, ws, us[k], qs[k], k)
        forms.append(form)
        psi[k, :m, :m] = form.gamma
        psi[k, :m, m] = form.z
        psi[k, m, :m] = form.z.conj()
        _, logdet = np.linalg.slogdet(qs[k])
        const[k] = (logdet + d + 2 * np.real(form.c1) - form.c2
                    - np.real(np.trace(qs[k] @ (us[k].conj().T @ nm @ us[k] + np.eye(d)))))
    return SdrData(psi, const, forms)


def gaussian_randomization(theta: np.ndarray, sdr: SdrData, count: int, rng: np.random.Generator,
                           rank_tol: float = 1e-8):
    """Best unit-modulus ``phi`` drawn around the relaxed solution.

    Returns ``(phi, objective, rank_one)``. Candidates are
    ``exp(j arg(x[:M] / x[M]))`` with ``x = V S^(1/2) v``; ties go to the
    lowest candidate index.
    """
    m = sdr.num_elements
    lam, vec = np.linalg.eigh(hermitian(theta))
    lam = np.clip(lam, 0.0, None)
    if lam[-1] <= 0:
        raise ValueError("relaxed solution is zero")
    if m == 0:
        return np.zeros(0, dtype=complex), sdr.objective(np.zeros(0)), True
    rank_one = lam[-2] < rank_tol * lam[-1]
    if rank_one:
        x = vec[:, -1:]
    else:
        v = (rng.standard_normal((m + 1, count)) + 1j * rng.standard_normal((m + 1, count))) / np.sqrt(2)
        x = (vec * np.sqrt(lam)) @ v
    ratio = x[:m] / np.where(np.abs(x[m]) > 0, x[m], 1.0)
    cand = np.exp(1j * np.angle(ratio))  # (M, C)
    aug = np.vstack([cand, np.ones((1, cand.shape[1]))])
    quad = np.real(np.einsum("ic,kij,jc->kc", aug.conj(), sdr.psi, aug))
    vals = np.min(sdr.const[:, None] - quad, axis=0)
    best = int(np.argmax(vals))
    return cand[:, best], float(vals[best]), bool(rank_one)


# -- alternation -------------------------------------------------------------

def matched_filter_init_multi(hbar: np.ndarray, num_bs: int, d: int, max_power: float) -> np.ndarray:
    """``W_{n,k}`` along ``Hbar_{n,k}^H``'s strongest directions with
    ``||W_{n,k}||_F^2 = P / K``. Returns stacked ``(K, N*N_t, d)``."""
    k_users, nr, nnt = hbar.shape
    nt = nnt // num_bs
    out = np.zeros((k_users, num_bs, nt, d), dtype=complex)
    for k in range(k_users):
        for n in range(num_bs):
            h = hbar[k, :, n * nt:(n + 1) * nt]
            left, _, _ = np.linalg.svd(h)
            w = h.conj().T @ left[:, :d]
            if w.shape[1] < d:
                w = np.hstack([w, np.zeros((nt, d - w.shape[1]))])
            norm = np.linalg.norm(w)
            if norm <= 1e-300:
                w = np.eye(nt, d, dtype=complex)
                norm = np.linalg.norm(w)
            out[k, n] = w * np.sqrt(max_power / k_users) / norm
    return out.reshape(k_users, nnt, d)


@dataclass
class MultiUserResult:
    w: np.ndarray  # (N, K, N_t, d) in watts^(1/2)
    phase: PhaseProfile
    rate: float  # min-rate, nats
    trajectory: list
    iterations: int
    converged: bool


def _check(prev, new, what, rtol=1e-8):
    if new < prev - rtol * max(1.0, abs(prev)):
        raise MonotonicityError(f"{what} decreased: {prev!r} -> {new!r}")


def optimize_multi_user(
    config: SystemConfig,
    channels: ChannelSet,
    phase0: Optional[PhaseProfile] = None,
    optimize_phase: bool = True,
    rng: Optional[np.random.Generator] = None,
) -> MultiUserResult:
    """Alternate MMSE updates, SOCP beamforming and SDR phases.

    Each trajectory record holds the min-rate after the iteration, the
    SOCP value, the relaxed SDP value and its dual bound, the randomized
    value and whether the phase update was accepted.
    """
    rng = rng if rng is not None else make_rng(config.seed, 0xF2)
    n, d = channels.num_bs, config.streams
    m = channels.num_irs_elements
    if phase0 is None:
        phase0 = PhaseProfile.random(m, rng)
    if len(phase0) != m:
        raise ValueError("phase profile length does not match the IRS size")
    ch = whiten(channels, config.max_power, config.noise_power)
    phi = phase0.phi
    hbar = effective_channels(ch, phi)
    ws = matched_filter_init_multi(hbar, n, d, 1.0)

    rate = min_user_rate(hbar, ws)
    traj = [{"iteration": 0, "objective": rate, "socp": None, "sdp": None,
             "sdp_bound": None, "randomized": None, "accepted": None, "rank_one": None}]
    converged = False
    it = 0
    for it in range(1, config.max_outer_iterations + 1):
        us, qs = mse_state_stacked(hbar, ws)
        base = float(np.min(mse_values(hbar, ws, us, qs)))

        try:
            prob = build_socp_problem(hbar, ws, us, qs, n)
        except DegenerateWeightError:
            qs = qs + 1e-10 * np.eye(d)
            prob = build_socp_problem(hbar, ws, us, qs, n)
        sol = solve_socp(prob)
        if sol.x is None:
            raise SolverFailure(f"SOCP failed at iteration {it}: {sol.status}")
        cand = socp_beamformers(sol.x, ws.shape)
        power = np.sum(np.abs(cand.reshape(cand.shape[0], n, -1, d)) ** 2, axis=(0, 2, 3))
        cand = cand / np.sqrt(max(1.0, power.max()))
        cand_val = float(np.min(mse_values(hbar, cand, us, qs)))
        if cand_val >= base:
            ws, after_w = cand, cand_val
        else:
            after_w = base
        _check(base, after_w, "beamforming step")
        rec = {"iteration": it, "socp": float(sol.objective), "sdp": None, "sdp_bound": None,
               "randomized": None, "accepted": None, "rank_one": None}

        if optimize_phase and m > 0:
            sdr = build_sdr_data(ch, ws, us, qs)
            current = sdr.objective(phi)
            sdp = solve_sdp(SdpProblem(sdr.psi, sdr.const))
            if sdp.theta is None:
                raise SolverFailure(f"SDP failed at iteration {it}: {sdp.status}")
            new_phi, rand_val, rank_one = gaussian_randomization(sdp.theta, sdr, config.randomization_count, rng)
            bound = float(sdp.info.get("dual_objective", sdp.objective))
            accepted = rand_val > current
            if accepted:
                phi = new_phi
                hbar = effective_channels(ch, phi)
            after_phi = max(rand_val, current)
            _check(after_w, after_phi, "phase step", rtol=1e-7)
            rec.update(sdp=float(sdp.objective), sdp_bound=bound, randomized=rand_val,
                       accepted=bool(accepted), rank_one=rank_one)

        new_rate = min_user_rate(hbar, ws)
        _check(rate, new_rate, "outer objective")
        rec["objective"] = new_rate
        traj.append(rec)
        gain = new_rate - rate
        rate = new_rate
        if gain <= config.tol * max(abs(rate), 1e-12):
            converged = True
            break

    k_users = ws.shape[0]
    w_out = np.transpose((ws * np.sqrt(config.max_power)).reshape(k_users, n, -1, d), (1, 0, 2, 3))
    return MultiUserResult(w_out, PhaseProfile.from_phi(phi), rate, traj, it, converged)
