"""Effective channels, achievable rates and the weighted-MSE quantities.

Rates are in nats throughout; divide by ``ln 2`` only when reporting.

Beamformers are held as complex arrays of shape ``(N, K, N_t, d)`` (per BS,
per user). Most functions take the *stacked* form ``(K, N*N_t, d)`` where
``W_k`` is the vertical concatenation of ``W_{1,k}, ..., W_{N,k}``.

``noise`` arguments accept either the scalar per-antenna power ``sigma^2``
or a full ``N_r x N_r`` covariance (used by the relay baseline, whose
forwarded noise is colored).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .scenario import ChannelSet

LN2 = np.log(2.0)


def nats_to_bits(x):
    return x / LN2


def hermitian(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.swapaxes(a, -1, -2).conj())


def psd_sqrt(a: np.ndarray) -> np.ndarray:
    """Hermitian square root of a Hermitian PSD matrix."""
    w, v = np.linalg.eigh(hermitian(a))
    return hermitian((v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T)


def stack(w: np.ndarray) -> np.ndarray:
    """``(N, K, N_t, d) -> (K, N*N_t, d)``."""
    n, k, nt, d = w.shape
    return np.transpose(w, (1, 0, 2, 3)).reshape(k, n * nt, d)


def unstack(ws: np.ndarray, num_bs: int) -> np.ndarray:
    """Inverse of :func:`stack`."""
    k, nnt, d = ws.shape
    return np.transpose(ws.reshape(k, num_bs, nnt // num_bs, d), (1, 0, 2, 3))


def per_bs_power(w: np.ndarray) -> np.ndarray:
    return np.sum(np.abs(w) ** 2, axis=(1, 2, 3))


@dataclass
class BeamformerSet:
    per_bs: np.ndarray  # (N, K, N_t, d)

    def __post_init__(self):
        self.per_bs = np.asarray(self.per_bs, dtype=complex)
        if self.per_bs.ndim != 4:
            raise ValueError("beamformers must have shape (N, K, N_t, d)")
        if not np.all(np.isfinite(self.per_bs)):
            raise ValueError("beamformer entries must be finite")

    @property
    def stacked(self) -> np.ndarray:
        return stack(self.per_bs)

    @property
    def powers(self) -> np.ndarray:
        return per_bs_power(self.per_bs)

    def is_feasible(self, max_power: float, atol: float = 1e-9) -> bool:
        return bool(np.all(self.powers <= max_power + atol))


def _noise_cov(noise, nr: int) -> np.ndarray:
    noise = np.asarray(noise)
    if noise.ndim == 0:
        return float(noise) * np.eye(nr)
    return noise


def effective_channel(channels: ChannelSet, phi: np.ndarray, k: int) -> np.ndarray:
    """``[H_1k + H_rk Phi G_1r, ..., H_Nk + H_rk Phi G_Nr]`` as ``(N_r, N*N_t)``."""
    n = channels.num_bs
    refl = np.einsum("rm,m,nmt->nrt", channels.irs_user[k], phi, channels.bs_irs)
    blocks = channels.direct[:, k] + refl
    return np.concatenate(list(blocks), axis=1) if n > 1 else blocks[0]


def effective_channels(channels: ChannelSet, phi: np.ndarray) -> np.ndarray:
    """All users' effective channels, ``(K, N_r, N*N_t)``."""
    refl = np.einsum("krm,m,nmt->nkrt", channels.irs_user, phi, channels.bs_irs)
    blocks = channels.direct + refl  # (N, K, N_r, N_t)
    return np.transpose(blocks, (1, 2, 0, 3)).reshape(
        channels.num_users, channels.rx_antennas, -1
    )


def _logdet_pd(a: np.ndarray) -> float:
    sign, val = np.linalg.slogdet(hermitian(a))
    if sign.real <= 0:
        raise np.linalg.LinAlgError("matrix not positive definite")
    return float(val)


def user_rate(hbar_k: np.ndarray, ws: np.ndarray, k: int, noise) -> float:
    """``ln det(I + Hbar_k W_k W_k^H Hbar_k^H F_k^-1)`` in nats."""
    if not (np.all(np.isfinite(hbar_k)) and np.all(np.isfinite(ws))):
        raise FloatingPointError("nonfinite input to user_rate")
    a = hbar_k @ ws  # (K, N_r, d)
    cov = np.einsum("jrd,jsd->rs", a, a.conj())
    sig = a[k] @ a[k].conj().T
    f = _noise_cov(noise, hbar_k.shape[0]) + cov - sig
    return max(_logdet_pd(f + sig) - _logdet_pd(f), 0.0)


def user_rates(channels: ChannelSet, phi: np.ndarray, w: np.ndarray, noise) -> np.ndarray:
    hbar = effective_channels(channels, phi)
    ws = stack(w)
    return np.array([user_rate(hbar[k], ws, k, noise) for k in range(hbar.shape[0])])


def min_rate(channels: ChannelSet, phi: np.ndarray, w: np.ndarray, noise) -> float:
    return float(np.min(user_rates(channels, phi, w, noise)))


def receive_covariance(hbar_k: np.ndarray, ws: np.ndarray, noise) -> np.ndarray:
    """``J_k = Hbar_k (sum_j W_j W_j^H) Hbar_k^H + noise``."""
    a = hbar_k @ ws
    return hermitian(np.einsum("jrd,jsd->rs", a, a.conj()) + _noise_cov(noise, hbar_k.shape[0]))


def mse_matrix(hbar_k, ws, k, u_k, noise) -> np.ndarray:
    j = receive_covariance(hbar_k, ws, noise)
    cross = u_k.conj().T @ hbar_k @ ws[k]
    d = ws.shape[-1]
    return hermitian(u_k.conj().T @ j @ u_k - cross - cross.conj().T + np.eye(d))


def mmse_receiver(hbar_k, ws, k, noise) -> np.ndarray:
    """``J_k^-1 Hbar_k W_k`` via a Hermitian solve."""
    j = receive_covariance(hbar_k, ws, noise)
    return sla.solve(j, hbar_k @ ws[k], assume_a="pos")


def mmse_error(hbar_k, ws, k, noise) -> np.ndarray:
    """``I - W_k^H Hbar_k^H J_k^-1 Hbar_k W_k``, the MSE at the MMSE receiver."""
    g = hbar_k @ ws[k]
    j = receive_covariance(hbar_k, ws, noise)
    return hermitian(np.eye(ws.shape[-1]) - g.conj().T @ sla.solve(j, g, assume_a="pos"))


def optimal_weight(e: np.ndarray) -> np.ndarray:
    e = hermitian(np.atleast_2d(e))
    w = np.linalg.eigvalsh(e)
    if w[0] <= 0:
        raise np.linalg.LinAlgError("MSE matrix is singular")
    return hermitian(np.linalg.inv(e))


def mse_objective(q: np.ndarray, e: np.ndarray) -> float:
    """``ln det Q - Tr(Q E) + d``."""
    q = np.atleast_2d(q)
    e = np.atleast_2d(e)
    return _logdet_pd(q) - float(np.real(np.trace(q @ e))) + q.shape[0]


def mse_state(channels: ChannelSet, phi: np.ndarray, w: np.ndarray, noise):
    """Closed-form receivers and weights for every user.

    Returns ``(U, Q)`` with shapes ``(K, N_r, d)`` and ``(K, d, d)``.
    """
    hbar = effective_channels(channels, phi)
    ws = stack(w)
    us, qs = [], []
    for k in range(hbar.shape[0]):
        u = mmse_receiver(hbar[k], ws, k, noise)
        us.append(u)
        qs.append(optimal_weight(mse_matrix(hbar[k], ws, k, u, noise)))
    return np.array(us), np.array(qs)


def mse_objectives(channels, phi, w, us, qs, noise) -> np.ndarray:
    """Per-user ``ln|Q_k| - Tr(Q_k E_k) + d`` at given receivers/weights."""
    hbar = effective_channels(channels, phi)
    ws = stack(w)
    return np.array([
        mse_objective(qs[k], mse_matrix(hbar[k], ws, k, us[k], noise))
        for k in range(hbar.shape[0])
    ])
