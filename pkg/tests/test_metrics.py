import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from irs_comp.metrics import (
    LN2,
    BeamformerSet,
    effective_channel,
    effective_channels,
    mmse_error,
    mmse_receiver,
    mse_matrix,
    mse_objective,
    optimal_weight,
    psd_sqrt,
    stack,
    unstack,
    user_rate,
)
from irs_comp.scenario import ChannelSet

from conftest import crandn, random_channels, random_unit


def scalar_channels(h=1.0, hr=2.0, g=3.0):
    return ChannelSet(np.full((1, 1, 1, 1), h, complex), np.full((1, 1, 1), g, complex),
                      np.full((1, 1, 1), hr, complex))


def one(x):
    return np.full((1, 1), x, complex)


# -- effective channel ---------------------------------------------------------

def test_effective_channel_scalars():
    ch = scalar_channels()
    assert effective_channel(ch, np.array([1.0 + 0j]), 0)[0, 0] == pytest.approx(7.0)
    assert effective_channel(ch, np.array([-1.0 + 0j]), 0)[0, 0] == pytest.approx(-5.0)


def test_effective_channel_without_reflection(rng):
    ch = random_channels(rng, n=3, k=2, m=5)
    ch = ChannelSet(ch.direct, ch.bs_irs, np.zeros_like(ch.irs_user))
    hbar = effective_channel(ch, random_unit(rng, 5), 1)
    np.testing.assert_allclose(hbar, np.concatenate(list(ch.direct[:, 1]), axis=1))


def test_effective_channels_stack_matches_single(rng):
    ch = random_channels(rng, n=2, k=3, m=6)
    phi = random_unit(rng, 6)
    all_ = effective_channels(ch, phi)
    for k in range(3):
        np.testing.assert_allclose(all_[k], effective_channel(ch, phi, k), atol=1e-12)


def test_stack_roundtrip(rng):
    w = crandn(rng, 3, 2, 4, 2)
    np.testing.assert_array_equal(unstack(stack(w), 3), w)
    bs = BeamformerSet(w)
    np.testing.assert_allclose(bs.powers, np.sum(np.abs(w) ** 2, axis=(1, 2, 3)))
    assert bs.is_feasible(bs.powers.max())


# -- rates ---------------------------------------------------------------------

def test_user_rate_scalar():
    assert user_rate(one(1.0), one(1.0)[None], 0, 1.0) == pytest.approx(np.log(2))


def test_user_rate_two_users():
    ws = np.ones((2, 1, 1), complex)
    for k in range(2):
        assert user_rate(one(1.0), ws, k, 1.0) == pytest.approx(np.log(1.5))


def test_user_rate_matches_eigen_oracle(rng):
    for _ in range(10):
        hbar = crandn(rng, 2, 4)
        ws = crandn(rng, 2, 4, 2)
        sig = hbar @ ws[0]
        f = hbar @ ws[1] @ (hbar @ ws[1]).conj().T + 0.7 * np.eye(2)
        # independent route: eigenvalues of F^-1/2 S S^H F^-1/2
        fe, fv = np.linalg.eigh(f)
        fih = fv @ np.diag(fe**-0.5) @ fv.conj().T
        lam = np.linalg.eigvalsh(fih @ sig @ sig.conj().T @ fih)
        assert user_rate(hbar, ws, 0, 0.7) == pytest.approx(np.sum(np.log1p(lam)), rel=1e-10)


def test_user_rate_zero_iff_no_signal(rng):
    hbar = crandn(rng, 2, 4)
    ws = crandn(rng, 2, 4, 2)
    ws[0] = 0
    assert user_rate(hbar, ws, 0, 1.0) == pytest.approx(0.0, abs=1e-14)
    assert user_rate(hbar, ws, 1, 1.0) > 0


def test_user_rate_rejects_nonfinite():
    with pytest.raises(FloatingPointError):
        user_rate(one(np.nan), one(1.0)[None], 0, 1.0)


# -- MSE chain -----------------------------------------------------------------

def test_scalar_mse_chain():
    h, w = one(1.0), one(1.0)[None]
    u = mmse_receiver(h, w, 0, 1.0)
    assert u[0, 0] == pytest.approx(0.5)
    e = mse_matrix(h, w, 0, one(0.5), 1.0)
    assert e[0, 0].real == pytest.approx(0.5)
    q = optimal_weight(e)
    assert q[0, 0].real == pytest.approx(2.0)
    assert mse_objective(q, e) == pytest.approx(np.log(2))
    assert mse_objective(q, e) == pytest.approx(user_rate(h, w, 0, 1.0))


def test_zero_receiver_gives_identity_mse(rng):
    hbar, ws = crandn(rng, 2, 4), crandn(rng, 2, 4, 2)
    np.testing.assert_allclose(mse_matrix(hbar, ws, 0, np.zeros((2, 2)), 1.0), np.eye(2), atol=1e-14)


def test_identity_weight_objective():
    assert mse_objective(np.eye(3), np.eye(3)) == pytest.approx(0.0, abs=1e-14)
    np.testing.assert_allclose(optimal_weight(np.eye(2)), np.eye(2))


def test_optimal_weight_inverse(rng):
    a = crandn(rng, 3, 3)
    e = a @ a.conj().T + 0.1 * np.eye(3)
    np.testing.assert_allclose(optimal_weight(e) @ e, np.eye(3), atol=1e-10)


def test_optimal_weight_rejects_singular():
    with pytest.raises(np.linalg.LinAlgError):
        optimal_weight(np.zeros((2, 2)))


def test_receiver_noise_limit(rng):
    hbar, ws = crandn(rng, 2, 4), crandn(rng, 2, 4, 2)
    assert np.max(np.abs(mmse_receiver(hbar, ws, 0, 1e12))) < 1e-10


def test_mmse_minimality(rng):
    hbar, ws = crandn(rng, 2, 4), crandn(rng, 3, 4, 2)
    u = mmse_receiver(hbar, ws, 1, 0.5)
    e_opt = mse_matrix(hbar, ws, 1, u, 0.5)
    np.testing.assert_allclose(e_opt, e_opt.conj().T, atol=1e-12)
    np.testing.assert_allclose(e_opt, mmse_error(hbar, ws, 1, 0.5), atol=1e-10)
    for _ in range(100):
        up = u + 0.3 * crandn(rng, 2, 2)
        e = mse_matrix(hbar, ws, 1, up, 0.5)
        assert np.real(np.trace(e)) >= np.real(np.trace(e_opt)) - 1e-12
        assert np.linalg.eigvalsh(e - e_opt)[0] >= -1e-10


@given(st.integers(0, 2**31), st.integers(1, 3), st.integers(1, 2), st.floats(0.05, 10.0))
def test_value_identity(seed, k_users, d, noise):
    rng = np.random.default_rng(seed)
    hbar = crandn(rng, 2, 5)
    ws = crandn(rng, k_users, 5, d)
    for k in range(k_users):
        u = mmse_receiver(hbar, ws, k, noise)
        q = optimal_weight(mse_matrix(hbar, ws, k, u, noise))
        assert mse_objective(q, mse_matrix(hbar, ws, k, u, noise)) == pytest.approx(
            user_rate(hbar, ws, k, noise), abs=1e-8)


def test_mse_objective_drops_off_mmse(rng):
    hbar, ws = crandn(rng, 2, 4), crandn(rng, 2, 4, 2)
    u = mmse_receiver(hbar, ws, 0, 1.0)
    q = optimal_weight(mse_matrix(hbar, ws, 0, u, 1.0))
    best = mse_objective(q, mse_matrix(hbar, ws, 0, u, 1.0))
    for _ in range(50):
        up = u + 0.2 * crandn(rng, 2, 2)
        assert mse_objective(q, mse_matrix(hbar, ws, 0, up, 1.0)) <= best + 1e-12


def test_psd_sqrt(rng):
    a = crandn(rng, 4, 4)
    q = a @ a.conj().T
    r = psd_sqrt(q)
    np.testing.assert_allclose(r @ r, q, atol=1e-10)
    np.testing.assert_allclose(r, r.conj().T, atol=1e-12)


def test_ln2_constant():
    assert LN2 == pytest.approx(np.log(2.0), abs=0)
