import numpy as np
import pytest

from irs_comp.config import SystemConfig
from irs_comp.conic import SdpProblem, solve_sdp, solve_socp
from irs_comp.metrics import effective_channels, mse_matrix, per_bs_power, psd_sqrt
from irs_comp.multi_user import (
    DegenerateWeightError,
    build_sdr_data,
    build_socp_problem,
    gaussian_randomization,
    matched_filter_init_multi,
    min_user_rate,
    mse_state_stacked,
    mse_values,
    optimize_multi_user,
    socp_beamformers,
    socp_vectors,
    user_noise,
)
from irs_comp.scenario import PhaseProfile, draw_realization
from irs_comp.single_user import build_phase_form, optimize_single_user

from conftest import crandn, random_channels, random_unit


def random_state(rng, k=3, n=2, nt=2, nr=2, d=2, noise=0.8):
    hbar = crandn(rng, k, nr, n * nt)
    ws = 0.5 * crandn(rng, k, n * nt, d)
    us, qs = mse_state_stacked(hbar, ws, noise)
    return hbar, ws, us, qs


# -- SOCP pieces ----------------------------------------------------------------

def test_user_noise():
    assert user_noise(2.0, 1) == 2.0
    stackd = np.arange(12.0).reshape(3, 2, 2)
    np.testing.assert_array_equal(user_noise(stackd, 2), stackd[2])


def test_omega_identity(rng):
    noise = 0.8
    hbar, ws, _, _ = random_state(rng)
    # off-optimal receivers and weights: the identity holds for any U, Q > 0
    us = crandn(rng, 3, 2, 2)
    qs = np.array([a @ a.conj().T + np.eye(2) for a in crandn(rng, 3, 2, 2)])
    vec = socp_vectors(hbar, ws, us, qs, 2, noise)
    for k in range(3):
        tr_qe = np.real(np.trace(qs[k] @ mse_matrix(hbar[k], ws, k, us[k], noise)))
        tr_noise = noise * np.real(np.trace(qs[k] @ us[k].conj().T @ us[k]))
        assert np.linalg.norm(vec.omega[k]) ** 2 + tr_noise == pytest.approx(tr_qe, rel=1e-10)
        _, logdet = np.linalg.slogdet(qs[k])
        assert vec.rhs[k] - np.linalg.norm(vec.omega[k]) ** 2 == pytest.approx(logdet - tr_qe + 2, rel=1e-10)
    for n in range(2):
        np.testing.assert_array_equal(vec.eta[n], ws[:, 2 * n:2 * n + 2].reshape(-1))


def test_socp_solution_reconstructs(rng):
    hbar, ws, us, qs = random_state(rng)
    sol = solve_socp(build_socp_problem(hbar, ws, us, qs, 2, noise=0.8))
    assert sol.ok
    w = socp_beamformers(sol.x, ws.shape)
    assert np.min(mse_values(hbar, w, us, qs, 0.8)) == pytest.approx(sol.objective, abs=1e-6)
    power = np.sum(np.abs(w.reshape(3, 2, 2, 2)) ** 2, axis=(0, 2, 3))
    assert np.all(power <= 1 + 1e-8)
    # the solution is at least as good as the starting point
    assert sol.objective >= np.min(mse_values(hbar, ws, us, qs, 0.8)) - 1e-8


def test_socp_zero_channel(rng):
    _, ws, us, qs = random_state(rng)
    hbar = np.zeros((3, 2, 4), complex)
    sol = solve_socp(build_socp_problem(hbar, ws, us, qs, 2, noise=0.8))
    expect = min(np.linalg.slogdet(qs[k])[1] + 2 - 0.8 * np.real(np.trace(qs[k] @ us[k].conj().T @ us[k]))
                 - np.real(np.trace(qs[k])) for k in range(3))
    assert sol.objective == pytest.approx(expect, abs=1e-7)


def test_socp_per_user_covariance(rng):
    hbar, ws, _, _ = random_state(rng)
    cov = np.array([a @ a.conj().T + np.eye(2) for a in crandn(rng, 3, 2, 2)])
    us, qs = mse_state_stacked(hbar, ws, cov)
    sol = solve_socp(build_socp_problem(hbar, ws, us, qs, 2, noise=cov))
    w = socp_beamformers(sol.x, ws.shape)
    assert np.min(mse_values(hbar, w, us, qs, cov)) == pytest.approx(sol.objective, abs=1e-6)


def test_socp_rejects_singular_weight(rng):
    hbar, ws, us, qs = random_state(rng)
    qs[1] = np.diag([1.0, 0.0])
    with pytest.raises(DegenerateWeightError):
        build_socp_problem(hbar, ws, us, qs, 2)


# -- SDR ------------------------------------------------------------------------

def sdr_setup(rng, k=2, m=5, noise=1.0):
    ch = random_channels(rng, n=2, k=k, m=m)
    ws = 0.5 * crandn(rng, k, 4, 2)
    hbar = effective_channels(ch, random_unit(rng, m))
    us, qs = mse_state_stacked(hbar, ws, noise)
    return ch, ws, us, qs


def test_sdr_trace_identity(rng):
    ch, ws, us, qs = sdr_setup(rng, k=3)
    sdr = build_sdr_data(ch, ws, us, qs, 0.7)
    for _ in range(10):
        phi = random_unit(rng, 5)
        direct = mse_values(effective_channels(ch, phi), ws, us, qs, 0.7)
        np.testing.assert_allclose(sdr.values(phi), direct, rtol=1e-9, atol=1e-9)
        aug = np.append(phi, 1.0)
        theta = np.outer(aug, aug.conj())
        assert SdpProblem(sdr.psi, sdr.const).objective_at(theta) == pytest.approx(sdr.objective(phi), abs=1e-9)


def test_sdr_zero_beamformer(rng):
    ch, ws, us, qs = sdr_setup(rng)
    sdr = build_sdr_data(ch, np.zeros_like(ws), us, qs)
    np.testing.assert_allclose(sdr.psi, 0, atol=1e-14)
    vals = sdr.values(random_unit(rng, 5))
    np.testing.assert_allclose(vals, sdr.const)


def test_sdr_single_user_matches_phase_form(rng):
    ch, ws, us, qs = sdr_setup(rng, k=1)
    sdr = build_sdr_data(ch, ws, us, qs)
    form = build_phase_form(ch, ws, us[0], qs[0], 0)
    np.testing.assert_allclose(sdr.psi[0, :5, :5], form.gamma, atol=1e-14)
    np.testing.assert_allclose(sdr.psi[0, :5, 5], form.z, atol=1e-14)
    for _ in range(5):
        phi = random_unit(rng, 5)
        # value = ln|Q| + d - Tr(Q E); the phase form is the phi-dependent part
        _, logdet = np.linalg.slogdet(qs[0])
        extra = np.real(np.trace(qs[0] @ (us[0].conj().T @ us[0] + np.eye(2))))
        assert sdr.values(phi)[0] == pytest.approx(logdet + 2 - form.objective(phi) - extra, rel=1e-9)


def test_randomization_rank_one_recovers(rng):
    ch, ws, us, qs = sdr_setup(rng)
    sdr = build_sdr_data(ch, ws, us, qs)
    phi = random_unit(rng, 5)
    aug = np.append(phi, 1.0) * np.exp(0.4j)
    got, val, rank_one = gaussian_randomization(np.outer(aug, aug.conj()), sdr, 10, rng)
    assert rank_one
    np.testing.assert_allclose(got, phi, atol=1e-10)
    assert val == pytest.approx(sdr.objective(phi))


def test_randomization_bounded_by_relaxation(rng):
    ch, ws, us, qs = sdr_setup(rng, k=3, m=6)
    sdr = build_sdr_data(ch, ws, us, qs)
    sol = solve_sdp(SdpProblem(sdr.psi, sdr.const))
    phi, val, _ = gaussian_randomization(sol.theta, sdr, 100, rng)
    np.testing.assert_allclose(np.abs(phi), 1.0, atol=1e-12)
    assert val == pytest.approx(sdr.objective(phi))
    assert val <= sol.info["dual_objective"] + 1e-8


def test_randomization_rejects_zero():
    sdr = build_sdr_data(random_channels(np.random.default_rng(0), m=2), np.zeros((1, 4, 2)),
                         np.zeros((1, 2, 2)), np.eye(2)[None])
    with pytest.raises(ValueError):
        gaussian_randomization(np.zeros((3, 3)), sdr, 5, np.random.default_rng(0))


# -- alternation -------------------------------------------------------------------

def test_matched_filter_init_power(rng):
    hbar = crandn(rng, 3, 2, 6)
    w = matched_filter_init_multi(hbar, 2, 2, 1.5).reshape(3, 2, 3, 2)
    np.testing.assert_allclose(np.sum(np.abs(w) ** 2, axis=(2, 3)), 0.5)


@pytest.mark.parametrize("seed", range(3))
def test_multi_user_invariants(seed):
    cfg = SystemConfig.multi_user(num_irs_elements=8, randomization_count=50)
    _, ch = draw_realization(cfg, seed)
    res = optimize_multi_user(cfg, ch)
    objs = [t["objective"] for t in res.trajectory]
    assert np.all(np.diff(objs) >= -1e-8 * max(abs(o) for o in objs))
    assert np.all(per_bs_power(res.w) <= cfg.max_power * (1 + 1e-8))
    np.testing.assert_allclose(np.abs(res.phase.phi), 1.0, atol=1e-12)
    for t in res.trajectory[1:]:
        assert t["randomized"] <= t["sdp_bound"] + 1e-8
    hbar = effective_channels(ch, res.phase.phi)
    ws = np.transpose(res.w, (1, 0, 2, 3)).reshape(3, -1, 2)
    assert res.rate == pytest.approx(min_user_rate(hbar, ws, cfg.noise_power), rel=1e-9)


def test_single_user_special_case():
    cfg = SystemConfig.single_user(num_irs_elements=10)
    rel = []
    for s in range(4):
        _, ch = draw_realization(cfg, 40 + s)
        p0 = PhaseProfile.random(10, np.random.default_rng(s))
        su = optimize_single_user(cfg, ch, phase0=p0)
        mu = optimize_multi_user(cfg, ch, phase0=p0)
        rel.append(abs(mu.rate - su.rate) / su.rate)
    assert np.mean(rel) <= 0.02


def test_multi_user_phase_length_checked():
    cfg = SystemConfig.multi_user(num_irs_elements=4)
    _, ch = draw_realization(cfg, 0)
    with pytest.raises(ValueError):
        optimize_multi_user(cfg, ch, phase0=PhaseProfile(np.zeros(3)))


def test_psd_sqrt_of_weight(rng):
    _, _, _, qs = random_state(rng)
    for q in qs:
        r = psd_sqrt(q)
        np.testing.assert_allclose(r @ r, q, atol=1e-10)
