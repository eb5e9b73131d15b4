import numpy as np
import pytest

from irs_comp.conic import (
    AdapterError,
    BarrierOptions,
    Cone,
    CvxpySolver,
    SdpProblem,
    SocpProblem,
    external_solver_adapter,
    problem_from_json,
    problem_to_json,
    solve_sdp,
    solve_socp,
)
from irs_comp.conic.problems import ROTATED, SOC

from conftest import crandn

cvxpy = pytest.importorskip("cvxpy")


def trivial_socp():
    return SocpProblem(1, 0, (Cone(SOC, np.eye(1), np.zeros(1), np.zeros(1), 3.0),))


def disc_socp():
    a = np.array([[1.0, 0, 0], [0, 1.0, 0]])
    return SocpProblem(3, 2, (
        Cone(ROTATED, a, np.array([-1.0, -1.0]), np.array([0, 0, -1.0]), 4.0),
        Cone(SOC, a, np.zeros(2), np.zeros(3), 1.0),
    ))


def random_socp(rng, n=5, cones=4):
    """Feasible at x = 0 with R bounded by a rotated cone and a norm ball."""
    nv = n + 1
    out = []
    for _ in range(cones):
        a = np.hstack([rng.standard_normal((3, n)), np.zeros((3, 1))])
        b = rng.standard_normal(3)
        out.append(Cone(SOC, a, b, np.append(rng.standard_normal(n) * 0.1, 0.0), float(np.linalg.norm(b) + 1.0)))
    c = np.hstack([rng.standard_normal((4, n)), np.zeros((4, 1))])
    f = np.zeros(nv)
    f[-1] = -1.0
    out.append(Cone(ROTATED, c, rng.standard_normal(4), f, 5.0))
    out.append(Cone(SOC, np.hstack([np.eye(n), np.zeros((n, 1))]), np.zeros(n), np.zeros(nv), 3.0))
    x0 = np.zeros(nv)
    x0[-1] = min(cn.slack(x0) for cn in out[-2:-1]) - 1.0
    return SocpProblem(nv, n, tuple(out), x0)


def random_sdp(rng, n=6, k=3):
    psi = []
    for _ in range(k):
        a = crandn(rng, n, n)
        psi.append(0.5 * (a + a.conj().T))
    return SdpProblem(np.array(psi), rng.standard_normal(k))


# -- SOCP ------------------------------------------------------------------------

def test_socp_trivial():
    sol = solve_socp(trivial_socp())
    assert sol.ok
    assert sol.objective == pytest.approx(3.0, abs=1e-7)


def test_socp_disc_example():
    sol = solve_socp(disc_socp())
    assert sol.objective == pytest.approx(4 - (np.sqrt(2) - 1) ** 2, abs=1e-7)
    np.testing.assert_allclose(sol.x[:2], [2**-0.5, 2**-0.5], atol=1e-4)
    # grid oracle over the unit disc
    t = np.linspace(-1, 1, 801)
    xx, yy = np.meshgrid(t, t)
    inside = xx**2 + yy**2 <= 1
    grid_best = np.max(4 - ((xx - 1) ** 2 + (yy - 1) ** 2)[inside])
    assert sol.objective >= grid_best - 1e-9
    assert sol.objective - grid_best < 1e-2


@pytest.mark.parametrize("seed", range(5))
def test_socp_feasible_and_central(seed):
    p = random_socp(np.random.default_rng(seed))
    sol = solve_socp(p)
    assert sol.ok
    assert sol.primal_residual <= 1e-6
    assert sol.gap < 1e-7


def test_socp_phase_one_from_infeasible_start():
    p = disc_socp()
    p = SocpProblem(p.num_vars, p.objective_index, p.cones, np.array([5.0, 5.0, 10.0]))
    assert not p.is_strictly_feasible(p.x0)
    assert solve_socp(p).objective == pytest.approx(4 - (np.sqrt(2) - 1) ** 2, abs=1e-7)


def test_socp_reports_infeasible():
    a = np.array([[1.0, 0.0]])
    p = SocpProblem(2, 1, (
        Cone(SOC, a, np.array([-5.0]), np.zeros(2), 1.0),  # |x - 5| <= 1
        Cone(SOC, a, np.zeros(1), np.zeros(2), 1.0),  # |x| <= 1
    ))
    assert solve_socp(p).status == "infeasible"


# -- SDP ---------------------------------------------------------------------------

def test_sdp_two_by_two():
    psi = np.array([[0, 1], [1, 0]], dtype=complex)
    sol = solve_sdp(SdpProblem(psi, [0.0]))
    assert sol.objective == pytest.approx(2.0, abs=1e-6)
    assert sol.theta[0, 1].real == pytest.approx(-1.0, abs=1e-6)


def test_sdp_zero_psi():
    sol = solve_sdp(SdpProblem(np.zeros((3, 4, 4)), [0.5, -1.0, 2.0]))
    assert sol.objective == pytest.approx(-1.0, abs=1e-7)


@pytest.mark.parametrize("seed", range(3))
def test_sdp_against_external(seed):
    p = random_sdp(np.random.default_rng(seed))
    ours = solve_sdp(p)
    ref = external_solver_adapter(p)
    assert ours.ok
    assert ours.objective == pytest.approx(ref.objective, rel=1e-4, abs=1e-6)
    assert np.linalg.eigvalsh(ours.theta)[0] >= -1e-8
    np.testing.assert_allclose(np.diag(ours.theta).real, 1.0, atol=1e-12)
    assert ours.info["dual_objective"] >= ours.objective - 1e-12


def test_sdp_relaxation_bound(rng):
    p = random_sdp(rng, n=8, k=2)
    sol = solve_sdp(p)
    bound = sol.info["dual_objective"]
    for _ in range(200):
        v = np.append(np.exp(2j * np.pi * rng.random(7)), 1.0)
        assert p.objective_at(np.outer(v, v.conj())) <= bound + 1e-6


def test_sdp_rejects_non_hermitian():
    with pytest.raises(ValueError):
        SdpProblem(np.array([[0, 1], [0, 0]], dtype=complex), [0.0])


def test_barrier_options_are_used():
    p = random_sdp(np.random.default_rng(9), n=5)
    loose = solve_sdp(p, BarrierOptions(gap_tol=1e-3))
    tight = solve_sdp(p)
    assert loose.iterations <= tight.iterations


# -- adapter -----------------------------------------------------------------------

def test_json_roundtrip_socp():
    p = random_socp(np.random.default_rng(1))
    back = problem_from_json(problem_to_json(p))
    assert back.num_vars == p.num_vars and back.objective_index == p.objective_index
    for a, b in zip(p.cones, back.cones):
        assert a.kind == b.kind
        np.testing.assert_array_equal(a.A, b.A)
        np.testing.assert_array_equal(a.b, b.b)
        np.testing.assert_array_equal(a.f, b.f)
        assert a.g == b.g
    np.testing.assert_array_equal(back.x0, p.x0)


def test_json_roundtrip_sdp():
    p = random_sdp(np.random.default_rng(2))
    back = problem_from_json(problem_to_json(p))
    np.testing.assert_array_equal(back.psi, p.psi)
    np.testing.assert_array_equal(back.const, p.const)


def test_adapter_trivial():
    assert external_solver_adapter(trivial_socp()).objective == pytest.approx(3.0, abs=1e-6)


def test_adapter_agrees_on_random_socps():
    rng = np.random.default_rng(77)
    for _ in range(20):
        p = random_socp(rng)
        ours = solve_socp(p).objective
        ref = external_solver_adapter(p, CvxpySolver()).objective
        assert ours == pytest.approx(ref, rel=1e-4, abs=1e-6)


def test_adapter_errors():
    with pytest.raises(AdapterError):
        external_solver_adapter(trivial_socp(), "NO_SUCH_SOLVER")
    with pytest.raises(AdapterError):
        external_solver_adapter(trivial_socp(), object())
    with pytest.raises(ValueError):
        problem_from_json('{"kind": "lp"}')
