from itertools import combinations

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

import tl1cs.analysis as an
from tl1cs.analysis import (
    NoSparseSolution,
    brute_force_l0,
    check_condition2,
    critical_a,
    critical_a_bisect,
    estimate_rip,
    recovery_margin,
    rip_condition_holds,
    scale_constant,
    scale_problem,
    support_min_singular_value,
)
from tl1cs.penalty import penalty_sum
from tl1cs.sensing import EnsembleSpec, Problem, SignalSpec, make_problem, make_rng
from tl1cs.solver import SolveOptions, solve_constrained, solve_unconstrained


def gaussian(seed, M, N, k):
    return make_problem(EnsembleSpec("gaussian", M, N, seed=seed), SignalSpec(N, k, seed=seed + 777))


# --- RIP ----------------------------------------------------------------------

def test_rip_orthonormal_columns():
    Q = np.linalg.qr(np.random.default_rng(0).standard_normal((12, 6)))[0]
    for s in range(1, 7):
        assert estimate_rip(Q, s).delta_lower == pytest.approx(0.0, abs=1e-12)


def test_rip_duplicate_columns():
    A = np.array([[1.0, 1.0], [0.0, 0.0]])
    est = estimate_rip(A, 2)
    assert est.delta_lower == pytest.approx(1.0) and est.exhaustive


def test_rip_matches_brute_force():
    A = np.random.default_rng(1).standard_normal((5, 8)) / np.sqrt(5)
    for s in (1, 2, 3):
        best = 0.0
        for T in combinations(range(8), s):
            ev = np.linalg.eigvalsh(A[:, T].T @ A[:, T])
            best = max(best, ev[-1] - 1, 1 - ev[0])
        assert estimate_rip(A, s).delta_lower == pytest.approx(best, rel=1e-12)


def test_rip_sampled_agrees_when_covering(monkeypatch):
    A = np.random.default_rng(2).standard_normal((4, 6)) / 2
    exact = estimate_rip(A, 2)
    monkeypatch.setattr(an, "EXHAUSTIVE_LIMIT", 0)
    sampled = estimate_rip(A, 2, samples=3000, seed=3)
    assert not sampled.exhaustive
    assert sampled.delta_lower == pytest.approx(exact.delta_lower, rel=1e-12)


def test_rip_sampled_is_lower_bound(monkeypatch):
    A = np.random.default_rng(4).standard_normal((6, 10)) / np.sqrt(6)
    exact = estimate_rip(A, 3).delta_lower
    monkeypatch.setattr(an, "EXHAUSTIVE_LIMIT", 0)
    assert estimate_rip(A, 3, samples=20, seed=1).delta_lower <= exact + 1e-12


def test_rip_monotone_in_s():
    A = np.random.default_rng(5).standard_normal((6, 10)) / np.sqrt(6)
    vals = [estimate_rip(A, s).delta_lower for s in range(1, 6)]
    assert np.all(np.diff(vals) >= -1e-12)


def test_rip_errors_and_text():
    with pytest.raises(ValueError):
        estimate_rip(np.eye(3), 4)
    est = estimate_rip(np.eye(3), 2)
    assert est.csv_row().startswith("2,") and "exhaustive: true" in est.to_text()


# --- critical a ---------------------------------------------------------------

def test_critical_a_closed_form_example():
    assert critical_a(0.0, 0.0, 4, 1) == pytest.approx(1.0)
    assert recovery_margin(1.0, 0.0, 0.0, 4, 1) == pytest.approx(0.0, abs=1e-15)
    assert critical_a_bisect(0.0, 0.0, 4, 1) == pytest.approx(1.0, abs=1e-8)


def test_critical_a_none_when_condition_fails():
    assert critical_a(0.9, 0.5, 4, 3) is None
    assert critical_a_bisect(0.9, 0.5, 4, 3) is None
    assert not rip_condition_holds(0.9, 0.5, 4, 3)


def test_critical_a_errors():
    with pytest.raises(ValueError):
        critical_a(0.1, 1.0, 4, 1)
    with pytest.raises(ValueError):
        critical_a(0.1, 0.1, 2, 2)
    with pytest.raises(ValueError):
        critical_a(1.5, 0.1, 4, 1)


@given(st.floats(0, 0.9), st.floats(0, 0.9), st.integers(1, 5), st.integers(1, 40))
def test_critical_a_agrees_with_bisection(dR, dRT, T, extra):
    R = T + extra
    t = np.sqrt((1 + dR) * T / (R * (1 - dRT)))
    assume(abs(t - 1) > 1e-9)                 # the condition holds with equality
    a_closed = critical_a(dR, dRT, R, T)
    a_bis = critical_a_bisect(dR, dRT, R, T)
    assert (a_closed is None) == (a_bis is None) == (not rip_condition_holds(dR, dRT, R, T))
    if a_closed is not None and a_closed < 1e6:
        assert a_bis == pytest.approx(a_closed, abs=1e-8, rel=1e-10)
        grid = a_closed * np.array([1.001, 1.1, 2, 10, 100]) + 1e-9
        assert np.all(recovery_margin(grid, dR, dRT, R, T) > 0)


# --- scaling ------------------------------------------------------------------

def test_scale_constant_example():
    assert scale_constant(1.0, 3, 1.0) == 5.0


def test_scaled_penalty_at_most_one():
    rng = np.random.default_rng(6)
    for _ in range(1000):
        T = int(rng.integers(1, 10))
        a = float(rng.choice([0.1, 0.5, 1, 3, 10]))
        x = rng.standard_normal(T) * rng.uniform(0.01, 100)
        C = scale_constant(np.abs(x).max(), T, a)
        assert penalty_sum(x / C, a) <= 1 + 1e-12


def test_scale_problem_keeps_l0_support():
    for seed in range(5):
        prob = gaussian(seed, 8, 16, 2)
        scaled, C = scale_problem(prob, 2, a=1.0)
        assert C == pytest.approx(scale_constant(np.abs(prob.x_true).max(), 2, 1.0))
        np.testing.assert_allclose(scaled.y * C, prob.y)
        x0 = brute_force_l0(prob)
        x1 = brute_force_l0(scaled)
        np.testing.assert_array_equal(np.flatnonzero(x0), np.flatnonzero(x1))
        np.testing.assert_allclose(x1 * C, x0, atol=1e-9)


def test_scale_problem_without_truth():
    prob = gaussian(1, 8, 16, 2)
    bare = Problem(prob.A, prob.y)
    _, C = scale_problem(bare, 2)
    assert C > 0


# --- condition 2 ----------------------------------------------------------------

def test_condition2_zero_case():
    rep = check_condition2(np.zeros(5), Problem(np.eye(5)[:3], np.zeros(3)))
    assert rep.verdict == "local-min"
    assert rep.dual_bound == 0.0 and rep.eigen_margin is None


def test_condition2_on_solver_output():
    for seed in range(5):
        prob = gaussian(seed, 64, 256, 5)
        res = solve_unconstrained(prob)
        rep = check_condition2(res.x, prob)
        assert rep.q_nonsingular and rep.dual_ok and rep.stationarity_gap <= 1e-4
        assert rep.eigen_margin is not None
        assert rep.verdict.endswith("local-min")
        assert support_min_singular_value(prob.A, res.x) == pytest.approx(rep.sigma_min)


def test_condition2_duplicate_columns_fail_rank():
    rng = np.random.default_rng(7)
    A = rng.standard_normal((6, 10))
    A[:, 1] = A[:, 0]
    beta = np.zeros(10)
    beta[[0, 1]] = [1.0, 2.0]
    prob = Problem(A, A @ beta)
    rep = check_condition2(beta, prob)
    assert not rep.q_nonsingular and rep.sigma_min < 1e-10
    assert "i" in rep.verdict.split("(")[1].split(",")


def test_condition2_stable_under_tiny_perturbation():
    prob = gaussian(3, 64, 256, 5)
    x = solve_unconstrained(prob).x
    base = check_condition2(x, prob).verdict
    rng = np.random.default_rng(8)
    T = np.flatnonzero(x)
    for _ in range(10):
        y = x.copy()
        y[T] += 1e-8 * rng.standard_normal(T.size)
        assert check_condition2(y, prob).verdict == base


def test_condition2_report_output():
    prob = gaussian(3, 64, 256, 5)
    rep = check_condition2(solve_unconstrained(prob).x, prob)
    assert len(rep.csv_row().split(",")) == len(rep.CSV_HEADER.split(","))
    assert "verdict:" in rep.to_text()


# --- l0 oracle --------------------------------------------------------------------

def test_l0_planted_singleton():
    prob = gaussian(2, 8, 16, 1)
    np.testing.assert_allclose(brute_force_l0(prob), prob.x_true, atol=1e-10)


def test_l0_zero_observation():
    assert not brute_force_l0(Problem(np.eye(4)[:3], np.zeros(3))).any()


def test_l0_no_solution():
    # a generic y in R^4 needs 4 columns of a 4 x 6 matrix
    prob = Problem(np.random.default_rng(9).standard_normal((4, 6)), np.ones(4))
    with pytest.raises(NoSparseSolution):
        brute_force_l0(prob, k_max=3)


def test_l0_budget():
    with pytest.raises(ValueError):
        brute_force_l0(Problem(np.zeros((3, 21)), np.ones(3)))
    with pytest.raises(ValueError):
        brute_force_l0(Problem(np.zeros((3, 8)), np.ones(3)), k_max=5)


def test_exact_recovery_above_critical_a():
    # rows spanning the complement of a flat vector v (|v_i| = 1/4) give A^T A = I - v v^T,
    # so delta_s = s/16 and the RIP condition holds for |T| = 1, R = 2;
    # above a* the constrained solution should be the l0 one
    matches, trials = 0, 20
    for seed in range(trials):
        rng = make_rng(seed)
        v = rng.choice([-0.25, 0.25], size=16)
        basis = np.linalg.svd(np.eye(16) - np.outer(v, v))[0][:, :15].T
        A = np.linalg.qr(rng.standard_normal((15, 15)))[0] @ basis
        np.testing.assert_allclose(A.T @ A, np.eye(16) - np.outer(v, v), atol=1e-12)
        d2 = estimate_rip(A, 2).delta_lower
        d3 = estimate_rip(A, 3).delta_lower
        a_star = critical_a(d2, d3, 2, 1)
        assert a_star is not None
        x = np.zeros(16)
        x[int(rng.integers(16))] = rng.standard_normal()
        prob, C = scale_problem(Problem(A, A @ x, x), 1, a=2 * a_star)
        opts = SolveOptions(model="constrained", a=2 * a_star)
        got = solve_constrained(prob, opts).x
        matches += np.allclose(got, brute_force_l0(prob), atol=1e-6)
    assert matches >= 0.9 * trials
