import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from replab import ess, games
from replab.errors import PreconditionError, ValidationError


def test_equalize_on_support_hand_cases(attrition_testbed_matrix):
    small = np.array([[0.5, 0.0], [1.0, -0.5]])
    p, c, residual = ess.equalize_on_support(small, [0, 1])
    assert np.allclose(p, [0.5, 0.5]) and c == pytest.approx(0.25)
    assert residual <= 1e-12

    p, c, _ = ess.equalize_on_support(small, [1])
    assert np.allclose(p, [0.0, 1.0]) and c == pytest.approx(-0.5)

    p, c, _ = ess.equalize_on_support(attrition_testbed_matrix, [0, 1, 2])
    assert np.allclose(p, [0.6, 0.2, 0.2], atol=1e-12)
    assert c == pytest.approx(0.3)
    assert np.allclose(attrition_testbed_matrix @ p, 0.3, atol=1e-12)


def test_equalize_degenerate_and_negative():
    # identical rows make the equal-payoff system singular
    A = np.array([[1.0, 1.0], [1.0, 1.0]])
    assert ess.equalize_on_support(A, [0, 1]) is None
    # PD full support forces a negative weight
    PD = np.array([[3.0, 0.0], [5.0, 1.0]])
    assert ess.equalize_on_support(PD, [0, 1]) is None
    with pytest.raises(ValidationError):
        ess.equalize_on_support(PD, [])


def test_solve_all_identity_game():
    reports = ess.solve_all_equilibria(np.eye(2))
    statuses = [(r.support, r.status) for r in reports]
    assert statuses == [
        ((0,), games.STRICT_NASH),
        ((1,), games.STRICT_NASH),
        ((0, 1), games.ESS_REFUTED),
    ]
    mixed = reports[-1]
    assert np.allclose(mixed.strategy, [0.5, 0.5])
    assert mixed.common_payoff == pytest.approx(0.5)


def test_solve_all_respects_report_invariants(attrition_testbed_matrix):
    for r in ess.solve_all_equilibria(attrition_testbed_matrix):
        off = [j for j in range(3) if j not in r.support]
        payoffs = attrition_testbed_matrix @ r.strategy
        assert np.all(np.abs(payoffs[list(r.support)] - r.common_payoff) <= 1e-9)
        if off:
            assert np.all(payoffs[off] <= r.common_payoff + 1e-9)
        assert np.all(r.strategy[off] == 0.0)


def test_strict_vertices_always_reported():
    rng = np.random.default_rng(2)
    for _ in range(20):
        n = int(rng.integers(2, 6))
        A = rng.standard_normal((n, n))
        reports = {r.support: r for r in ess.solve_all_equilibria(A)}
        for k in range(n):
            if all(A[k, k] > A[j, k] + 1e-12 for j in range(n) if j != k):
                assert (k,) in reports
                assert reports[(k,)].status == games.STRICT_NASH


@given(st.floats(min_value=-5.0, max_value=5.0))
def test_solve_all_invariant_under_constant_shift(shift):
    A = np.array([[0.5, 0.0, 0.0], [1.0, -0.5, -1.0], [1.0, 0.0, -1.5]])
    base = ess.solve_all_equilibria(A)
    moved = ess.solve_all_equilibria(A + shift)
    assert len(base) == len(moved)
    for rb, rm in zip(base, moved):
        assert rb.support == rm.support
        assert np.max(np.abs(rb.strategy - rm.strategy)) <= 1e-9


def test_solve_all_refuses_large_games():
    with pytest.raises(ValidationError):
        ess.solve_all_equilibria(np.zeros((21, 21)))


def test_unique_ess_requires_cnd():
    with pytest.raises(PreconditionError):
        ess.unique_ess(np.eye(2))


def test_unique_ess_values(attrition_testbed_matrix):
    small = np.array([[0.5, 0.0], [1.0, -0.5]])
    assert np.allclose(ess.unique_ess(small).strategy, [0.5, 0.5])
    assert np.allclose(ess.unique_ess(-np.eye(2)).strategy, [0.5, 0.5])
    report = ess.unique_ess(attrition_testbed_matrix)
    assert np.allclose(report.strategy, [0.6, 0.2, 0.2], atol=1e-12)
    assert report.is_ess


def test_unique_ess_vertex_case():
    from replab import attrition

    B = attrition.perturbed_matrix(attrition.ConstantAttritionSpec(n=2, v=4.0))
    report = ess.unique_ess(B)
    assert np.allclose(report.strategy, [0.0, 0.0, 1.0])
    assert report.is_ess


def test_cnd_games_have_exactly_one_stable_strategy():
    rng = np.random.default_rng(9)
    tested = 0
    while tested < 15:
        n = int(rng.integers(2, 6))
        A = rng.standard_normal((n, n)) * 2.0
        if not games.is_conditionally_negative_definite(A):
            continue
        tested += 1
        reports = ess.solve_all_equilibria(A)
        stable = [r for r in reports if r.is_ess]
        assert len(stable) == 1
        # two distinct stable strategies would put a nonnegative value of the
        # form on a zero-sum difference, impossible here
        assert games.second_eigenvalue(A) < 0.0
