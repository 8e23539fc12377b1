import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize

from bcel.constraints import NormalMoments
from bcel.data import IID
from bcel.el import (CONVERGED, HULL_VIOLATION, OUT_OF_SUPPORT, SolverConfig, _dual, _pseudo_log,
                     el_log_likelihood, el_solve, el_solve_batch, hull_contains_origin)


def grid_oracle(h, step=1e-4):
    """Max of sum(log p) on the segment {p : sum p = 1, sum p h = 0}, n = 3."""
    best = -np.inf
    for p1 in np.arange(step, 1.0, step):
        # p2 + p3 = 1 - p1 and h2 p2 + h3 p3 = -h1 p1
        a = np.array([[1.0, 1.0], [h[1], h[2]]])
        if abs(np.linalg.det(a)) < 1e-14:
            continue
        p2, p3 = np.linalg.solve(a, [1 - p1, -h[0] * p1])
        if p2 > 0 and p3 > 0:
            best = max(best, math.log(p1) + math.log(p2) + math.log(p3))
    return best


def test_centred_column_gives_uniform_weights():
    y = np.array([0.3, -1.2, 2.5, 0.1])
    s = el_solve((y - y.mean())[:, None])
    assert s.status == CONVERGED
    np.testing.assert_allclose(s.p, 0.25, atol=1e-12)
    assert s.log_el == pytest.approx(-4 * math.log(4), abs=1e-12)
    np.testing.assert_allclose(s.lam, 0.0, atol=1e-12)


def test_two_point_example():
    s = el_solve([[-0.25], [0.75]])
    np.testing.assert_allclose(s.p, [0.75, 0.25], atol=1e-12)
    assert s.log_el == pytest.approx(math.log(0.1875), abs=1e-12)


def test_one_signed_column_is_hull_violation():
    s = el_solve([[0.5], [1.5], [2.5]])
    assert s.status == HULL_VIOLATION
    assert s.log_el == -math.inf
    assert np.all(s.p == 0)


def test_grid_oracle_example():
    h = np.array([0.0, 1.0, 2.0]) - 0.5
    assert el_solve(h[:, None]).log_el == pytest.approx(grid_oracle(h), abs=1e-4)


def test_against_constrained_optimizer_two_constraints():
    rng = np.random.default_rng(3)
    H = rng.normal(size=(12, 2)) + [0.2, -0.1]
    s = el_solve(H)
    assert s.status == CONVERGED
    cons = [{"type": "eq", "fun": lambda p: p.sum() - 1},
            {"type": "eq", "fun": lambda p: p @ H}]
    res = minimize(lambda p: -np.sum(np.log(p)), np.full(12, 1 / 12), constraints=cons,
                   bounds=[(1e-9, 1)] * 12, method="SLSQP", options={"ftol": 1e-14, "maxiter": 500})
    assert s.log_el == pytest.approx(-res.fun, abs=1e-6)


def test_input_validation():
    with pytest.raises(ValueError):
        el_solve([[1.0], [np.nan]])
    with pytest.raises(ValueError):
        el_solve(np.zeros((0, 1)))


def test_degenerate_direction_converges_not_hull():
    # the origin lies on the boundary side only in the limit: (0, 1, 2) is one-signed
    s = el_solve([[0.0], [1.0], [2.0]])
    assert s.status == HULL_VIOLATION


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(5, 40), st.integers(1, 3))
def test_converged_solution_invariants(seed, n, q):
    rng = np.random.default_rng(seed)
    H = rng.normal(size=(n, q)) + rng.normal(scale=0.3, size=q)
    s = el_solve(H)
    assert s.status in (CONVERGED, HULL_VIOLATION)
    assert (s.status == CONVERGED) == hull_contains_origin(H)
    if s.status == CONVERGED:
        assert np.all((s.p > 0) & (s.p < 1))
        assert abs(s.p.sum() - 1) <= 1e-10
        assert np.max(np.abs(s.p @ H)) <= 1e-8 * (1 + np.max(np.abs(H)))
        assert s.log_el == pytest.approx(np.sum(np.log(s.p)), abs=1e-9)
        assert s.log_el <= -n * math.log(n) + 1e-12
        z = 1 + H @ s.lam
        assert np.max(np.abs((H / z[:, None]).sum(axis=0))) <= n * 1e-8


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_row_permutation_exact(seed):
    rng = np.random.default_rng(seed)
    H = rng.normal(size=(15, 2)) + 0.1
    perm = rng.permutation(15)
    a, b = el_solve(H), el_solve(H[perm])
    if a.status == CONVERGED:
        assert a.log_el == b.log_el
        np.testing.assert_array_equal(b.p, a.p[perm])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.01, 100) | st.floats(-100, -0.01))
def test_column_scaling_invariance(seed, c):
    rng = np.random.default_rng(seed)
    H = rng.normal(size=(20, 2)) + 0.1
    G = H.copy()
    G[:, 0] *= c
    a, b = el_solve(H), el_solve(G)
    if a.status == CONVERGED:
        assert b.log_el == pytest.approx(a.log_el, abs=1e-9)
        np.testing.assert_allclose(b.p, a.p, atol=1e-9)
        assert b.lam[0] == pytest.approx(a.lam[0] / c, rel=1e-6, abs=1e-9)


def test_newton_decreases_dual_every_step():
    rng = np.random.default_rng(11)
    H = rng.normal(size=(40, 3)) + [0.3, 0.0, -0.2]
    s = el_solve(H, record_history=True)
    assert s.status == CONVERGED
    f = s.history
    assert all(b <= a + 1e-12 for a, b in zip(f, f[1:]))
    # the recorded objective really is the pseudo-log dual
    assert f[-1] == pytest.approx(_dual(H, s.lam, 1 / 40), rel=1e-12)


def test_pseudo_log_matches_log_above_threshold():
    z = np.array([0.5, 1.0, 3.0])
    val, d1, neg_d2 = _pseudo_log(z, 0.1)
    np.testing.assert_allclose(val, np.log(z))
    np.testing.assert_allclose(d1, 1 / z)
    np.testing.assert_allclose(neg_d2, 1 / z**2)
    # C2 continuity at the threshold
    lo = _pseudo_log(np.array([0.1 - 1e-9]), 0.1)
    hi = _pseudo_log(np.array([0.1 + 1e-9]), 0.1)
    for a, b in zip(lo, hi):
        assert a[0] == pytest.approx(b[0], rel=1e-6)


def test_mean_constraint_unimodal_with_max_at_mean():
    y = np.random.default_rng(5).normal(size=60)
    grid = np.linspace(y.min(), y.max(), 102)[1:-1]
    vals = np.array([el_solve((y - t)[:, None]).log_el for t in grid])
    top = int(np.argmax(vals))
    assert np.all(np.diff(vals[:top + 1]) >= -1e-9)
    assert np.all(np.diff(vals[top:]) <= 1e-9)
    assert abs(grid[top] - y.mean()) <= grid[1] - grid[0]


def test_batch_matches_single():
    rng = np.random.default_rng(2)
    stack = rng.normal(size=(200, 30, 3)) + rng.normal(scale=0.4, size=(200, 1, 3))
    batch = el_solve_batch(stack)
    for H, b in zip(stack, batch):
        s = el_solve(H)
        assert s.status == b.status
        if s.status == CONVERGED:
            assert b.log_el == pytest.approx(s.log_el, abs=1e-9)


def test_el_log_likelihood_examples():
    y = IID(np.random.default_rng(0).normal(size=50))
    prov = NormalMoments(1)
    assert el_log_likelihood(y, y.values.mean(), prov) == pytest.approx(-50 * math.log(50))
    assert el_log_likelihood(y, y.values.min() - 1, prov) == -math.inf
    val, status = el_log_likelihood(y, 0.2, prov, return_status=True)
    assert status == CONVERGED and val + 50 * math.log(50) <= 0


def test_el_log_likelihood_out_of_support():
    from bcel.constraints import ArchResiduals
    from bcel.data import Series
    y = Series(np.random.default_rng(0).normal(size=30))
    val, status = el_log_likelihood(y, (0.9, 0.5), ArchResiduals(), return_status=True)
    assert val == -math.inf and status == OUT_OF_SUPPORT


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(grad_tol=0)
    with pytest.raises(ValueError):
        SolverConfig(max_iter=0)
