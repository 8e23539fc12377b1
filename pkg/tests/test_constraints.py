import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import optimize, stats

from bcel.constraints import (ArchResiduals, GarchScore, GkParams, GkPercentiles, NormalMoments,
                              arch_residuals, garch_loglik_terms, garch_score,
                              gk_percentile_constraints, gk_quantile, normal_moments)
from bcel.data import IID, Series
from bcel.el import CONVERGED, HULL_VIOLATION, DomainError, el_solve
from bcel.mathfn import rng_stream
from bcel.simulate import sim_arch, sim_garch, sim_gk, sim_normal

GK_TRUE = GkParams(3.0, 1.0, 2.0, 0.5, 0.8)


# --- normal moments -------------------------------------------------------

def test_normal_first_column():
    np.testing.assert_array_equal(normal_moments([-1.0, 1.0], 0.0, 1), [[-1.0], [1.0]])


def test_normal_second_column_vanishes_at_unit_deviation():
    H = normal_moments([-1.0, 1.0], 0.0, 2)
    np.testing.assert_array_equal(H[:, 1], [0.0, 0.0])


def test_normal_third_order_solves_and_tail_violates():
    y = sim_normal(rng_stream(1), 200, 0.0)
    assert el_solve(normal_moments(y, 0.0, 3)).status == CONVERGED
    assert el_solve(normal_moments(y, 10.0, 3)).status == HULL_VIOLATION


def test_normal_order_checked():
    with pytest.raises(ValueError):
        normal_moments([1.0], 0.0, 4)
    with pytest.raises(ValueError):
        NormalMoments(0)


def test_normal_batch_matches_single():
    y = IID(np.random.default_rng(0).normal(size=20))
    prov = NormalMoments(3)
    H, ok = prov.batch(y, np.array([[0.1], [-0.4]]))
    assert ok.all()
    for h, th in zip(H, (0.1, -0.4)):
        np.testing.assert_array_equal(h, prov(y, th))


# --- g-and-k --------------------------------------------------------------

def test_gk_median_is_location():
    assert gk_quantile(0.5, GkParams(1.7, 2.0, -1.0, 0.3)) == 1.7


def test_gk_reduces_to_normal():
    r = np.linspace(0.01, 0.99, 99)
    np.testing.assert_allclose(gk_quantile(r, GkParams(2.0, 1.5, 0.0, 0.0)),
                               2.0 + 1.5 * stats.norm.ppf(r), rtol=1e-12)


def test_gk_monotone_at_experiment_truth():
    r = np.linspace(0.001, 0.999, 999)
    assert np.all(np.diff(gk_quantile(r, GK_TRUE)) > 0)


@settings(max_examples=100, deadline=None)
@given(st.floats(-5, 5), st.floats(0.05, 5), st.floats(-5, 5), st.floats(0, 3))
def test_gk_strictly_increasing(A, B, g, k):
    r = np.linspace(0.001, 0.999, 999)
    q = gk_quantile(r, GkParams(A, B, g, k))
    assert np.all(np.diff(q) > 0)


def test_gk_negative_kurtosis_can_break_monotonicity():
    # with c = 0.8 a valid quantile function is only guaranteed for k >= 0;
    # here the left tail folds back
    r = np.linspace(0.001, 0.999, 999)
    q = gk_quantile(r, GkParams(0.0, 1.0, 1.0, -0.25))
    assert np.any(np.diff(q) < 0)


def test_gk_domain():
    with pytest.raises(ValueError):
        gk_quantile(1.0, GK_TRUE)
    with pytest.raises(ValueError):
        gk_quantile([0.5, 0.0], GK_TRUE)
    with pytest.raises(DomainError):
        GkParams(0.0, -1.0, 0.0, 0.0)
    with pytest.raises(DomainError):
        GkParams(0.0, 1.0, 0.0, -0.5)


def test_gk_all_below_first_quantile_is_hull_violation():
    y = np.full(10, gk_quantile(0.25, GK_TRUE) - 1.0)
    H = gk_percentile_constraints(y, GK_TRUE)
    np.testing.assert_array_equal(H[:, 0], 0.75)
    assert el_solve(H).status == HULL_VIOLATION


def test_gk_equispaced_ranks_balance_at_truth():
    n = 400
    y = gk_quantile((np.arange(n) + 0.5) / n, GK_TRUE)
    H = gk_percentile_constraints(y, GK_TRUE)
    np.testing.assert_allclose(H.sum(axis=0), 0.0, atol=1e-9)
    s = el_solve(H)
    np.testing.assert_allclose(s.p, 1 / n, rtol=1e-9)


def test_gk_median_matching():
    y = np.random.default_rng(4).normal(size=41)
    p = GkParams(float(np.median(y)), 1.0, 0.5, 0.2)
    H = gk_percentile_constraints(y, p, probs=[0.5])
    assert abs(H.sum()) <= 0.5


def test_gk_probs_checked():
    with pytest.raises(ValueError):
        gk_percentile_constraints([1.0], GK_TRUE, probs=[0.5, 0.25])
    with pytest.raises(ValueError):
        GkPercentiles(probs=(0.5, 0.5))


def test_gk_batch_matches_single_and_flags_invalid():
    y = sim_gk(rng_stream(2), 50, GK_TRUE)
    prov = GkPercentiles()
    th = np.array([[3.0, 1.0, 2.0, 0.5], [2.5, 0.7, 1.0, 0.1], [3.0, -1.0, 2.0, 0.5]])
    H, ok = prov.batch(y, th)
    np.testing.assert_array_equal(ok, [True, True, False])
    for h, t in zip(H[:2], th[:2]):
        np.testing.assert_array_equal(h, prov(y, t))


def test_gk_el_near_maximum_at_truth():
    # loose sanity bound: log_el + n log n > -q log n
    n, q = 500, 3
    y = sim_gk(rng_stream(3), n, GK_TRUE)
    s = el_solve(gk_percentile_constraints(y, GK_TRUE))
    assert s.log_el + n * math.log(n) > -q * math.log(n)


# --- ARCH -----------------------------------------------------------------

def test_arch_unit_variance_gives_raw_series():
    y = np.random.default_rng(0).normal(size=30)
    H = arch_residuals(y, 1.0, 0.0, "moments")
    np.testing.assert_array_equal(H[:, 0], y[1:])
    H = arch_residuals(y, 1.0, 0.0, "correlations")
    np.testing.assert_array_equal(H[:, 1], y[2:] * y[1:-1])


def test_arch_row_counts():
    y = np.random.default_rng(0).normal(size=30)
    assert arch_residuals(y, 0.5, 0.3, "moments").shape == (29, 3)
    assert arch_residuals(y, 0.5, 0.3, "correlations").shape == (28, 3)
    assert arch_residuals(y, 0.5, 0.3, "squared").shape == (28, 3)


@pytest.mark.parametrize("variant", ["moments", "correlations", "squared"])
def test_arch_column_means_vanish_at_truth(variant):
    T = 10_000
    y = sim_arch(rng_stream(7), T, 0.5, 0.3)
    H = arch_residuals(y, 0.5, 0.3, variant)
    assert np.all(np.abs(H.mean(axis=0)) < 5 / math.sqrt(T))


def test_arch_constant_series_violates_hull():
    H = arch_residuals(np.full(50, 2.0), 0.5, 0.3, "correlations")
    assert np.ptp(H[:, 0]) == 0 and H[0, 0] != 0
    assert el_solve(H).status == HULL_VIOLATION


def test_arch_domain():
    y = np.ones(10)
    for a0, a1 in ((0.0, 0.3), (0.5, -0.1), (0.8, 0.3)):
        with pytest.raises(DomainError):
            arch_residuals(y, a0, a1)
    with pytest.raises(ValueError):
        arch_residuals(y, 0.5, 0.3, "bogus")


@pytest.mark.parametrize("variant", ["moments", "correlations", "squared"])
def test_arch_batch_matches_single(variant):
    y = sim_arch(rng_stream(1), 100, 0.5, 0.3)
    prov = ArchResiduals(variant)
    th = np.array([[0.5, 0.3], [0.2, 0.1], [0.9, 0.3]])
    H, ok = prov.batch(y, th)
    np.testing.assert_array_equal(ok, [True, True, False])
    for h, t in zip(H[:2], th[:2]):
        np.testing.assert_allclose(h, prov(y, t), rtol=1e-14)


# --- GARCH ----------------------------------------------------------------

def _fd_score(y, theta, step=1e-6):
    cols = []
    for j in range(3):
        up, dn = np.array(theta, float), np.array(theta, float)
        up[j] += step
        dn[j] -= step
        cols.append((garch_loglik_terms(y, *up) - garch_loglik_terms(y, *dn)) / (2 * step))
    return np.column_stack(cols)


def test_garch_score_matches_finite_differences():
    y = sim_garch(rng_stream(5), 300, 0.1, 0.1, 0.8)
    theta = (0.1, 0.1, 0.8)
    H = garch_score(y, *theta)
    fd = _fd_score(y, theta)
    assert np.max(np.abs(H - fd)) <= 1e-4 * np.max(np.abs(fd))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.05, 2.0), st.floats(0.0, 0.5), st.floats(0.0, 0.9))
def test_garch_score_fd_property(seed, a0, a1, frac):
    b1 = frac * (0.98 - a1)
    y = sim_garch(rng_stream(seed), 60, a0, a1, b1)
    theta = (a0, a1 + 1e-5, b1 + 1e-5)
    H = garch_score(y, *theta)
    fd = _fd_score(y, theta, step=1e-6)
    assert np.max(np.abs(H - fd)) <= 1e-4 * np.max(np.abs(fd))


def test_garch_column_means_vanish_at_mle():
    T = 2000
    y = sim_garch(rng_stream(8), T, 0.1, 0.1, 0.8)

    def nll(x):
        try:
            return -garch_loglik_terms(y, *x).sum()
        except DomainError:
            return np.inf

    res = optimize.minimize(nll, [0.1, 0.1, 0.8], method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20_000})
    mle = res.x
    assert mle[1] > 0 and mle[2] > 0   # interior optimum, so the score has zero mean
    H = garch_score(y, *mle)
    assert np.linalg.norm(H.mean(axis=0)) < 2 / math.sqrt(T)


def test_garch_reduces_to_arch_score_when_beta_zero():
    y = sim_arch(rng_stream(9), 200, 0.5, 0.3).values
    a0, a1 = 0.5, 0.3
    H = garch_score(y, a0, a1, 0.0)
    # Gaussian ARCH(1) score built from the ARCH residuals: (eps^2 - 1) / (2 s2) * (1, y_{t-1}^2)
    u = arch_residuals(y, a0, a1, "moments")[:, 1]
    s2 = a0 + a1 * y[:-1] ** 2
    want = (u / (2 * s2))[:, None] * np.column_stack([np.ones_like(s2), y[:-1] ** 2])
    np.testing.assert_allclose(H[1:, :2], want, rtol=1e-12)


def test_garch_domain():
    y = np.ones(10)
    for th in ((0.0, 0.1, 0.5), (0.1, 0.5, 0.5), (0.1, -0.1, 0.5)):
        with pytest.raises(DomainError):
            garch_score(y, *th)


def test_garch_batch_matches_single():
    y = sim_garch(rng_stream(1), 150, 0.1, 0.1, 0.8)
    th = np.array([[0.1, 0.1, 0.8], [0.3, 0.2, 0.5], [0.1, 0.6, 0.6]])
    H, ok = GarchScore().batch(y, th)
    np.testing.assert_array_equal(ok, [True, True, False])
    for h, t in zip(H[:2], th[:2]):
        np.testing.assert_allclose(h, garch_score(Series(y.values), *t), rtol=1e-13)
