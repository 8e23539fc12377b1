import math

import numpy as np
import pytest
from scipy import stats

from bcel.abc import (ABCConfig, ArchLSSummary, ArchLogAcfSummary, CoalescentSim,
                      GarchMLESummary, GkSim, MeanSummary, NormalSim, OctileSummary,
                      PopgenSummary, abc_rejection, garch_mle, reference_table)
from bcel.constraints import GkParams, garch_loglik_terms
from bcel.mathfn import rng_stream
from bcel.priors import PriorSpec, UniformBox
from bcel.samplers import SamplerError
from bcel.simulate import ScenarioSpec, sim_arch, sim_coalescent, sim_garch, sim_gk, sim_normal

FLAT = PriorSpec([UniformBox([-5.0], [5.0])], names=["theta"])


def _y(seed=0):
    return sim_normal(rng_stream(seed), 100, 0.3)


def test_infinite_tolerance_returns_the_prior():
    cfg = ABCConfig(epsilon=math.inf, quantile=None, M=10_000)
    s = abc_rejection(rng_stream(1), FLAT, NormalSim(100), MeanSummary(), cfg, _y())
    direct = FLAT.sample(rng_stream(2), 10_000)
    assert stats.ks_2samp(s.params[:, 0], direct[:, 0]).pvalue > 0.01
    assert np.all(s.log_weight == 0)


def test_small_quantile_matches_posterior_sd():
    cfg = ABCConfig(quantile=0.001, M=200)
    s = abc_rejection(rng_stream(3), FLAT, NormalSim(100), MeanSummary(), cfg, _y())
    assert cfg.n_sims == 200_000
    assert s.params[:, 0].std() == pytest.approx(0.1, rel=0.3)


def test_deterministic_given_seed():
    cfg = ABCConfig(quantile=0.05, M=100)
    a = abc_rejection(rng_stream(4), FLAT, NormalSim(50), MeanSummary(), cfg, _y())
    b = abc_rejection(rng_stream(4), FLAT, NormalSim(50), MeanSummary(), cfg, _y())
    np.testing.assert_array_equal(a.params, b.params)


class _MeanOfHundred:
    """Draws the sufficient statistic directly: the mean of 100 N(theta, 1)."""

    def __call__(self, rng, params):
        return params[:, :1] + 0.1 * rng.standard_normal((params.shape[0], 1))


def _mean(batch):
    return np.atleast_2d(batch.values.mean()) if hasattr(batch, "values") else batch


def test_ks_distance_to_posterior_decreases_with_quantile():
    # the tolerance bias at q = 0.01 is about 0.01 in KS distance, so the
    # sample must be large and the distance averaged over seeds
    y = _y()
    post = stats.norm(y.values.mean(), 0.1)
    ks = np.zeros(3)
    for seed in range(3):
        for i, q in enumerate((0.1, 0.01, 0.001)):
            cfg = ABCConfig(quantile=q, M=20_000, batch=200_000)
            s = abc_rejection(rng_stream(5, seed), FLAT, _MeanOfHundred(), _mean, cfg, y)
            ks[i] += stats.kstest(s.params[:, 0], post.cdf).statistic / 3
    assert ks[0] > ks[1] > ks[2], ks


def test_absolute_mode_accepts_within_tolerance_and_caps():
    y = _y()
    cfg = ABCConfig(epsilon=0.05, quantile=None, M=50, distance="euclidean", batch=5000)
    s = abc_rejection(rng_stream(6), FLAT, NormalSim(100), MeanSummary(), cfg, y)
    assert len(s) == 50
    # accepted parameters sit near the observed mean (posterior sd 0.1 plus tolerance)
    assert np.all(np.abs(s.params[:, 0] - y.values.mean()) < 0.7)
    tight = ABCConfig(epsilon=0.0, quantile=None, M=1, max_sims=2000, batch=1000)
    with pytest.raises(SamplerError):
        abc_rejection(rng_stream(7), FLAT, NormalSim(100), MeanSummary(), tight, y)


def test_reference_table_reuse():
    y = _y()
    ref = reference_table(rng_stream(8), FLAT, NormalSim(100), MeanSummary(), 5000)
    cfg = ABCConfig(quantile=0.02, M=100)
    a = abc_rejection(rng_stream(9), FLAT, NormalSim(100), MeanSummary(), cfg, y, reference=ref)
    b = abc_rejection(rng_stream(10), FLAT, NormalSim(100), MeanSummary(), cfg, y, reference=ref)
    np.testing.assert_array_equal(a.params, b.params)
    with pytest.raises(ValueError):
        abc_rejection(rng_stream(9), FLAT, NormalSim(100), MeanSummary(),
                      ABCConfig(quantile=0.5, M=10_000), y, reference=ref)


def test_config_validation():
    with pytest.raises(ValueError):
        ABCConfig(epsilon=1.0, quantile=0.1)
    with pytest.raises(ValueError):
        ABCConfig(epsilon=None, quantile=None)
    with pytest.raises(ValueError):
        ABCConfig(quantile=0.0)
    with pytest.raises(ValueError):
        ABCConfig(distance="manhattan")


# --- summaries ------------------------------------------------------------

def test_octiles_on_normal_sample():
    y = np.random.default_rng(0).normal(2.0, 1.0, size=(1, 100_000))
    loc, iqr, skew, kurt = OctileSummary()(y)[0]
    assert loc == pytest.approx(2.0, abs=0.02)
    assert iqr == pytest.approx(2 * stats.norm.ppf(0.75), rel=0.02)
    assert abs(skew) < 0.02
    want = (stats.norm.ppf(7 / 8) - stats.norm.ppf(5 / 8)) * 2 / (2 * stats.norm.ppf(0.75))
    assert kurt == pytest.approx(want, rel=0.03)


def test_gk_simulator_matches_sim_gk():
    p = GkParams(3.0, 1.0, 2.0, 0.5)
    a = GkSim(50)(rng_stream(1), np.array([[3.0, 1.0, 2.0, 0.5]]))[0]
    b = sim_gk(rng_stream(1), 50, p).values
    np.testing.assert_allclose(a, b, rtol=1e-14)


def test_arch_summaries_recover_truth():
    y = sim_arch(rng_stream(2), 100_000, 0.5, 0.3)
    a, b = ArchLSSummary()(y)[0]
    assert b == pytest.approx(0.3, abs=0.03)
    assert a == pytest.approx(0.5, abs=0.05)
    ml, r1, r2 = ArchLogAcfSummary()(y)[0]
    assert r1 == pytest.approx(0.3, abs=0.03)
    assert r2 == pytest.approx(0.09, abs=0.03)


def test_garch_mle_reaches_likelihood_optimum():
    y = sim_garch(rng_stream(3), 2000, 0.1, 0.1, 0.8).values
    est, ok = garch_mle(y)
    assert ok
    best = garch_loglik_terms(y, *est).sum()
    rng = np.random.default_rng(0)
    for _ in range(50):
        trial = est * np.exp(rng.normal(scale=0.05, size=3))
        if trial[1] + trial[2] < 1:
            assert garch_loglik_terms(y, *trial).sum() <= best + 1e-6


def test_garch_summary_counts_failures():
    s = GarchMLESummary()
    bad = np.ones(500)
    bad[10] = np.inf
    out = s(np.vstack([sim_garch(rng_stream(4), 500, 0.1, 0.1, 0.8).values, bad]))
    assert out.shape == (2, 3)
    assert s.failures == 1
    np.testing.assert_allclose(out[1], [0.1, 0.1, 0.8])   # start point, sample variance 1
    assert np.all(np.isfinite(out))


def test_popgen_summary_layout_and_zero_divergence():
    spec = ScenarioSpec("B", 5, 10)
    out = PopgenSummary()(CoalescentSim(spec)(rng_stream(5), np.array([[2.0, 0.1, 0.5]] * 2)))
    assert out.shape == (2, 3 * 3 + 3)
    mono = sim_coalescent(rng_stream(6), spec, (1e-6, 0.1, 0.5))
    s = PopgenSummary()(mono)[0]
    np.testing.assert_array_equal(s[[0, 1, 3, 4, 6, 7]], 0.0)   # variances, heterozygosities
    np.testing.assert_array_equal(s[[2, 5, 8]], 1.0)            # one allele per locus
    np.testing.assert_array_equal(s[9:], 0.0)
