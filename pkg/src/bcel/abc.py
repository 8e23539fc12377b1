"""Rejection ABC baseline with the summary statistics used for comparison.

A *simulator* maps ``(rng, params)`` with ``params`` of shape ``(N, d)`` on the
model scale to a batch of datasets: an ``(N, n)`` array for real-valued data,
a list of :class:`~bcel.data.Microsat` panels for genetic data.  A *summary*
maps such a batch (or a single dataset) to an ``(N, s)`` array.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter

from .constraints import _gk_from_z
from .data import IID, Microsat, Series
from .mathfn import as_generator
from .samplers import SamplerError, WeightedSample
from .simulate import ScenarioSpec, sim_arch_many, sim_coalescent, sim_garch_many

__all__ = [
    "ABCConfig",
    "ReferenceTable",
    "reference_table",
    "abc_rejection",
    "NormalSim",
    "GkSim",
    "ArchSim",
    "GarchSim",
    "CoalescentSim",
    "MeanSummary",
    "OctileSummary",
    "ArchLSSummary",
    "ArchLogAcfSummary",
    "GarchMLESummary",
    "PopgenSummary",
    "SUMMARIES",
    "garch_mle",
]

DISTANCES = ("euclidean", "mahalanobis-diagonal")
_SIM_BATCH = 10_000


@dataclass(frozen=True)
class ABCConfig:
    """Rejection-ABC settings.

    Exactly one of ``epsilon`` (absolute tolerance) and ``quantile`` (the
    accepted fraction of a reference table of ``M / quantile`` simulations)
    is set.  ``max_sims`` caps the absolute-tolerance loop.
    """

    summary: str = "mean"
    distance: str = "mahalanobis-diagonal"
    epsilon: float | None = None
    quantile: float | None = 0.01
    M: int = 1000
    max_sims: int = 10_000_000
    batch: int = _SIM_BATCH

    def __post_init__(self):
        if (self.epsilon is None) == (self.quantile is None):
            raise ValueError("set exactly one of epsilon and quantile")
        if self.quantile is not None and not 0 < self.quantile <= 1:
            raise ValueError("quantile must lie in (0, 1]")
        if self.epsilon is not None and not self.epsilon >= 0:
            raise ValueError("epsilon must be nonnegative")
        if self.distance not in DISTANCES:
            raise ValueError(f"distance must be one of {DISTANCES}")
        if self.M < 1 or self.batch < 1:
            raise ValueError("M and batch must be positive")

    @property
    def n_sims(self) -> int:
        """Reference-table size in quantile mode."""
        return int(math.ceil(self.M / self.quantile - 1e-9))


# ---------------------------------------------------------------------------
# simulators
# ---------------------------------------------------------------------------

class NormalSim:
    """``n`` draws from N(mu, 1) per parameter row."""

    def __init__(self, n: int):
        self.n = int(n)

    def __call__(self, rng, params):
        params = np.atleast_2d(params)
        return params[:, :1] + rng.standard_normal((params.shape[0], self.n))


class GkSim:
    """g-and-k samples of size ``n``; rows of ``params`` are ``(A, B, g, k)``."""

    def __init__(self, n: int, c: float = 0.8):
        self.n, self.c = int(n), float(c)

    def __call__(self, rng, params):
        p = np.atleast_2d(params)
        z = rng.standard_normal((p.shape[0], self.n))
        return _gk_from_z(z, p[:, :1], p[:, 1:2], p[:, 2:3], p[:, 3:4], self.c)


class ArchSim:
    def __init__(self, T: int):
        self.T = int(T)

    def __call__(self, rng, params):
        return sim_arch_many(rng, params, self.T)


class GarchSim:
    def __init__(self, T: int):
        self.T = int(T)

    def __call__(self, rng, params):
        return sim_garch_many(rng, params, self.T)


class CoalescentSim:
    """One microsatellite panel per parameter row."""

    def __init__(self, spec: ScenarioSpec):
        self.spec = spec

    def __call__(self, rng, params):
        return [sim_coalescent(rng, self.spec, phi) for phi in np.atleast_2d(params)]


# ---------------------------------------------------------------------------
# summaries
# ---------------------------------------------------------------------------

def _rows(batch) -> np.ndarray:
    if isinstance(batch, (IID, Series)):
        return batch.values[None, :]
    return np.atleast_2d(np.asarray(batch, dtype=float))


class MeanSummary:
    """Sample mean."""

    name = "mean"

    def __call__(self, batch):
        return _rows(batch).mean(axis=1, keepdims=True)


class OctileSummary:
    """Robust location, scale, skewness and kurtosis from sample octiles."""

    name = "octiles"

    def __call__(self, batch):
        e = np.quantile(_rows(batch), np.arange(1, 8) / 8, axis=1)
        iqr = e[5] - e[1]
        safe = np.where(iqr > 0, iqr, 1.0)
        return np.column_stack([
            e[3],
            iqr,
            (e[5] + e[1] - 2 * e[3]) / safe,
            (e[6] - e[4] + e[2] - e[0]) / safe,
        ])


class ArchLSSummary:
    """Least-squares fit of ``y_t**2 = a + b y_{t-1}**2``: ``(a, b)``."""

    name = "arch-ls"

    def __call__(self, batch):
        y2 = _rows(batch) ** 2
        x, z = y2[:, :-1], y2[:, 1:]
        xc = x - x.mean(axis=1, keepdims=True)
        zc = z - z.mean(axis=1, keepdims=True)
        var = np.sum(xc * xc, axis=1)
        b = np.sum(xc * zc, axis=1) / np.where(var > 0, var, 1.0)
        a = z.mean(axis=1) - b * x.mean(axis=1)
        return np.column_stack([a, b])


def _acf(x, lag):
    xc = x - x.mean(axis=1, keepdims=True)
    den = np.sum(xc * xc, axis=1)
    return np.sum(xc[:, lag:] * xc[:, :-lag], axis=1) / np.where(den > 0, den, 1.0)


class ArchLogAcfSummary:
    """Mean of ``log y_t**2`` and lag-1, lag-2 autocorrelations of ``y_t**2``."""

    name = "arch-logacf"

    def __call__(self, batch):
        y2 = _rows(batch) ** 2
        with np.errstate(divide="ignore"):
            ml = np.log(y2).mean(axis=1)
        return np.column_stack([ml, _acf(y2, 1), _acf(y2, 2)])


def _garch_filter(y2, a0, a1, b1):
    """Variance path and its gradient in ``(a0, a1, b1)``, stationary start."""
    gap = 1.0 - a1 - b1
    den = [1.0, -b1]
    s0 = a0 / gap
    s2 = lfilter([1.0], den, a0 + a1 * y2[:-1], zi=[b1 * s0])[0]
    s2 = np.concatenate([[s0], s2])
    g0 = np.concatenate([[1.0 / gap], lfilter([1.0], den, np.ones(y2.size - 1), zi=[b1 / gap])[0]])
    g1 = np.concatenate([[s0 / gap], lfilter([1.0], den, y2[:-1], zi=[b1 * s0 / gap])[0]])
    g2 = np.concatenate([[s0 / gap], lfilter([1.0], den, s2[:-1], zi=[b1 * s0 / gap])[0]])
    return s2, np.stack([g0, g1, g2])


def garch_mle(y, max_persistence: float = 0.999):
    """Gaussian maximum likelihood for a GARCH(1,1) by box-constrained L-BFGS-B.

    The search runs over ``(alpha0, s, u)`` with ``alpha1 = s u`` and
    ``beta1 = s (1 - u)`` so stationarity is a box constraint.  On failure, or
    for a series with non-finite values, the method-of-moments starting point
    is returned.

    Returns
    -------
    estimate : ndarray, shape (3,)
    ok : bool
        False when the optimizer did not report success.
    """
    y = np.asarray(y, dtype=float).ravel()
    y2 = y * y
    T = y.size
    finite = np.isfinite(y2)
    var = max(float(y2[finite].mean()) if finite.any() else 1.0, 1e-12)
    s_init, u_init = 0.9, 1.0 / 9.0
    x0 = np.array([var * (1 - s_init), s_init, u_init])
    if not finite.all():
        # overflowed simulations: flag and fall back to the starting point
        return np.array([x0[0], s_init * u_init, s_init * (1 - u_init)]), False

    def fun(x):
        a0, s, u = x
        a1, b1 = s * u, s * (1 - u)
        s2, g = _garch_filter(y2, a0, a1, b1)
        val = 0.5 * np.sum(np.log(s2) + y2 / s2) / T
        ds = 0.5 * (1.0 / s2 - y2 / (s2 * s2)) @ g.T / T
        grad = np.array([ds[0], u * ds[1] + (1 - u) * ds[2], s * (ds[1] - ds[2])])
        return val, grad

    bounds = [(1e-8 * var, 10 * var), (0.0, max_persistence), (0.0, 1.0)]
    try:
        with np.errstate(all="ignore"):
            res = minimize(fun, x0, jac=True, method="L-BFGS-B", bounds=bounds)
        ok = bool(res.success) and np.all(np.isfinite(res.x))
        x = res.x if ok else x0
    except (ValueError, FloatingPointError):
        ok, x = False, x0
    a0, s, u = x
    return np.array([a0, s * u, s * (1 - u)]), ok


class GarchMLESummary:
    """Numerical Gaussian MLE of ``(alpha0, alpha1, beta1)``.

    ``failures`` counts the rows that fell back to the starting point.
    """

    name = "garch-mle"

    def __init__(self):
        self.failures = 0

    def __call__(self, batch):
        rows = _rows(batch)
        out = np.empty((rows.shape[0], 3))
        for i, y in enumerate(rows):
            out[i], ok = garch_mle(y)
            self.failures += not ok
        return out


class PopgenSummary:
    """Per deme: mean allele variance, heterozygosity and allele count;
    per pair of demes: squared difference of mean allele sizes.  All
    averaged over loci."""

    name = "popgen"

    def _one(self, d: Microsat):
        labels = np.unique(d.demes)
        stats, means = [], []
        for lab in labels:
            a = np.where(d.demes == lab, d.alleles, 0).astype(float)
            cnt = (d.demes == lab).sum(axis=1)
            mu = a.sum(axis=1) / cnt
            dev = np.where(d.demes == lab, d.alleles - mu[:, None], 0.0)
            var = (dev ** 2).sum(axis=1) / np.maximum(cnt - 1, 1)
            het, nall = [], []
            for k in range(d.n_loci):
                _, c = np.unique(d.alleles[k][d.demes[k] == lab], return_counts=True)
                f = c / c.sum()
                het.append(1.0 - np.dot(f, f))
                nall.append(c.size)
            stats += [var.mean(), np.mean(het), np.mean(nall)]
            means.append(mu)
        for i in range(len(labels)):
            for j in range(i + 1, len(labels)):
                stats.append(np.mean((means[i] - means[j]) ** 2))
        return np.array(stats)

    def __call__(self, batch):
        if isinstance(batch, Microsat):
            batch = [batch]
        return np.vstack([self._one(d) for d in batch])


SUMMARIES = {
    "mean": MeanSummary,
    "octiles": OctileSummary,
    "arch-ls": ArchLSSummary,
    "arch-logacf": ArchLogAcfSummary,
    "garch-mle": GarchMLESummary,
    "popgen": PopgenSummary,
}


# ---------------------------------------------------------------------------
# rejection
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class ReferenceTable:
    """Prior draws (working and model scale) with their simulated summaries."""

    theta: np.ndarray
    params: np.ndarray
    stats: np.ndarray
    info: dict = field(default_factory=dict)


def _simulate_stats(rng, simulator, summary, params, batch):
    out = []
    for i in range(0, params.shape[0], batch):
        out.append(np.asarray(summary(simulator(rng, params[i:i + batch])), dtype=float))
    return np.vstack(out)


def reference_table(rng, prior, simulator, summary, N: int, batch: int = _SIM_BATCH) -> ReferenceTable:
    """Simulate ``N`` parameter and summary pairs from the prior."""
    rng = as_generator(rng)
    theta = prior.sample(rng, int(N))
    params = prior.to_model(theta)
    stats = _simulate_stats(rng, simulator, summary, params, batch)
    return ReferenceTable(theta, params, stats)


def _scale(stats, distance):
    if distance == "euclidean":
        return np.ones(stats.shape[1])
    sd = np.nanstd(stats, axis=0)
    return np.where(np.isfinite(sd) & (sd > 0), sd, 1.0)


def _distance(stats, obs, scale):
    d = np.sqrt(np.sum(((stats - obs) / scale) ** 2, axis=1))
    return np.where(np.isnan(d), np.inf, d)


def _closest(dist, M):
    """Indices of the ``M`` smallest distances, ties broken by index."""
    if M >= dist.size:
        return np.argsort(dist, kind="stable")
    cut = np.partition(dist, M - 1)[M - 1]
    cand = np.flatnonzero(dist <= cut)
    return cand[np.argsort(dist[cand], kind="stable")][:M]


def abc_rejection(rng, prior, simulator, summary, cfg: ABCConfig, data,
                  reference: ReferenceTable | None = None) -> WeightedSample:
    """Rejection ABC returning ``cfg.M`` unit-weight particles.

    Quantile mode simulates ``M / quantile`` pairs (or reuses ``reference``)
    and keeps the ``M`` closest.  Absolute mode draws batches until ``M``
    draws fall within ``epsilon``, keeping them in draw order.  The diagonal
    Mahalanobis scale is the per-statistic sd over the reference table
    (quantile mode) or over the first batch (absolute mode).

    Raises
    ------
    SamplerError
        When absolute mode exhausts ``cfg.max_sims``.
    """
    rng = as_generator(rng)
    obs = np.asarray(summary(data), dtype=float).ravel()
    if cfg.quantile is not None:
        if reference is None:
            reference = reference_table(rng, prior, simulator, summary, cfg.n_sims, cfg.batch)
        elif reference.theta.shape[0] < cfg.M:
            raise ValueError("reference table smaller than M")
        scale = _scale(reference.stats, cfg.distance)
        dist = _distance(reference.stats, obs, scale)
        keep = _closest(dist, cfg.M)
        theta, params = reference.theta[keep], reference.params[keep]
        info = {"mode": "quantile", "n_sims": reference.theta.shape[0],
                "epsilon": float(dist[keep[-1]])}
    else:
        kept_t, kept_p, have, sims, scale = [], [], 0, 0, None
        while have < cfg.M:
            if sims >= cfg.max_sims:
                raise SamplerError(
                    f"abc_rejection: {have} of {cfg.M} accepted after {sims} simulations")
            n = min(cfg.batch, cfg.max_sims - sims)
            th = prior.sample(rng, n)
            pa = prior.to_model(th)
            st = _simulate_stats(rng, simulator, summary, pa, cfg.batch)
            sims += n
            if scale is None:
                scale = _scale(st, cfg.distance)
            acc = _distance(st, obs, scale) <= cfg.epsilon
            kept_t.append(th[acc])
            kept_p.append(pa[acc])
            have += int(acc.sum())
        theta = np.vstack(kept_t)[:cfg.M]
        params = np.vstack(kept_p)[:cfg.M]
        info = {"mode": "epsilon", "n_sims": sims, "epsilon": cfg.epsilon}
    m = theta.shape[0]
    return WeightedSample(theta, params, np.zeros(m), np.ones(m, dtype=np.int64),
                          prior.names, info=info)
