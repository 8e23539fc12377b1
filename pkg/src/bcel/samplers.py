"""Importance samplers driven by empirical likelihood.

:func:`bcel_basic` draws from the prior and weights each draw by its empirical
likelihood.  :func:`bcel_amis` refits a Student t3 proposal to the weighted
cloud at every iteration and reweights all past particles against the
mixture of proposals issued so far (adaptive multiple importance sampling).

All weight arithmetic is in log scale; :class:`WeightedSample` stores
unnormalized log weights and normalization happens in the summaries.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .el import SolverConfig, el_solve_batch
from .mathfn import (as_generator, student_t3_logpdf, student_t3_sample,
                     weighted_mean_cov, weighted_quantile)
from .priors import PriorSpec

__all__ = [
    "SamplerError",
    "WeightedSample",
    "ess",
    "log_el_many",
    "bcel_basic",
    "bcel_amis",
    "posterior_summary",
    "write_summary_csv",
    "MIXTURES",
]

MIXTURES = ("full", "paper-literal")

# problems of size n x q per chunk are sized to keep H near this many floats
_CHUNK_FLOATS = 4_000_000


class SamplerError(RuntimeError):
    """Raised when a sampler cannot produce a usable weighted sample."""


@dataclass(eq=False)
class WeightedSample:
    """Particles with unnormalized log weights.

    Attributes
    ----------
    theta : ndarray, shape (N, d)
        Particles in the prior's working coordinates.
    params : ndarray, shape (N, d)
        The same particles on the model scale.
    log_weight : ndarray, shape (N,)
        Log importance weights; ``-inf`` marks a zero weight.
    iteration : ndarray of int, shape (N,)
        Sampler iteration that produced each particle (1-based).
    names : tuple of str
        Model-scale parameter names.
    """

    theta: np.ndarray
    params: np.ndarray
    log_weight: np.ndarray
    iteration: np.ndarray
    names: tuple = ()
    info: dict = field(default_factory=dict)

    def __len__(self):
        return self.theta.shape[0]

    @property
    def dim(self) -> int:
        return self.theta.shape[1]

    def weights(self) -> np.ndarray:
        """Weights rescaled so the largest is 1 (zero if all are zero)."""
        lw = self.log_weight
        top = np.max(lw) if lw.size else -np.inf
        if not np.isfinite(top):
            return np.zeros_like(lw)
        return np.exp(lw - top)

    def normalized_weights(self) -> np.ndarray:
        w = self.weights()
        s = w.sum()
        if not s > 0:
            raise SamplerError("sample carries no positive weight")
        return w / s

    def ess(self) -> float:
        return ess(self.weights())

    def coords(self, scale: str = "model") -> np.ndarray:
        if scale == "model":
            return self.params
        if scale == "working":
            return self.theta
        raise ValueError("scale must be 'model' or 'working'")

    def to_csv(self, path, scale: str = "model") -> None:
        """Write ``iter,weight,theta_1..theta_d``; weights are max-shifted, not normalized."""
        x = self.coords(scale)
        w = self.weights()
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["iter", "weight"] + [f"theta_{j + 1}" for j in range(self.dim)])
            for it, wi, row in zip(self.iteration.tolist(), w.tolist(), x.tolist()):
                out.writerow([it, repr(wi)] + [repr(v) for v in row])


def ess(weights) -> float:
    """Effective sample size ``1 / sum(w_i / sum w)**2``.

    >>> ess([2.0, 1.0, 1.0])
    2.6666666666666665
    """
    w = np.asarray(weights, dtype=float).ravel()
    if w.size == 0 or np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    s = w.sum()
    if not s > 0:
        raise ValueError("all weights are zero")
    # scale by the maximum first so tiny weights neither underflow nor overflow
    w = w / w.max()
    v = w / w.sum()
    return float(min(max(1.0 / np.dot(v, v), 1.0), w.size))


def log_el_many(provider, data, params, cfg: SolverConfig | None = None,
                threads: int = 1, active=None) -> np.ndarray:
    """Log empirical likelihood at every row of ``params`` (model scale).

    Rows outside the model domain and hull violations give ``-inf``; rows with
    ``active`` False are skipped and also get ``-inf``.  The result does not
    depend on ``threads``.
    """
    cfg = cfg or SolverConfig()
    params = np.atleast_2d(np.asarray(params, dtype=float))
    m = params.shape[0]
    out = np.full(m, -np.inf)
    idx = np.arange(m) if active is None else np.flatnonzero(active)
    if idx.size == 0:
        return out
    probe, ok = provider.batch(data, params[idx[:1]])
    per = max(1, probe.shape[1] * probe.shape[2])
    size = max(1, min(4096, _CHUNK_FLOATS // per))
    chunks = [idx[i:i + size] for i in range(0, idx.size, size)]

    def work(rows):
        H, valid = provider.batch(data, params[rows])
        res = np.full(rows.size, -np.inf)
        if np.any(valid):
            sols = el_solve_batch(H[valid], cfg)
            res[valid] = [s.log_el for s in sols]
        return res

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    out[idx] = np.concatenate(parts)
    return out


def _check_weights(log_w, what):
    if not np.any(np.isfinite(log_w)):
        raise SamplerError(
            f"{what}: every particle has zero weight; the prior puts no mass where "
            "the constraints can be met (prior-model mismatch)")


def bcel_basic(rng, prior: PriorSpec, provider, data, M: int,
               cfg: SolverConfig | None = None, threads: int = 1) -> WeightedSample:
    """Sample the prior and weight each draw by its empirical likelihood.

    Parameters
    ----------
    rng : Generator or int
    prior : PriorSpec
    provider : ConstraintProvider
    data : dataset accepted by ``provider``
    M : int
        Number of particles.
    cfg : SolverConfig, optional
    threads : int
        Worker cap for the likelihood evaluations.

    Raises
    ------
    SamplerError
        If no particle receives positive weight.
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    rng = as_generator(rng)
    theta = prior.sample(rng, M)
    params = prior.to_model(theta)
    log_w = log_el_many(provider, data, params, cfg, threads)
    _check_weights(log_w, "bcel_basic")
    return WeightedSample(theta, params, log_w, np.ones(M, dtype=np.int64), prior.names)


def bcel_amis(rng, prior: PriorSpec, provider, data, M: int, T_M: int,
              mixture: str = "full", cfg: SolverConfig | None = None,
              threads: int = 1) -> WeightedSample:
    """Adaptive multiple importance sampling with t3 proposals.

    Iteration 1 draws from the prior with weight ``L_el``.  Iteration ``t``
    draws ``M`` particles from ``t3(m_t, Sigma_t)`` fitted to all weighted
    particles so far; every particle is then reweighted as
    ``pi * L_el / D`` where ``D`` is the proposal mixture density.

    Parameters
    ----------
    mixture : {"full", "paper-literal"}
        ``"full"`` takes ``D`` as the equal-weight mixture of all proposals
        issued so far, the current one included.  ``"paper-literal"`` sums
        the proposals of the previous iterations only.
    """
    if mixture not in MIXTURES:
        raise ValueError(f"mixture must be one of {MIXTURES}")
    if T_M < 1 or M < 1:
        raise ValueError("M and T_M must be positive")
    rng = as_generator(rng)
    if T_M == 1:
        return bcel_basic(rng, prior, provider, data, M, cfg, threads)

    theta = prior.sample(rng, M)
    params = prior.to_model(theta)
    log_l = log_el_many(provider, data, params, cfg, threads)
    log_pi = prior.logpdf(theta)
    # log_q[s] holds proposal s evaluated at every particle so far
    log_q = [log_pi.copy()]
    iteration = np.ones(M, dtype=np.int64)
    log_w = log_l.copy()
    _check_weights(log_w, "bcel_amis iteration 1")
    history, proposals = [], []

    for t in range(2, T_M + 1):
        w = np.exp(log_w - np.max(log_w))
        mean, cov = weighted_mean_cov(theta, w)
        history.append({"iteration": t, "mean": mean.tolist(), "ess": ess(w)})
        proposals.append((mean, cov))

        new = student_t3_sample(rng, mean, cov, size=M)
        new_pi = prior.logpdf(new)
        new_params = np.full_like(new, np.nan)
        inside = np.isfinite(new_pi)
        new_params[inside] = prior.to_model(new[inside])
        new_l = log_el_many(provider, data, np.where(inside[:, None], new_params, 0.0),
                            cfg, threads, active=inside)

        # old proposals at the new particles, the new proposal at every particle
        log_q = [np.concatenate([lq, _proposal_logpdf(s, new, prior, proposals)])
                 for s, lq in enumerate(log_q)]
        theta = np.vstack([theta, new])
        params = np.vstack([params, new_params])
        log_l = np.concatenate([log_l, new_l])
        log_pi = np.concatenate([log_pi, new_pi])
        iteration = np.concatenate([iteration, np.full(M, t, dtype=np.int64)])
        log_q.append(student_t3_logpdf(theta, mean, cov))

        used = log_q if mixture == "full" else log_q[:-1]
        log_d = logsumexp(np.vstack(used), axis=0) - math.log(len(used))
        with np.errstate(invalid="ignore"):
            log_w = np.where(np.isfinite(log_pi) & np.isfinite(log_l),
                             log_pi + log_l - log_d, -np.inf)
        _check_weights(log_w, f"bcel_amis iteration {t}")

    return WeightedSample(theta, params, log_w, iteration, prior.names,
                          info={"mixture": mixture, "proposals": history})


def _proposal_logpdf(s, x, prior, proposals):
    """Density of proposal ``s`` (0 = prior, s >= 1 = t3 of iteration s + 1)."""
    if s == 0:
        return prior.logpdf(x)
    mean, cov = proposals[s - 1]
    return student_t3_logpdf(x, mean, cov)


def posterior_summary(sample: WeightedSample, cred: float = 0.8, scale: str = "model"):
    """Weighted mean, sd, median and equal-tail interval per coordinate.

    Returns a list of dicts with keys ``name, mean, sd, median, lower, upper,
    ess``.  Quantiles follow :func:`bcel.mathfn.weighted_quantile`.
    """
    if not 0 < cred < 1:
        raise ValueError("cred must lie in (0, 1)")
    w = sample.normalized_weights()
    x = sample.coords(scale)
    keep = w > 0
    w, x = w[keep], x[keep]
    e = ess(w)
    lo_q, hi_q = (1 - cred) / 2, 1 - (1 - cred) / 2
    rows = []
    for j in range(x.shape[1]):
        col = x[:, j]
        mean = float(np.dot(w, col))
        var = float(np.dot(w, (col - mean) ** 2))
        name = sample.names[j] if j < len(sample.names) else f"theta_{j + 1}"
        rows.append({
            "name": name,
            "mean": mean,
            "sd": math.sqrt(max(var, 0.0)),
            "median": float(weighted_quantile(col, w, 0.5)),
            "lower": float(weighted_quantile(col, w, lo_q)),
            "upper": float(weighted_quantile(col, w, hi_q)),
            "ess": e,
        })
    return rows


SUMMARY_COLUMNS = ("name", "mean", "sd", "median", "lower", "upper", "ess")


def write_summary_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(SUMMARY_COLUMNS)
        for r in rows:
            out.writerow([r["name"]] + [repr(float(r[k])) for k in SUMMARY_COLUMNS[1:]])
