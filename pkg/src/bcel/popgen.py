r"""Pairwise composite likelihood for microsatellites under stepwise mutation.

Time is scaled so that two lineages coalesce at rate 1 and mutations occur at
rate ``theta / 2`` per lineage.  The allele difference ``delta`` of two genes
then has log-probability

* same deme: ``|delta| log rho(theta) - log(1 + 2 theta) / 2`` with
  ``rho(theta) = theta / (1 + theta + sqrt(1 + 2 theta))``;
* demes split at time ``tau``: the same geometric law convolved with the
  Skellam-type law ``e^{-z} I_m(z)``, ``z = tau * theta``, of the net number
  of steps accumulated on the two separated branches.

Bessel values are always used in their ``e^{-z}``-scaled form, which absorbs
the ``e^{-tau theta}`` prefactor and never overflows.

Within a locus, pairs are grouped by type (same deme, or which divergence
separates them) and by ``|delta|``; a locus' score is then a count-weighted
sum of a small table of per-``|delta|`` scores, which keeps the cost per
parameter value independent of the number of genes.
"""
from __future__ import annotations

import math

import numpy as np

from .constraints import ConstraintProvider
from .data import Microsat
from .el import DomainError
from .mathfn import bessel_i_scaled_orders

__all__ = [
    "rho",
    "pair_loglik_same_deme",
    "pair_loglik_diverged",
    "same_deme_table",
    "diverged_table",
    "truncation_order",
    "pair_counts",
    "composite_loglik",
    "composite_score_matrix",
    "CompositeScore",
    "param_names",
]

_CHUNK = 256


def rho(theta: float) -> float:
    """``theta / (1 + theta + sqrt(1 + 2 theta))``, in (0, 1) for theta > 0."""
    if not theta > 0:
        raise DomainError("theta must be positive")
    s = math.sqrt(1.0 + 2.0 * theta)
    return theta / (1.0 + theta + s)


def _rho_arr(theta):
    s = np.sqrt(1.0 + 2.0 * theta)
    return theta / (1.0 + theta + s), s


def truncation_order(delta_max: int, theta: float, tau: float) -> int:
    """Number of geometric terms kept on each side of the Bessel sum.

    ``max(60, |delta| + ceil(10 sqrt(tau theta + 1)) + 40)``, raised where
    needed so the dropped geometric tail ``rho**K`` is below 1e-17.
    """
    base = max(60, int(delta_max) + math.ceil(10.0 * math.sqrt(tau * theta + 1.0)) + 40)
    r = rho(theta) if theta > 0 else 0.0
    if r > 0:
        base = max(base, math.ceil(math.log(1e-17) / math.log(r)))
    return int(base)


def pair_loglik_same_deme(delta: int, theta: float) -> float:
    """Log-probability of allele difference ``delta`` for two genes of one deme."""
    r = rho(theta)
    return abs(int(delta)) * math.log(r) - 0.5 * math.log1p(2.0 * theta)


def pair_loglik_diverged(delta: int, theta: float, tau: float) -> float:
    """Log-probability of allele difference ``delta`` across a split at ``tau``."""
    if not theta > 0:
        raise DomainError("theta must be positive")
    if not tau >= 0:
        raise DomainError("tau must be nonnegative")
    if tau == 0:
        return pair_loglik_same_deme(delta, theta)
    d = abs(int(delta))
    logl, _, _ = diverged_table(d, np.array([theta]), np.array([tau]))
    return float(logl[0, d])


def same_deme_table(dmax: int, theta):
    """Log-likelihood and theta-derivative for ``|delta| = 0..dmax``.

    ``theta`` has shape ``(m,)``; both outputs have shape ``(m, dmax + 1)``.
    Uses ``d log rho / d theta = 1 / (theta s)`` and
    ``d log s / d theta = 1 / s**2`` with ``s = sqrt(1 + 2 theta)``.
    """
    theta = np.asarray(theta, dtype=float)
    r, s = _rho_arr(theta)
    d = np.arange(dmax + 1)[None, :]
    logl = d * np.log(r)[:, None] - np.log(s)[:, None]
    dtheta = d / (theta * s)[:, None] - (1.0 / s**2)[:, None]
    return logl, dtheta


def diverged_table(dmax: int, theta, tau):
    r"""Log-likelihood and gradient for ``|delta| = 0..dmax`` across a split.

    With ``S(delta) = sum_k rho^{|k|} e^{-z} I_{delta-k}(z)`` and ``z = tau theta``:
    ``log l = log S - log s``, ``d/dtau = theta S_z / S`` and
    ``d/dtheta = (tau S_z + rho' S_rho) / S - 1 / s**2`` where
    ``S_z`` uses ``d/dz[e^{-z} I_m] = e^{-z}((I_{m-1} + I_{m+1}) / 2 - I_m)``.

    Returns three arrays of shape ``(m, dmax + 1)``.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    m = theta.shape[0]
    logl = np.empty((m, dmax + 1))
    dth = np.empty((m, dmax + 1))
    dta = np.empty((m, dmax + 1))
    for lo in range(0, m, _CHUNK):
        sl = slice(lo, lo + _CHUNK)
        logl[sl], dth[sl], dta[sl] = _diverged_chunk(dmax, theta[sl], tau[sl])
    return logl, dth, dta


def _diverged_chunk(dmax, theta, tau):
    r, s = _rho_arr(theta)
    z = tau * theta
    K = max(truncation_order(dmax, float(t), float(u)) for t, u in zip(theta, tau))
    k = np.arange(-K, K + 1)
    order = np.abs(np.arange(dmax + 1)[:, None] - k[None, :])       # (J, 2K+1)
    ive = bessel_i_scaled_orders(dmax + K + 1, z)                   # (N, m)
    b0 = ive[order]                                                 # (J, 2K+1, m)
    b_dz = 0.5 * (ive[np.abs(order - 1)] + ive[order + 1]) - b0
    ak = np.abs(k)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        geo = r[None, :] ** ak                                      # (2K+1, m)
        dgeo = np.where(ak > 0, ak * r[None, :] ** (ak - 1), 0.0)
    S = np.einsum("jkm,km->mj", b0, geo)
    S_z = np.einsum("jkm,km->mj", b_dz, geo)
    S_r = np.einsum("jkm,km->mj", b0, dgeo)
    drho = 2.0 / (s * (s + 1.0) ** 2)
    with np.errstate(divide="ignore"):
        logl = np.log(S) - np.log(s)[:, None]
    dtheta = (tau[:, None] * S_z + drho[:, None] * S_r) / S - (1.0 / s**2)[:, None]
    dtau = theta[:, None] * S_z / S
    return logl, dtheta, dtau


# ---------------------------------------------------------------------------
# Pair bookkeeping
# ---------------------------------------------------------------------------

def param_names(scenario: str):
    return ("theta", "tau") if scenario == "A" else ("theta", "tau1", "tau2")


def _pair_type(d1, d2, scenario):
    """0 = same deme; 1 = split at tau (A) or tau1 (B); 2 = split at tau2 (B)."""
    same = d1 == d2
    if scenario == "A":
        return np.where(same, 0, 1)
    in23 = (d1 >= 2) & (d2 >= 2)
    return np.where(same, 0, np.where(in23, 1, 2))


def pair_counts(data: Microsat):
    """Count gene pairs per locus by pair type and absolute allele difference.

    Returns an integer array of shape ``(n_types, K, dmax + 1)``.
    """
    n_types = 2 if data.scenario == "A" else 3
    i, j = np.triu_indices(data.n_genes, k=1)
    delta = np.abs(data.alleles[:, i] - data.alleles[:, j])
    ptype = _pair_type(data.demes[:, i], data.demes[:, j], data.scenario)
    dmax = int(delta.max(initial=0))
    counts = np.zeros((n_types, data.n_loci, dmax + 1), dtype=np.int64)
    loc = np.broadcast_to(np.arange(data.n_loci)[:, None], delta.shape)
    np.add.at(counts, (ptype, loc, delta), 1)
    return counts


def _check_phi(phi, scenario):
    phi = np.asarray(phi, dtype=float).ravel()
    want = 2 if scenario == "A" else 3
    if phi.shape[0] != want:
        raise ValueError(f"scenario {scenario} takes {want} parameters")
    if not phi[0] > 0:
        raise DomainError("theta must be positive")
    if np.any(phi[1:] < 0):
        raise DomainError("divergence times must be nonnegative")
    if scenario == "B" and phi[1] > phi[2]:
        raise DomainError("scenario B requires tau1 <= tau2")
    return phi


def _tables(dmax, phis, scenario):
    """Per-type log-likelihood and score tables for a stack of parameters.

    Returns ``logl`` of shape ``(m, n_types, dmax + 1)`` and ``score`` of shape
    ``(m, n_types, dmax + 1, dim)``.
    """
    phis = np.atleast_2d(phis)
    m, dim = phis.shape
    n_types = dim
    theta = phis[:, 0]
    logl = np.zeros((m, n_types, dmax + 1))
    score = np.zeros((m, n_types, dmax + 1, dim))
    logl[:, 0], score[:, 0, :, 0] = same_deme_table(dmax, theta)
    for t in range(1, n_types):
        l, dth, dta = diverged_table(dmax, theta, phis[:, t])
        logl[:, t] = l
        score[:, t, :, 0] = dth
        score[:, t, :, t] = dta
    return logl, score


def composite_loglik(data: Microsat, phi) -> np.ndarray:
    """Pairwise log-likelihood of every locus, shape ``(K,)``."""
    phi = _check_phi(phi, data.scenario)
    counts = pair_counts(data)
    logl, _ = _tables(counts.shape[2] - 1, phi[None], data.scenario)
    return np.einsum("tkd,td->k", counts, logl[0])


def _score_rows(counts, score, theta_same_pop_only):
    # score: (m, n_types, D, dim) -> rows (m, K, dim)
    rows = np.einsum("tkd,mtdp->mkp", counts, score)
    if theta_same_pop_only:
        rows[..., 0] = np.einsum("kd,md->mk", counts[0], score[:, 0, :, 0])
    return rows


def composite_score_matrix(data: Microsat, phi, scenario: str | None = None,
                           theta_same_pop_only: bool | None = None) -> np.ndarray:
    """Per-locus pairwise score, one row per locus.

    Row ``k`` is the gradient of the summed pairwise log-likelihood of locus
    ``k`` with respect to ``(theta, tau)`` (scenario A) or
    ``(theta, tau1, tau2)`` (scenario B).  With ``theta_same_pop_only`` the
    theta component sums over same-deme pairs only; by default this is on for
    scenario A and off for scenario B.
    """
    scenario = scenario or data.scenario
    if scenario != data.scenario:
        raise ValueError(f"data were labelled for scenario {data.scenario}, not {scenario}")
    if theta_same_pop_only is None:
        theta_same_pop_only = scenario == "A"
    phi = _check_phi(phi, scenario)
    counts = pair_counts(data)
    _, score = _tables(counts.shape[2] - 1, phi[None], scenario)
    return _score_rows(counts, score, theta_same_pop_only)[0]


class CompositeScore(ConstraintProvider):
    """Provider for ``theta = (theta, tau)`` or ``(theta, tau1, tau2)``.

    Pair counts are cached per dataset object.
    """

    def __init__(self, scenario: str = "A", theta_same_pop_only: bool | None = None):
        if scenario not in ("A", "B"):
            raise ValueError("scenario must be 'A' or 'B'")
        self.scenario = scenario
        self.theta_same_pop_only = (scenario == "A") if theta_same_pop_only is None \
            else bool(theta_same_pop_only)
        self.dim = 2 if scenario == "A" else 3
        self.n_constraints = self.dim
        self._cache_key = None
        self._counts = None

    def _get_counts(self, data: Microsat):
        if data.scenario != self.scenario:
            raise ValueError(f"data were labelled for scenario {data.scenario}")
        if self._cache_key is not data:
            self._counts = pair_counts(data)
            self._cache_key = data
        return self._counts

    def __call__(self, data, theta):
        phi = _check_phi(theta, self.scenario)
        counts = self._get_counts(data)
        _, score = _tables(counts.shape[2] - 1, phi[None], self.scenario)
        return _score_rows(counts, score, self.theta_same_pop_only)[0]

    def batch(self, data, thetas):
        phis = np.atleast_2d(np.asarray(thetas, dtype=float))
        valid = (phis[:, 0] > 0) & np.all(phis[:, 1:] >= 0, axis=1)
        if self.scenario == "B":
            valid &= phis[:, 1] <= phis[:, 2]
        counts = self._get_counts(data)
        H = np.zeros((phis.shape[0], counts.shape[1], self.dim))
        if valid.any():
            _, score = _tables(counts.shape[2] - 1, phis[valid], self.scenario)
            H[valid] = _score_rows(counts, score, self.theta_same_pop_only)
        return H, valid

    def __repr__(self):
        return (f"CompositeScore(scenario={self.scenario!r}, "
                f"theta_same_pop_only={self.theta_same_pop_only})")
