"""Forward simulators for every model family.

They produce pseudo-observed datasets and serve as the ABC forward model.
All take a generator (or an integer seed) first; see
:func:`bcel.mathfn.rng_stream`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constraints import GkParams, _check_arch, _check_garch, _gk_from_z
from .data import IID, Microsat, Series
from .el import DomainError
from .mathfn import as_generator, rng_stream

__all__ = [
    "ScenarioSpec",
    "BURN_IN",
    "sim_normal",
    "sim_gk",
    "sim_arch",
    "sim_garch",
    "sim_arch_many",
    "sim_garch_many",
    "sim_coalescent",
    "sim_coalescent_locus",
]

BURN_IN = 500


@dataclass(frozen=True)
class ScenarioSpec:
    """Sampling design: diploid individuals per deme and number of loci."""

    scenario: str = "A"
    individuals_per_pop: int = 30
    loci: int = 100

    def __post_init__(self):
        if self.scenario not in ("A", "B"):
            raise ValueError("scenario must be 'A' or 'B'")
        if self.individuals_per_pop < 1 or self.loci < 1:
            raise ValueError("counts must be positive")

    @property
    def n_demes(self) -> int:
        return 2 if self.scenario == "A" else 3

    @property
    def genes_per_pop(self) -> int:
        return 2 * self.individuals_per_pop

    def deme_labels(self) -> np.ndarray:
        return np.repeat(np.arange(1, self.n_demes + 1), self.genes_per_pop)


def sim_normal(rng, n: int, theta: float) -> IID:
    """``n`` iid draws from N(theta, 1)."""
    rng = as_generator(rng)
    return IID(theta + rng.standard_normal(int(n)))


def sim_gk(rng, n: int, p: GkParams) -> IID:
    """g-and-k sample by inversion of uniforms (via normal quantiles)."""
    rng = as_generator(rng)
    # Phi^{-1}(U) is a standard normal draw; skip the round trip through U.
    z = rng.standard_normal(int(n))
    return IID(_gk_from_z(z, p.A, p.B, p.g, p.k, p.c))


def sim_arch_many(rng, thetas, T: int, burn_in: int = BURN_IN) -> np.ndarray:
    """Simulate one ARCH(1) series per row of ``thetas = (alpha0, alpha1)``.

    Returns an array of shape ``(m, T)``.
    """
    rng = as_generator(rng)
    th = np.atleast_2d(np.asarray(thetas, dtype=float))
    a0, a1 = th[:, 0], th[:, 1]
    m = th.shape[0]
    eps = rng.standard_normal((T + burn_in, m))
    out = np.empty((T, m))
    # stationary variance a0 / (1 - a1); for a1 = 1 start at a0
    y_prev = np.sqrt(a0 / np.where(a1 < 1, 1.0 - a1, 1.0)) * rng.standard_normal(m)
    for t in range(T + burn_in):
        y_prev = np.sqrt(a0 + a1 * y_prev * y_prev) * eps[t]
        if t >= burn_in:
            out[t - burn_in] = y_prev
    return out.T


def sim_arch(rng, T: int, alpha0: float, alpha1: float, burn_in: int = BURN_IN) -> Series:
    """ARCH(1) series ``y_t = sigma_t eps_t``, ``sigma_t^2 = a0 + a1 y_{t-1}^2``."""
    _check_arch(alpha0, alpha1)
    return Series(sim_arch_many(rng, [[alpha0, alpha1]], int(T), burn_in)[0])


def sim_garch_many(rng, thetas, T: int, burn_in: int = BURN_IN) -> np.ndarray:
    """Simulate one GARCH(1,1) series per row of ``(alpha0, alpha1, beta1)``."""
    rng = as_generator(rng)
    th = np.atleast_2d(np.asarray(thetas, dtype=float))
    a0, a1, b1 = th[:, 0], th[:, 1], th[:, 2]
    m = th.shape[0]
    eps = rng.standard_normal((T + burn_in, m))
    out = np.empty((T, m))
    s2 = a0 / (1.0 - a1 - b1)
    y_prev = np.sqrt(s2) * rng.standard_normal(m)
    for t in range(T + burn_in):
        s2 = a0 + a1 * y_prev * y_prev + b1 * s2
        y_prev = np.sqrt(s2) * eps[t]
        if t >= burn_in:
            out[t - burn_in] = y_prev
    return out.T


def sim_garch(rng, T: int, alpha0: float, alpha1: float, beta1: float,
              burn_in: int = BURN_IN) -> Series:
    """GARCH(1,1) series started at the stationary variance."""
    _check_garch(alpha0, alpha1, beta1)
    return Series(sim_garch_many(rng, [[alpha0, alpha1, beta1]], int(T), burn_in)[0])


# ---------------------------------------------------------------------------
# Structured Kingman coalescent with stepwise mutation
# ---------------------------------------------------------------------------

def _epochs(scenario, phi):
    """Pool merges as ``(time, pool_a, pool_b)`` in chronological order."""
    if scenario == "A":
        theta, tau = phi
        return [(tau, 1, 2)]
    theta, tau1, tau2 = phi
    return [(tau1, 2, 3), (tau2, 1, 2)]


def _check_phi(scenario, phi):
    phi = tuple(float(x) for x in np.ravel(phi))
    want = 2 if scenario == "A" else 3
    if len(phi) != want:
        raise ValueError(f"scenario {scenario} takes {want} parameters")
    if not phi[0] > 0 or any(t < 0 for t in phi[1:]):
        raise DomainError("theta must be positive and divergence times nonnegative")
    if scenario == "B" and phi[1] > phi[2]:
        raise DomainError("scenario B requires tau1 <= tau2")
    return phi


def sim_coalescent_locus(rng, demes, scenario: str, phi) -> np.ndarray:
    """Allele states of one locus for genes sampled in ``demes``.

    Lineages coalesce pairwise at rate 1 inside each pool; pools merge at the
    divergence times; mutations hit each lineage at rate ``theta / 2`` and move
    the repeat count by +1 or -1 with equal probability.  The root carries
    allele 0.
    """
    phi = _check_phi(scenario, phi)
    theta = phi[0]
    demes = np.asarray(demes)
    n = demes.shape[0]
    parent = np.full(2 * n - 1, -1, dtype=np.int64)
    times = np.zeros(2 * n - 1)
    pools = {int(d): list(np.flatnonzero(demes == d)) for d in np.unique(demes)}
    merges = list(_epochs(scenario, phi))
    t = 0.0
    next_id = n
    while next_id < 2 * n - 1:
        end = merges[0][0] if merges else np.inf
        rates = {p: 0.5 * len(v) * (len(v) - 1) for p, v in pools.items()}
        total = sum(rates.values())
        wait = rng.exponential(1.0 / total) if total > 0 else np.inf
        if t + wait >= end:
            t = end
            _, a, b = merges.pop(0)
            pools[a] = pools.pop(a, []) + pools.pop(b, [])
            continue
        t += wait
        keys = list(rates)
        u = rng.random() * total
        acc = 0.0
        for pool in keys:
            acc += rates[pool]
            if u < acc:
                break
        lineages = pools[pool]
        k = len(lineages)
        i = int(rng.integers(k))
        j = int(rng.integers(k - 1))
        j += j >= i
        a_node, b_node = lineages[i], lineages[j]
        for idx in sorted((i, j), reverse=True):
            lineages.pop(idx)
        parent[a_node] = parent[b_node] = next_id
        times[next_id] = t
        lineages.append(next_id)
        next_id += 1

    root = 2 * n - 2
    lengths = np.where(parent >= 0, times[np.maximum(parent, 0)] - times, 0.0)
    n_mut = rng.poisson(0.5 * theta * lengths)
    steps = 2 * rng.binomial(n_mut, 0.5) - n_mut
    state = np.zeros(2 * n - 1, dtype=np.int64)
    for node in range(root - 1, -1, -1):
        state[node] = state[parent[node]] + steps[node]
    return state[:n]


def sim_coalescent(rng, spec: ScenarioSpec, phi) -> Microsat:
    """Simulate a microsatellite panel; locus ``k`` uses its own stream.

    A base seed is drawn from ``rng`` once; locus ``k`` then runs on
    ``rng_stream(base, k)``.
    """
    rng = as_generator(rng)
    phi = _check_phi(spec.scenario, phi)
    base = int(rng.integers(0, 2**63 - 1))
    demes = spec.deme_labels()
    alleles = np.stack([
        sim_coalescent_locus(rng_stream(base, k), demes, spec.scenario, phi)
        for k in range(spec.loci)
    ])
    return Microsat(alleles, np.broadcast_to(demes, alleles.shape), spec.scenario)
