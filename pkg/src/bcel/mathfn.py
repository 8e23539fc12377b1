"""Special functions and weighted-statistics primitives.

Everything here is a pure function of its arguments.  Random draws go through
:class:`numpy.random.Generator` objects built on the counter-based Philox bit
generator, so a ``(seed, stream_id)`` pair always reproduces the same stream
regardless of how work is scheduled.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

__all__ = [
    "rng_stream",
    "as_generator",
    "bessel_i_scaled",
    "bessel_i_scaled_orders",
    "student_t3_logpdf",
    "student_t3_sample",
    "weighted_mean_cov",
    "weighted_quantile",
    "regularize_spd",
]

T3_DOF = 3.0

_RESCALE_AT = 1e250
_SERIES_BELOW = 1e-6


def rng_stream(seed: int, stream_id=0) -> np.random.Generator:
    """Return an independent, reproducible generator for ``(seed, stream_id)``.

    ``stream_id`` is a nonnegative integer or a tuple of them.  Distinct ids
    give statistically independent streams (they are distinct spawn keys of
    the same :class:`~numpy.random.SeedSequence`); ``k`` and ``(k,)`` name the
    same stream.
    """
    key = tuple(int(k) for k in np.atleast_1d(stream_id))
    ss = np.random.SeedSequence(int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


def as_generator(rng) -> np.random.Generator:
    """Coerce ``None``, an integer seed or a generator into a generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        return np.random.Generator(np.random.Philox())
    return rng_stream(int(rng))


# ---------------------------------------------------------------------------
# Modified Bessel functions of the first kind, integer order
# ---------------------------------------------------------------------------

def _miller_start(nmax: int, zmax: float) -> int:
    # e^{-z} I_m(z) decays like exp(-m^2 / 2z) beyond m ~ sqrt(z); start far
    # enough above both nmax and that bulk for the downward sweep to settle.
    return int(nmax + 40 + 12 * math.sqrt(zmax + 1.0))


def bessel_i_scaled_orders(nmax: int, z) -> np.ndarray:
    r"""Compute :math:`e^{-z} I_m(z)` for every order ``m = 0..nmax``.

    Uses Miller's downward recurrence
    :math:`I_{m-1} = (2m/z) I_m + I_{m+1}`, normalized with the identity
    :math:`I_0 + 2\sum_{m\ge1} I_m = e^z`.

    Parameters
    ----------
    nmax : int
        Largest order returned.
    z : float or array_like
        Nonnegative arguments.  Any shape; evaluated elementwise.

    Returns
    -------
    ndarray
        Shape ``(nmax + 1,) + np.shape(z)``.
    """
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)) or np.any(z < 0):
        raise ValueError("Bessel argument must be finite and nonnegative")
    nmax = int(nmax)
    if nmax < 0:
        raise ValueError("nmax must be nonnegative")

    tiny = z < _SERIES_BELOW
    zs = np.where(tiny, 1.0, z)
    start = _miller_start(nmax, float(zs.max(initial=0.0)))

    out = np.zeros((nmax + 1,) + z.shape)
    nxt = np.zeros(z.shape)          # I_{m+1}
    cur = np.full(z.shape, 1e-300)   # I_m, arbitrary scale
    total = np.zeros(z.shape)        # sum_{j>=m} I_j over j >= 1
    two_over_z = 2.0 / zs
    for m in range(start, 0, -1):
        if m <= nmax:
            out[m] = cur
        total += cur
        prev = m * two_over_z * cur + nxt
        nxt, cur = cur, prev
        big = np.abs(cur) > _RESCALE_AT
        if big.any():
            scale = np.where(big, 1.0 / _RESCALE_AT, 1.0)
            cur = cur * scale
            nxt = nxt * scale
            total = total * scale
            if m <= nmax + 1:
                out[max(m - 1, 0):] *= scale
    out[0] = cur
    norm = cur + 2.0 * total
    out /= norm
    if tiny.any():
        out[:, tiny] = _small_z_series(nmax, z[tiny])
    return out


def _small_z_series(nmax: int, z: np.ndarray) -> np.ndarray:
    # (z/2)^m / m! * (1 + (z/2)^2/(m+1) + ...) e^{-z}; two correction terms
    # are exact to double precision for z < _SERIES_BELOW.
    m = np.arange(nmax + 1)[:, None]
    half = z[None, :] / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        logterm = m * np.log(half) - gammaln(m + 1.0) - z[None, :]
    q = half * half
    corr = 1.0 + q / (m + 1) + q * q / (2.0 * (m + 1) * (m + 2))
    out = np.exp(logterm) * corr
    out[:, z == 0.0] = 0.0
    out[0, z == 0.0] = 1.0
    return out


def bessel_i_scaled(order: int, z: float) -> float:
    r"""Return :math:`e^{-z} I_{|m|}(z)` for integer ``order`` and ``z >= 0``.

    ``I_{-m} = I_m`` for integer orders, so the sign of ``order`` is ignored.
    """
    z = float(z)
    if not math.isfinite(z) or z < 0:
        raise ValueError(f"Bessel argument must be finite and >= 0, got {z}")
    m = abs(int(order))
    if m > 10**6:
        raise ValueError("order out of range (|order| <= 1e6)")
    if z == 0.0:
        return 1.0 if m == 0 else 0.0
    return float(bessel_i_scaled_orders(m, z)[m])


# ---------------------------------------------------------------------------
# Multivariate Student t with three degrees of freedom
# ---------------------------------------------------------------------------

def regularize_spd(sigma, rel_eps: float = 1e-8) -> np.ndarray:
    """Symmetrize ``sigma`` and add a ridge until it has a Cholesky factor.

    The ridge starts at ``rel_eps * trace / dim`` (or ``rel_eps`` for a zero
    trace) and grows tenfold until the factorization succeeds.
    """
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    if sigma.shape[0] != sigma.shape[1]:
        raise ValueError("covariance must be square")
    if not np.all(np.isfinite(sigma)):
        raise ValueError("covariance has non-finite entries")
    sigma = 0.5 * (sigma + sigma.T)
    try:
        np.linalg.cholesky(sigma)
        return sigma
    except np.linalg.LinAlgError:
        pass
    dim = sigma.shape[0]
    tr = np.trace(sigma) / dim
    eps = rel_eps * tr if tr > 0 else rel_eps
    eye = np.eye(dim)
    for _ in range(20):
        cand = sigma + eps * eye
        try:
            np.linalg.cholesky(cand)
            return cand
        except np.linalg.LinAlgError:
            eps *= 10.0
    raise np.linalg.LinAlgError("matrix could not be regularized to SPD")


def _chol(sigma) -> np.ndarray:
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        return np.linalg.cholesky(regularize_spd(sigma))


def student_t3_logpdf(x, m, sigma) -> np.ndarray | float:
    """Log density of the multivariate Student t with 3 degrees of freedom.

    Parameters
    ----------
    x : array_like
        A point of shape ``(d,)`` or a stack of points ``(n, d)``.
    m : array_like
        Location, shape ``(d,)``.
    sigma : array_like
        Scale matrix, shape ``(d, d)``.  Not the covariance: the covariance
        of a t3 variable is ``3 * sigma``.
    """
    m = np.atleast_1d(np.asarray(m, dtype=float))
    d = m.shape[0]
    x = np.asarray(x, dtype=float)
    single = x.ndim <= 1
    x = x.reshape(-1, d)
    L = _chol(sigma)
    if L.shape[0] != d:
        raise ValueError("dimension mismatch between m and sigma")
    u = np.linalg.solve(L, (x - m).T)
    maha = np.sum(u * u, axis=0)
    nu = T3_DOF
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    const = (gammaln(0.5 * (nu + d)) - gammaln(0.5 * nu)
             - 0.5 * d * math.log(nu * math.pi) - 0.5 * logdet)
    out = const - 0.5 * (nu + d) * np.log1p(maha / nu)
    return float(out[0]) if single else out


def student_t3_sample(rng, m, sigma, size: int | None = None) -> np.ndarray:
    """Draw from t3(m, sigma): ``m + L z / sqrt(w / 3)`` with ``w ~ chi2(3)``."""
    rng = as_generator(rng)
    m = np.atleast_1d(np.asarray(m, dtype=float))
    L = _chol(sigma)
    n = 1 if size is None else int(size)
    z = rng.standard_normal((n, m.shape[0]))
    w = rng.chisquare(T3_DOF, size=n)
    draws = m + (z @ L.T) / np.sqrt(w / T3_DOF)[:, None]
    return draws[0] if size is None else draws


# ---------------------------------------------------------------------------
# Weighted statistics
# ---------------------------------------------------------------------------

def _normalized(weights) -> np.ndarray:
    w = np.asarray(weights, dtype=float).ravel()
    if w.size == 0:
        raise ValueError("empty weight vector")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError("weights must be finite and nonnegative")
    total = w.sum()
    if total <= 0:
        raise ValueError("at least one weight must be positive")
    return w / total


def weighted_mean_cov(points, weights, rel_eps: float = 1e-8):
    """Weighted mean and covariance of a point cloud.

    The covariance uses the reliability-weights correction
    ``1 / (1 - sum(w**2))`` so uniform weights give the usual ``ddof=1``
    sample covariance.  A non-SPD result (e.g. a single dominant weight) is
    ridged by :func:`regularize_spd`.

    Returns
    -------
    mean : ndarray, shape (d,)
    cov : ndarray, shape (d, d)
    """
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    w = _normalized(weights)
    if w.shape[0] != x.shape[0]:
        raise ValueError("points and weights differ in length")
    mean = w @ x
    xc = x - mean
    denom = 1.0 - np.sum(w * w)
    if denom <= 1e-14:
        cov = np.zeros((x.shape[1], x.shape[1]))
    else:
        cov = (xc * w[:, None]).T @ xc / denom
    return mean, regularize_spd(cov, rel_eps)


def weighted_quantile(values, weights, q: float) -> float:
    """Smallest value whose cumulative normalized weight exceeds ``q``.

    Values are sorted ascending (stable, so ties keep input order).  With
    ``q = 1`` the largest value carrying positive weight is returned.  Two
    equal-weight points ``{0, 2}`` therefore have median 2.
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("empty input")
    w = _normalized(weights)
    if w.shape != v.shape:
        raise ValueError("values and weights differ in length")
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must lie in [0, 1]")
    order = np.argsort(v, kind="stable")
    v, w = v[order], w[order]
    cum = np.cumsum(w)
    idx = int(np.searchsorted(cum, q + 1e-12, side="left"))
    positive = np.flatnonzero(w > 0)
    idx = min(max(idx, positive[0]), positive[-1])
    return float(v[idx])
