"""Constraint providers: map ``(dataset, parameter)`` to a constraint matrix.

Each provider is a callable ``provider(data, theta) -> H`` returning the
``n x q`` matrix whose rows are ``h(y_i, theta)``; :meth:`batch` evaluates a
stack of parameter vectors at once for the samplers.  Parameters outside a
model's support raise :class:`~bcel.el.DomainError`.

The population-genetics provider lives in :mod:`bcel.popgen`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .data import IID, Series
from .el import DomainError

__all__ = [
    "ConstraintProvider",
    "GkParams",
    "normal_moments",
    "gk_quantile",
    "gk_percentile_constraints",
    "arch_residuals",
    "garch_score",
    "garch_loglik_terms",
    "NormalMoments",
    "GkPercentiles",
    "ArchResiduals",
    "GarchScore",
    "DEFAULT_GK_C",
    "DEFAULT_GK_PROBS",
]

DEFAULT_GK_C = 0.8
DEFAULT_GK_PROBS = (0.25, 0.5, 0.75)


class ConstraintProvider:
    """Base class.  Subclasses implement :meth:`__call__`.

    ``dim`` is the parameter dimension and ``n_constraints`` the number of
    columns of the returned matrix.
    """

    dim: int = 1
    n_constraints: int = 1

    def __call__(self, data, theta) -> np.ndarray:
        raise NotImplementedError

    def batch(self, data, thetas):
        """Evaluate every row of ``thetas``.

        Returns
        -------
        H : ndarray, shape (m, n, q)
            Constraint matrices; rows for invalid parameters are zero.
        valid : ndarray of bool, shape (m,)
            False where the parameter raised :class:`DomainError`.
        """
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        mats, valid = [], np.ones(len(thetas), dtype=bool)
        shape = None
        for i, th in enumerate(thetas):
            try:
                h = np.asarray(self(data, th), dtype=float)
                shape = h.shape
                mats.append(h)
            except DomainError:
                valid[i] = False
                mats.append(None)
        if shape is None:
            return np.zeros((len(thetas), 0, 0)), valid
        zero = np.zeros(shape)
        return np.stack([zero if h is None else h for h in mats]), valid


def _values(data) -> np.ndarray:
    if isinstance(data, (IID, Series)):
        return data.values
    return np.asarray(data, dtype=float).ravel()


# ---------------------------------------------------------------------------
# Normal mean with known unit variance
# ---------------------------------------------------------------------------

def normal_moments(y, theta: float, order: int = 1) -> np.ndarray:
    """Centered-moment constraints for a unit-variance normal mean.

    Columns are ``y - theta``, ``(y - theta)**2 - 1`` and ``(y - theta)**3``;
    the first ``order`` of them are returned.
    """
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    d = _values(y) - float(np.ravel(theta)[0])
    cols = [d, d * d - 1.0, d ** 3]
    return np.column_stack(cols[:order])


class NormalMoments(ConstraintProvider):
    def __init__(self, order: int = 1):
        if order not in (1, 2, 3):
            raise ValueError("order must be 1, 2 or 3")
        self.order = order
        self.dim = 1
        self.n_constraints = order

    def __call__(self, data, theta):
        return normal_moments(data, theta, self.order)

    def batch(self, data, thetas):
        thetas = np.asarray(thetas, dtype=float).reshape(len(thetas), -1)[:, 0]
        d = _values(data)[None, :] - thetas[:, None]
        cols = [d, d * d - 1.0, d ** 3][: self.order]
        return np.stack(cols, axis=-1), np.ones(len(thetas), dtype=bool)

    def __repr__(self):
        return f"NormalMoments(order={self.order})"


# ---------------------------------------------------------------------------
# g-and-k quantile distribution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GkParams:
    """Location ``A``, scale ``B > 0``, skewness ``g``, kurtosis ``k > -1/2``."""

    A: float
    B: float
    g: float
    k: float
    c: float = DEFAULT_GK_C

    def __post_init__(self):
        if not self.B > 0:
            raise DomainError("g-and-k scale B must be positive")
        if not self.k > -0.5:
            raise DomainError("g-and-k kurtosis k must exceed -1/2")

    @classmethod
    def from_vector(cls, theta, c: float = DEFAULT_GK_C) -> "GkParams":
        A, B, g, k = np.asarray(theta, dtype=float).ravel()[:4]
        return cls(float(A), float(B), float(g), float(k), c)


def _gk_from_z(z, A, B, g, k, c):
    # (1 - e^{-gz}) / (1 + e^{-gz}) == tanh(gz / 2)
    return A + B * (1.0 + c * np.tanh(0.5 * g * z)) * (1.0 + z * z) ** k * z


def gk_quantile(r, p: GkParams):
    """g-and-k quantile function evaluated at probabilities ``r`` in (0, 1)."""
    r = np.asarray(r, dtype=float)
    if np.any((r <= 0) | (r >= 1)):
        raise ValueError("g-and-k quantile requires r in (0, 1)")
    out = _gk_from_z(ndtri(r), p.A, p.B, p.g, p.k, p.c)
    return float(out) if out.ndim == 0 else out


def gk_percentile_constraints(y, p: GkParams, probs=DEFAULT_GK_PROBS) -> np.ndarray:
    """Indicator estimating equations ``1{y_i <= Q(prob_j)} - prob_j``."""
    probs = np.asarray(probs, dtype=float)
    if probs.ndim != 1 or probs.size == 0 or np.any(np.diff(probs) <= 0):
        raise ValueError("probs must be a strictly increasing sequence")
    q = np.atleast_1d(gk_quantile(probs, p))
    y = _values(y)
    return (y[:, None] <= q[None, :]).astype(float) - probs[None, :]


class GkPercentiles(ConstraintProvider):
    """Provider for ``theta = (A, B, g, k)`` with a fixed asymmetry ``c``."""

    def __init__(self, probs=DEFAULT_GK_PROBS, c: float = DEFAULT_GK_C):
        self.probs = tuple(float(x) for x in probs)
        if any(b <= a for a, b in zip(self.probs, self.probs[1:])):
            raise ValueError("probs must be strictly increasing")
        self.c = float(c)
        self.dim = 4
        self.n_constraints = len(self.probs)

    def __call__(self, data, theta):
        return gk_percentile_constraints(data, GkParams.from_vector(theta, self.c), self.probs)

    def batch(self, data, thetas):
        th = np.atleast_2d(np.asarray(thetas, dtype=float))
        A, B, g, k = (th[:, j:j + 1] for j in range(4))
        valid = (B[:, 0] > 0) & (k[:, 0] > -0.5)
        probs = np.asarray(self.probs)
        z = ndtri(probs)[None, :]
        with np.errstate(invalid="ignore", over="ignore"):
            q = _gk_from_z(z, A, B, g, np.where(valid[:, None], k, 0.0), self.c)
        y = _values(data)
        H = (y[None, :, None] <= q[:, None, :]).astype(float) - probs
        H[~valid] = 0.0
        return H, valid

    def __repr__(self):
        return f"GkPercentiles(probs={self.probs}, c={self.c})"


# ---------------------------------------------------------------------------
# ARCH(1) and GARCH(1,1)
# ---------------------------------------------------------------------------

ARCH_VARIANTS = ("moments", "correlations", "squared")


def _check_arch(alpha0, alpha1):
    if not (alpha0 > 0 and alpha1 >= 0 and alpha0 + alpha1 <= 1):
        raise DomainError("ARCH(1) parameters must satisfy a0 > 0, a1 >= 0, a0 + a1 <= 1")


def arch_residuals(y, alpha0: float, alpha1: float, variant: str = "moments") -> np.ndarray:
    """Constraints on the innovations ``eps_t = y_t / sigma_t`` of an ARCH(1).

    ``sigma_t**2 = alpha0 + alpha1 * y_{t-1}**2`` for ``t >= 2``.

    * ``moments``: ``(eps, eps**2 - 1, eps**3)``, one row per ``t >= 2``.
    * ``correlations``: ``(eps_t**2 - 1, eps_t * eps_{t-1}, eps_t * y_{t-1})``,
      one row per ``t >= 3`` (``eps_1`` does not exist).
    * ``squared``: ``u_t = eps_t**2 - 1`` with ``(u_t, u_t u_{t-1},
      u_t y_{t-1}**2)``, rows ``t >= 3``.  The two cross columns of
      ``correlations`` have mean zero at every parameter value, so only the
      variance column identifies ``(alpha0, alpha1)``; the squared products
      do not share that blind spot.
    """
    if variant not in ARCH_VARIANTS:
        raise ValueError(f"variant must be one of {ARCH_VARIANTS}")
    _check_arch(alpha0, alpha1)
    y = _values(y)
    if y.size < 3:
        raise ValueError("series too short")
    ylag = y[:-1]
    eps = y[1:] / np.sqrt(alpha0 + alpha1 * ylag * ylag)
    if variant == "moments":
        return np.column_stack([eps, eps * eps - 1.0, eps ** 3])
    e, e_prev = eps[1:], eps[:-1]
    if variant == "squared":
        u, u_prev = e * e - 1.0, e_prev * e_prev - 1.0
        return np.column_stack([u, u * u_prev, u * ylag[1:] ** 2])
    return np.column_stack([e * e - 1.0, e * e_prev, e * ylag[1:]])


class ArchResiduals(ConstraintProvider):
    """Provider for ``theta = (alpha0, alpha1)``."""

    def __init__(self, variant: str = "correlations"):
        if variant not in ARCH_VARIANTS:
            raise ValueError(f"variant must be one of {ARCH_VARIANTS}")
        self.variant = variant
        self.dim = 2
        self.n_constraints = 3

    def __call__(self, data, theta):
        a0, a1 = np.asarray(theta, dtype=float).ravel()[:2]
        return arch_residuals(data, a0, a1, self.variant)

    def batch(self, data, thetas):
        th = np.atleast_2d(np.asarray(thetas, dtype=float))
        a0, a1 = th[:, 0], th[:, 1]
        valid = (a0 > 0) & (a1 >= 0) & (a0 + a1 <= 1)
        a0 = np.where(valid, a0, 1.0)[:, None]
        a1 = np.where(valid, a1, 0.0)[:, None]
        y = _values(data)
        ylag = y[:-1]
        eps = y[1:] / np.sqrt(a0 + a1 * ylag * ylag)
        if self.variant == "moments":
            H = np.stack([eps, eps * eps - 1.0, eps ** 3], axis=-1)
        elif self.variant == "squared":
            e, e_prev = eps[:, 1:], eps[:, :-1]
            u, u_prev = e * e - 1.0, e_prev * e_prev - 1.0
            H = np.stack([u, u * u_prev, u * ylag[1:] ** 2], axis=-1)
        else:
            e, e_prev = eps[:, 1:], eps[:, :-1]
            H = np.stack([e * e - 1.0, e * e_prev, e * ylag[1:]], axis=-1)
        H[~valid] = 0.0
        return H, valid

    def __repr__(self):
        return f"ArchResiduals(variant={self.variant!r})"


def _check_garch(alpha0, alpha1, beta1):
    if not (alpha0 > 0 and alpha1 >= 0 and beta1 >= 0 and alpha1 + beta1 < 1):
        raise DomainError("GARCH(1,1) parameters must satisfy a0 > 0, a1, b1 >= 0, a1 + b1 < 1")


def _garch_paths(y, a0, a1, b1):
    """Variance recursion and its parameter gradient, vectorized over particles.

    ``a0, a1, b1`` have shape ``(m,)``; returns ``s2`` of shape ``(m, T)`` and
    ``grad`` of shape ``(m, T, 3)``.
    """
    T = y.shape[0]
    m = a0.shape[0]
    y2 = y * y
    gap = 1.0 - a1 - b1
    s2 = np.empty((m, T))
    grad = np.empty((m, T, 3))
    s2[:, 0] = a0 / gap
    grad[:, 0, 0] = 1.0 / gap
    grad[:, 0, 1] = a0 / gap**2
    grad[:, 0, 2] = a0 / gap**2
    for t in range(1, T):
        prev = s2[:, t - 1]
        s2[:, t] = a0 + a1 * y2[t - 1] + b1 * prev
        g_prev = grad[:, t - 1]
        grad[:, t, 0] = 1.0 + b1 * g_prev[:, 0]
        grad[:, t, 1] = y2[t - 1] + b1 * g_prev[:, 1]
        grad[:, t, 2] = prev + b1 * g_prev[:, 2]
    return s2, grad


def garch_loglik_terms(y, alpha0: float, alpha1: float, beta1: float) -> np.ndarray:
    """Per-observation Gaussian log-likelihood of a GARCH(1,1), started at
    the stationary variance."""
    _check_garch(alpha0, alpha1, beta1)
    y = _values(y)
    s2, _ = _garch_paths(y, *(np.array([v], dtype=float) for v in (alpha0, alpha1, beta1)))
    s2 = s2[0]
    return -0.5 * (np.log(2 * np.pi) + np.log(s2) + y * y / s2)


def garch_score(y, alpha0: float, alpha1: float, beta1: float) -> np.ndarray:
    """Per-observation Gaussian score of a GARCH(1,1), one row per ``t``.

    Row ``t`` is ``(y_t**2 / s2_t - 1) / (2 s2_t) * grad(s2_t)`` where the
    gradient with respect to ``(alpha0, alpha1, beta1)`` follows the
    variance recursion from the stationary start.
    """
    _check_garch(alpha0, alpha1, beta1)
    y = _values(y)
    s2, grad = _garch_paths(y, *(np.array([v], dtype=float) for v in (alpha0, alpha1, beta1)))
    s2, grad = s2[0], grad[0]
    return ((y * y / s2 - 1.0) / (2.0 * s2))[:, None] * grad


class GarchScore(ConstraintProvider):
    """Provider for ``theta = (alpha0, alpha1, beta1)``."""

    dim = 3
    n_constraints = 3

    def __call__(self, data, theta):
        a0, a1, b1 = np.asarray(theta, dtype=float).ravel()[:3]
        return garch_score(data, a0, a1, b1)

    def batch(self, data, thetas):
        th = np.atleast_2d(np.asarray(thetas, dtype=float))
        a0, a1, b1 = th[:, 0], th[:, 1], th[:, 2]
        valid = (a0 > 0) & (a1 >= 0) & (b1 >= 0) & (a1 + b1 < 1)
        a0 = np.where(valid, a0, 0.5)
        a1 = np.where(valid, a1, 0.0)
        b1 = np.where(valid, b1, 0.0)
        y = _values(data)
        s2, grad = _garch_paths(y, a0, a1, b1)
        H = ((y * y / s2 - 1.0) / (2.0 * s2))[..., None] * grad
        H[~valid] = 0.0
        return H, valid

    def __repr__(self):
        return "GarchScore()"
