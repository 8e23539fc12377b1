"""Empirical likelihood for moment constraints, solved through the convex dual.

For a constraint matrix ``H`` (row ``i`` holds ``h(y_i, theta)``) the
empirical likelihood maximizes ``sum(log p_i)`` over the simplex subject to
``sum_i p_i H[i] = 0``.  The optimal weights are
``p_i = 1 / (n (1 + lambda' H[i]))`` where ``lambda`` minimizes the convex
function ``-sum_i log*(1 + lambda' H[i])``; ``log*`` is Owen's
pseudo-logarithm, equal to ``log`` above ``1/n`` and continued quadratically
below so that Newton's method is defined everywhere.

:func:`el_solve_batch` solves a stack of independent problems at once; the
samplers use it to weight thousands of particles per call.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "CONVERGED",
    "HULL_VIOLATION",
    "MAX_ITERATIONS",
    "OUT_OF_SUPPORT",
    "SolverConfig",
    "ELSolution",
    "DomainError",
    "el_solve",
    "el_solve_batch",
    "el_log_likelihood",
    "hull_contains_origin",
]

CONVERGED = "converged"
HULL_VIOLATION = "hull-violation"
MAX_ITERATIONS = "max-iterations"
OUT_OF_SUPPORT = "out-of-support"

_ARMIJO = 1e-4
_MAX_HALVINGS = 50
_MASS_TOL = 1e-10
_POLISH = "polish"


class DomainError(ValueError):
    """A parameter lies outside the support accepted by a constraint provider."""


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances for :func:`el_solve`.

    ``grad_tol`` bounds ``max_j |sum_i H[i, j] / (1 + lambda' H[i])| / n``
    at convergence.  ``hull_tol`` is the geometric-mean value of ``n p_i``
    below which a diverging dual is declared a convex-hull violation.
    """

    grad_tol: float = 1e-8
    max_iter: int = 100
    hull_tol: float = 1e-10

    def __post_init__(self):
        if not (self.grad_tol > 0 and self.max_iter > 0 and self.hull_tol > 0):
            raise ValueError("solver tolerances must be positive")


@dataclass
class ELSolution:
    """Result of one empirical-likelihood solve.

    ``log_el`` is ``sum(log p_i)``, or ``-inf`` for a hull violation.
    ``history`` holds the dual objective after each accepted Newton step.
    """

    log_el: float
    lam: np.ndarray
    p: np.ndarray
    status: str
    n_iter: int = 0
    history: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.p.shape[0]

    @property
    def log_el_ratio(self) -> float:
        """``log_el + n log n``: the log EL ratio, always ``<= 0``."""
        if self.log_el == -math.inf:
            return -math.inf
        return self.log_el + self.n * math.log(self.n)

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED


def _pseudo_log(z, eps):
    """Owen's log*, its first and (negated) second derivative."""
    low = z < eps
    zs = np.where(low, eps, z)
    val = np.where(low, np.log(eps) - 1.5 + 2.0 * z / eps - 0.5 * (z / eps) ** 2,
                   np.log(zs))
    d1 = np.where(low, 2.0 / eps - z / eps**2, 1.0 / zs)
    nd2 = np.where(low, 1.0 / eps**2, 1.0 / zs**2)
    return val, d1, nd2


def _sign_precheck(H):
    """True where some column is strictly one-signed (0 is outside the hull)."""
    pos = np.all(H > 0, axis=1)
    neg = np.all(H < 0, axis=1)
    return np.any(pos | neg, axis=-1)


def hull_contains_origin(H) -> bool:
    """Exact check, by linear programming, that 0 is in the relative interior
    of the convex hull of the rows of ``H``.

    Maximizes the smallest weight ``t`` subject to ``p_i >= t``,
    ``sum p = 1``, ``H' p = 0``; the origin is interior iff ``t > 0``.
    """
    from scipy.optimize import linprog

    H = np.asarray(H, dtype=float)
    n, q = H.shape
    c = np.zeros(n + 1)
    c[-1] = -1.0
    a_eq = np.zeros((q + 1, n + 1))
    a_eq[:q, :n] = H.T
    a_eq[q, :n] = 1.0
    b_eq = np.zeros(q + 1)
    b_eq[q] = 1.0
    a_ub = np.hstack([-np.eye(n), np.ones((n, 1))])
    res = linprog(c, A_ub=a_ub, b_ub=np.zeros(n), A_eq=a_eq, b_eq=b_eq,
                  bounds=[(0, None)] * n + [(None, None)], method="highs")
    return bool(res.status == 0 and -res.fun > 1e-12)


def _validate(H) -> np.ndarray:
    H = np.asarray(H, dtype=float)
    if H.ndim == 1:
        H = H[:, None]
    if H.ndim != 2 or H.shape[0] < 1 or H.shape[1] < 1:
        raise ValueError("constraint matrix must be n x q with n, q >= 1")
    if not np.all(np.isfinite(H)):
        raise ValueError("constraint matrix has non-finite entries")
    return H


def _canonical_order(H):
    """Row order that depends only on the set of rows (lexicographic)."""
    return np.lexsort(H.T[::-1])


def _unpermute(sol, order):
    p = np.empty_like(sol.p)
    p[order] = sol.p
    sol.p = p
    return sol


def el_solve_batch(H, cfg: SolverConfig | None = None, *, exact_hull: bool = True,
                   record_history: bool = False):
    """Solve a stack of empirical-likelihood problems.

    Parameters
    ----------
    H : array_like, shape (m, n, q)
        ``m`` independent constraint matrices of common shape.
    cfg : SolverConfig, optional
    exact_hull : bool
        Resolve problems that exhaust ``max_iter`` with an LP hull test:
        infeasible ones are reported as hull violations.
    record_history : bool
        Keep the per-iteration dual objective of every problem.

    Returns
    -------
    list of ELSolution

    Rows are put in a canonical order before solving, so the result is
    exactly equivariant under row permutations.
    """
    cfg = cfg or SolverConfig()
    H = np.asarray(H, dtype=float)
    if H.ndim != 3:
        raise ValueError("batched constraint array must be m x n x q")
    if not np.all(np.isfinite(H)):
        raise ValueError("constraint matrix has non-finite entries")
    m, n, q = H.shape
    if n < 1 or q < 1:
        raise ValueError("constraint matrix must be n x q with n, q >= 1")
    orders = [_canonical_order(h) for h in H]
    H = np.stack([h[o] for h, o in zip(H, orders)]) if m else H

    eps = 1.0 / n
    grad_target = n * cfg.grad_tol
    floor = n * math.log(cfg.hull_tol)

    lam = np.zeros((m, q))
    status = np.full(m, "", dtype=object)
    n_iter = np.zeros(m, dtype=int)
    history = [[] for _ in range(m)]

    status[_sign_precheck(H)] = HULL_VIOLATION
    active = np.flatnonzero(status == "")

    # dual objective at lambda = 0 is zero for every problem
    fval = np.zeros(m)
    for it in range(cfg.max_iter + 1):
        if active.size == 0:
            break
        Ha = H[active]
        z = 1.0 + np.einsum("knq,kq->kn", Ha, lam[active])
        _, d1, nd2 = _pseudo_log(z, eps)
        grad = -np.einsum("kn,knq->kq", d1, Ha)
        ok_region = np.all(z >= eps, axis=1)
        mass_ok = np.abs(np.sum(1.0 / z, axis=1) / n - 1.0) <= _MASS_TOL
        ok_region &= mass_ok
        done = ok_region & (np.max(np.abs(grad), axis=1) <= grad_target)
        if it == cfg.max_iter:
            done_idx = active[done]
            status[done_idx] = CONVERGED
            status[active[~done]] = MAX_ITERATIONS
            break
        hess = np.einsum("kn,knq,knr->kqr", nd2, Ha, Ha)
        step = _newton_step(hess, grad)
        slope = np.einsum("kq,kq->k", grad, step)

        # problems already converged, or at machine precision
        stalled = slope > -1e-28 * np.maximum(1.0, np.abs(fval[active]))
        finished = done | (stalled & ok_region)
        status[active[finished]] = CONVERGED
        n_iter[active[finished]] = it

        keep = ~finished
        sub = active[keep]
        if sub.size == 0:
            active = sub
            break
        Hs, st, sl, f0 = Ha[keep], step[keep], slope[keep], fval[sub]
        t = np.ones(sub.size)
        accepted = np.zeros(sub.size, dtype=bool)
        fnew = f0.copy()
        for _ in range(_MAX_HALVINGS):
            todo = ~accepted
            if not todo.any():
                break
            cand = lam[sub[todo]] + t[todo, None] * st[todo]
            zc = 1.0 + np.einsum("knq,kq->kn", Hs[todo], cand)
            val, _, _ = _pseudo_log(zc, eps)
            fc = -val.sum(axis=1)
            good = fc <= f0[todo] + _ARMIJO * t[todo] * sl[todo]
            idx = np.flatnonzero(todo)
            accepted[idx[good]] = True
            fnew[idx[good]] = fc[good]
            t[idx[~good]] *= 0.5
        # no further decrease measurable: hand over to the polishing solver
        stuck = ~accepted | (fnew >= f0)
        status[sub[stuck]] = _POLISH
        moving = ~stuck
        moved = sub[moving]
        lam[moved] += t[moving, None] * st[moving]
        fval[moved] = fnew[moving]
        n_iter[sub] = it + 1
        if record_history:
            for k, f in zip(moved, fnew[moving]):
                history[k].append(float(f))
        # objective diverging to -inf: the origin is outside the hull
        diverging = moving & (fval[sub] < floor)
        status[sub[diverging]] = HULL_VIOLATION
        active = sub[moving & ~diverging]

    out = []
    for k in range(m):
        if status[k] == _POLISH:
            sol = _solve_one(H[k], cfg, record_history, lam0=lam[k], exact_hull=exact_hull)
            sol.n_iter += int(n_iter[k])
            sol.history = history[k] + sol.history
        else:
            sol = _finish(H[k], lam[k], status[k], int(n_iter[k]), history[k], exact_hull)
        out.append(_unpermute(sol, orders[k]))
    return out


def _newton_step(hess, grad):
    """Solve ``hess @ step = -grad`` after symmetric diagonal equilibration."""
    diag = np.diagonal(hess, axis1=-2, axis2=-1)
    d = 1.0 / np.sqrt(np.maximum(diag, 1e-300))
    hs = hess * d[..., :, None] * d[..., None, :]
    hs = hs + 1e-13 * np.eye(hess.shape[-1])
    return -d * np.linalg.solve(hs, (d * grad)[..., None])[..., 0]


def _finish(H, lam, status, n_iter, history, exact_hull) -> ELSolution:
    n = H.shape[0]
    if status == MAX_ITERATIONS and exact_hull and not hull_contains_origin(H):
        status = HULL_VIOLATION
    z = 1.0 + H @ lam
    if status == HULL_VIOLATION or np.any(z <= 0):
        return ELSolution(-math.inf, lam.copy(), np.zeros(n), HULL_VIOLATION,
                          n_iter, history)
    return ELSolution(float(-np.sum(np.log(n * z))), lam.copy(), 1.0 / (n * z),
                      status, n_iter, history)


def _dual(H, lam, eps) -> float:
    z = 1.0 + H @ lam
    if z.min() >= eps:
        return float(-np.log(z).sum())
    return float(-_pseudo_log(z, eps)[0].sum())


def _solve_one(H, cfg: SolverConfig, record_history: bool, lam0=None,
               exact_hull: bool = True) -> ELSolution:
    # Same iteration as el_solve_batch, without the bookkeeping for stacks.
    # Once the objective stops decreasing measurably, full Newton steps are
    # taken for as long as they shrink the gradient.
    n, q = H.shape
    history: list = []
    if lam0 is None:
        lam = np.zeros(q)
        if _sign_precheck(H[None])[0]:
            return _finish(H, lam, HULL_VIOLATION, 0, history, False)
    else:
        lam = np.array(lam0, dtype=float)
    eps = 1.0 / n
    grad_target = n * cfg.grad_tol
    floor = n * math.log(cfg.hull_tol)
    f = _dual(H, lam, eps)
    polishing = False
    gnorm_prev = math.inf
    status = MAX_ITERATIONS
    it = 0
    for it in range(cfg.max_iter + 1):
        z = 1.0 + H @ lam
        inside = z.min() >= eps
        if inside:
            d1 = 1.0 / z
            nd2 = d1 * d1
            ok = abs(d1.sum() / n - 1.0) <= _MASS_TOL
        else:
            _, d1, nd2 = _pseudo_log(z, eps)
            ok = False
        grad = -(d1 @ H)
        gnorm = float(np.max(np.abs(grad)))
        if ok and gnorm <= grad_target:
            status = CONVERGED
            break
        if polishing and not gnorm < gnorm_prev:
            status = CONVERGED if ok else MAX_ITERATIONS
            break
        if it == cfg.max_iter:
            break
        gnorm_prev = gnorm
        hess = (H * nd2[:, None]).T @ H
        step = _newton_step(hess, grad)
        if polishing:
            lam_try = lam + step
            if inside and (1.0 + H @ lam_try).min() >= eps:
                lam = lam_try
                continue
            status = CONVERGED if ok else MAX_ITERATIONS
            break
        slope = grad @ step
        t = 1.0
        fc = math.inf
        for _ in range(_MAX_HALVINGS):
            zc = 1.0 + H @ (lam + t * step)
            if zc.min() >= eps:
                fc = -np.log(zc).sum()
            else:
                fc = -_pseudo_log(zc, eps)[0].sum()
            if fc <= f + _ARMIJO * t * slope:
                break
            t *= 0.5
        else:
            fc = math.inf
        if not fc < f:
            if inside:
                polishing = True
                gnorm_prev = math.inf
                continue
            break
        lam = lam + t * step
        f = float(fc)
        if record_history:
            history.append(f)
        if f < floor:
            status = HULL_VIOLATION
            break
    return _finish(H, lam, status, it, history, exact_hull)


def el_solve(H, cfg: SolverConfig | None = None, *, record_history: bool = False) -> ELSolution:
    """Empirical likelihood of one constraint matrix ``H`` (n x q).

    Examples
    --------
    >>> sol = el_solve([[-0.25], [0.75]])
    >>> sol.p
    array([0.75, 0.25])

    Rows are solved in a canonical order, so permuting them permutes ``p``
    and leaves ``log_el`` bit for bit unchanged.
    """
    H = _validate(H)
    order = _canonical_order(H)
    return _unpermute(_solve_one(H[order], cfg or SolverConfig(), record_history), order)


def el_log_likelihood(dataset, theta, provider, cfg: SolverConfig | None = None,
                      *, return_status: bool = False):
    """Log empirical likelihood of ``theta`` under ``provider``'s constraints.

    A provider :class:`DomainError` (``theta`` outside the model support)
    yields ``-inf`` with status ``"out-of-support"``; a hull violation yields
    ``-inf`` with status ``"hull-violation"``.
    """
    try:
        H = provider(dataset, theta)
    except DomainError:
        return (-math.inf, OUT_OF_SUPPORT) if return_status else -math.inf
    sol = el_solve(H, cfg)
    return (sol.log_el, sol.status) if return_status else sol.log_el
