"""Composable priors.

A :class:`PriorSpec` is a list of independent blocks.  Samplers work in the
blocks' *working* coordinates (for a ``log10`` box these are the base-10
logarithms) and hand :meth:`PriorSpec.to_model` output to the constraint
providers.  Densities are normalized in working coordinates, which the
adaptive sampler needs when it mixes the prior with Student-t proposals.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from .mathfn import as_generator, rng_stream

__all__ = ["UniformBox", "Exponential", "Dirichlet", "PriorSpec"]


class UniformBox:
    """Uniform on ``[lo, hi]`` per coordinate, in identity or log10 scale."""

    def __init__(self, lo, hi, transform: str = "identity"):
        self.lo = np.atleast_1d(np.asarray(lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if self.lo.shape != self.hi.shape or np.any(self.hi <= self.lo):
            raise ValueError("UniformBox needs lo < hi of equal length")
        if transform not in ("identity", "log10"):
            raise ValueError("transform must be 'identity' or 'log10'")
        self.transform = transform
        self.dim = self.lo.shape[0]
        self._lognorm = -float(np.sum(np.log(self.hi - self.lo)))

    def sample(self, rng, n):
        return rng.uniform(self.lo, self.hi, size=(n, self.dim))

    def logpdf(self, x):
        inside = np.all((x >= self.lo) & (x <= self.hi), axis=1)
        return np.where(inside, self._lognorm, -np.inf)

    def to_model(self, x):
        return 10.0 ** x if self.transform == "log10" else x

    def to_working(self, v):
        return np.log10(v) if self.transform == "log10" else v

    def to_config(self):
        return {"type": "uniform", "lo": self.lo.tolist(), "hi": self.hi.tolist(),
                "transform": self.transform}


class Exponential:
    """Exponential distribution with the given rate (one coordinate)."""

    dim = 1

    def __init__(self, rate: float = 1.0):
        if not rate > 0:
            raise ValueError("rate must be positive")
        self.rate = float(rate)

    def sample(self, rng, n):
        return rng.exponential(1.0 / self.rate, size=(n, 1))

    def logpdf(self, x):
        x = x[:, 0]
        with np.errstate(invalid="ignore"):
            return np.where(x >= 0, math.log(self.rate) - self.rate * x, -np.inf)

    def to_model(self, x):
        return x

    to_working = to_model

    def to_config(self):
        return {"type": "exponential", "rate": self.rate}


class Dirichlet:
    """Dirichlet on the simplex, represented by its first ``d - 1`` coordinates."""

    def __init__(self, alpha):
        self.alpha = np.asarray(alpha, dtype=float)
        if self.alpha.ndim != 1 or self.alpha.size < 2 or np.any(self.alpha <= 0):
            raise ValueError("Dirichlet needs at least two positive concentrations")
        self.dim = self.alpha.size - 1
        self._lognorm = float(gammaln(self.alpha.sum()) - gammaln(self.alpha).sum())

    def sample(self, rng, n):
        return rng.dirichlet(self.alpha, size=n)[:, :-1]

    def logpdf(self, x):
        last = 1.0 - x.sum(axis=1)
        full = np.column_stack([x, last])
        inside = np.all(full > 0, axis=1)
        safe = np.where(inside[:, None], full, 1.0)
        return np.where(inside, self._lognorm + np.log(safe) @ (self.alpha - 1.0), -np.inf)

    def to_model(self, x):
        return x

    to_working = to_model

    def to_config(self):
        return {"type": "dirichlet", "alpha": self.alpha.tolist()}


_BLOCKS = {"uniform": UniformBox, "exponential": Exponential, "dirichlet": Dirichlet}


class PriorSpec:
    """Product of independent blocks, optionally restricted by orderings.

    Parameters
    ----------
    blocks : list
        :class:`UniformBox`, :class:`Exponential` or :class:`Dirichlet`.
    names : sequence of str, optional
        Model-scale parameter names.
    ordered : sequence of (i, j), optional
        Require ``model[i] <= model[j]``; sampling is by rejection and the
        density is renormalized by the retained mass.
    support_mass : float, optional
        Prior mass of the ordered region.  Estimated from ``2**16`` draws with a
        fixed seed when omitted.
    """

    def __init__(self, blocks, names=None, ordered=(), support_mass: float | None = None):
        self.blocks = list(blocks)
        self.dim = sum(b.dim for b in self.blocks)
        self.names = tuple(names) if names is not None else tuple(
            f"theta_{i + 1}" for i in range(self.dim))
        if len(self.names) != self.dim:
            raise ValueError("one name per parameter required")
        self.ordered = tuple((int(i), int(j)) for i, j in ordered)
        if self.ordered:
            if support_mass is None:
                draws = self._sample_free(rng_stream(0x5EED, 0), 2**16)
                support_mass = float(np.mean(self._in_support(self.to_model(draws))))
            if not support_mass > 0:
                raise ValueError("ordering constraints leave no prior mass")
            self.support_mass = float(support_mass)
        else:
            self.support_mass = 1.0
        self._log_mass = math.log(self.support_mass)

    @classmethod
    def from_config(cls, cfg: dict) -> "PriorSpec":
        blocks = []
        for b in cfg["blocks"]:
            b = dict(b)
            kind = b.pop("type")
            blocks.append(_BLOCKS[kind](**b))
        return cls(blocks, names=cfg.get("names"), ordered=cfg.get("ordered", ()),
                   support_mass=cfg.get("support_mass"))

    def to_config(self) -> dict:
        out = {"blocks": [b.to_config() for b in self.blocks], "names": list(self.names)}
        if self.ordered:
            out["ordered"] = [list(p) for p in self.ordered]
            out["support_mass"] = self.support_mass
        return out

    def _split(self, x):
        out, lo = [], 0
        for b in self.blocks:
            out.append(x[:, lo:lo + b.dim])
            lo += b.dim
        return out

    def _sample_free(self, rng, n):
        return np.hstack([b.sample(rng, n) for b in self.blocks])

    def _in_support(self, model):
        ok = np.ones(model.shape[0], dtype=bool)
        for i, j in self.ordered:
            ok &= model[:, i] <= model[:, j]
        return ok

    def sample(self, rng, n: int) -> np.ndarray:
        """``n`` draws in working coordinates, shape ``(n, dim)``."""
        rng = as_generator(rng)
        n = int(n)
        if not self.ordered:
            return self._sample_free(rng, n)
        kept, have = [], 0
        while have < n:
            x = self._sample_free(rng, max(2 * (n - have), 16))
            x = x[self._in_support(self.to_model(x))]
            kept.append(x)
            have += x.shape[0]
        return np.vstack(kept)[:n]

    def logpdf(self, x) -> np.ndarray:
        """Normalized log density in working coordinates; ``-inf`` off support."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.zeros(x.shape[0])
        for b, xb in zip(self.blocks, self._split(x)):
            out += b.logpdf(xb)
        if self.ordered:
            ok = np.isfinite(out)
            ok[ok] = self._in_support(self.to_model(x[ok]))
            out = np.where(ok, out - self._log_mass, -np.inf)
        return out

    def to_model(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.hstack([b.to_model(xb) for b, xb in zip(self.blocks, self._split(x))])

    def to_working(self, params) -> np.ndarray:
        """Inverse of :meth:`to_model`."""
        v = np.atleast_2d(np.asarray(params, dtype=float))
        return np.hstack([b.to_working(vb) for b, vb in zip(self.blocks, self._split(v))])

    def __repr__(self):
        return f"PriorSpec({self.to_config()!r})"
