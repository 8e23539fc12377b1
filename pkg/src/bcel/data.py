"""Dataset containers and their plain-text file formats.

Three kinds of data are handled:

* :class:`IID` -- an iid real sample,
* :class:`Series` -- a time-ordered real series,
* :class:`Microsat` -- a panel of microsatellite loci, every gene carrying an
  integer allele state and the label (1, 2 or 3) of the deme it was sampled in.

Real-valued data are stored one value per line.  A microsatellite panel is
stored as a header line ``K n_genes scenario`` followed by one line per locus
of whitespace-separated ``allele:deme`` pairs.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "IID",
    "Series",
    "Microsat",
    "SCENARIO_DEMES",
    "write_values",
    "read_values",
    "write_microsat",
    "read_microsat",
    "load_dataset",
    "save_dataset",
]

SCENARIO_DEMES = {"A": 2, "B": 3}


def _as_real_vector(values) -> np.ndarray:
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("dataset must be non-empty")
    if not np.all(np.isfinite(v)):
        raise ValueError("dataset contains non-finite values")
    return v


@dataclass(frozen=True, eq=False)
class IID:
    """An iid real sample."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _as_real_vector(self.values))

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class Series:
    """A real time series, oldest observation first."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _as_real_vector(self.values))

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class Microsat:
    """Microsatellite panel: ``alleles[k, i]`` is gene ``i`` at locus ``k``.

    ``demes`` has the same shape and holds labels in ``1..n_demes``.  Only
    allele differences enter the likelihood, so states are relative to an
    arbitrary origin.
    """

    alleles: np.ndarray
    demes: np.ndarray
    scenario: str = "A"

    def __post_init__(self):
        alleles = np.asarray(self.alleles)
        demes = np.asarray(self.demes)
        if demes.ndim == 1:
            demes = np.broadcast_to(demes, alleles.shape)
        if alleles.ndim != 2 or alleles.size == 0:
            raise ValueError("alleles must be a non-empty K x n_genes array")
        if demes.shape != alleles.shape:
            raise ValueError("demes and alleles differ in shape")
        if not np.array_equal(alleles, np.round(alleles)):
            raise ValueError("allele states must be integers")
        if self.scenario not in SCENARIO_DEMES:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        n_demes = SCENARIO_DEMES[self.scenario]
        if demes.min() < 1 or demes.max() > n_demes:
            raise ValueError(f"deme labels must lie in 1..{n_demes} for scenario {self.scenario}")
        object.__setattr__(self, "alleles", alleles.astype(np.int64))
        object.__setattr__(self, "demes", np.array(demes, dtype=np.int64))

    @property
    def n_loci(self) -> int:
        return self.alleles.shape[0]

    @property
    def n_genes(self) -> int:
        return self.alleles.shape[1]

    def __len__(self):
        return self.n_loci


def write_values(path, values) -> None:
    """Write one value per line with round-trip precision."""
    v = np.asarray(values, dtype=float).ravel()
    Path(path).write_text("".join(f"{x!r}\n" for x in v.tolist()))


def read_values(path) -> np.ndarray:
    lines = Path(path).read_text().split()
    return np.array([float(s) for s in lines])


def write_microsat(path, data: Microsat) -> None:
    lines = [f"{data.n_loci} {data.n_genes} {data.scenario}"]
    for a_row, d_row in zip(data.alleles, data.demes):
        lines.append(" ".join(f"{a}:{d}" for a, d in zip(a_row.tolist(), d_row.tolist())))
    Path(path).write_text("\n".join(lines) + "\n")


def read_microsat(path) -> Microsat:
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not rows or len(rows[0]) != 3:
        raise ValueError("microsat file must start with 'K n_genes scenario'")
    k, n_genes, scenario = int(rows[0][0]), int(rows[0][1]), rows[0][2]
    body = rows[1:]
    if len(body) != k:
        raise ValueError(f"header declares {k} loci, found {len(body)}")
    alleles = np.empty((k, n_genes), dtype=np.int64)
    demes = np.empty((k, n_genes), dtype=np.int64)
    for i, row in enumerate(body):
        if len(row) != n_genes:
            raise ValueError(f"locus {i + 1}: expected {n_genes} genes, found {len(row)}")
        for j, tok in enumerate(row):
            a, _, d = tok.partition(":")
            if not d:
                raise ValueError(f"locus {i + 1}: malformed entry {tok!r}")
            alleles[i, j] = int(a)
            demes[i, j] = int(d)
    return Microsat(alleles, demes, scenario)


def save_dataset(path, data) -> None:
    if isinstance(data, Microsat):
        write_microsat(path, data)
    else:
        write_values(path, data.values)


def load_dataset(path, kind: str):
    """Read a dataset file; ``kind`` is ``"iid"``, ``"series"`` or ``"microsat"``."""
    if kind == "microsat":
        return read_microsat(path)
    if kind == "iid":
        return IID(read_values(path))
    if kind == "series":
        return Series(read_values(path))
    raise ValueError(f"unknown dataset kind {kind!r}")
