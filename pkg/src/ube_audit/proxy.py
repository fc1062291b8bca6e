"""Potential indirect biases among significant (group, category) pairs.

A fourtuple takes two groups i < i' and two categories j < j' whose four
pairs are all individually significant, and asks whether the two
between-group difference vectors of selected-word means point the same
way:

    (A_ij-bar - A_i'j-bar) . (A_ij'-bar - A_i'j'-bar) > 0

A strictly positive product means a bias of group i toward category j
could be explained by (or could explain) its bias toward category j' --
a potential proxy. An exactly zero product does not qualify.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class FourTuple:
    i: int
    i2: int
    j: int
    j2: int
    product: float
    potential: bool


def _product(m_ij, m_i2j, m_ij2, m_i2j2) -> float:
    d1 = np.asarray(m_ij, dtype=np.float64) - np.asarray(m_i2j, dtype=np.float64)
    d2 = np.asarray(m_ij2, dtype=np.float64) - np.asarray(m_i2j2, dtype=np.float64)
    return float(np.dot(d1, d2))


def is_potential_indirect_bias(m_ij, m_i2j, m_ij2, m_i2j2) -> bool:
    """True when the fourtuple of selected-word means satisfies the strict test."""
    return _product(m_ij, m_i2j, m_ij2, m_i2j2) > 0.0


def iter_fourtuples(pair_means, significant) -> Iterator[FourTuple]:
    """Yield every fourtuple whose four (group, category) pairs are significant.

    pair_means: (n, m, d) array of selected-word mean vectors.
    significant: (n, m) boolean mask.
    Enumeration order is i < i2, j < j2, lexicographic.
    """
    means = np.asarray(pair_means, dtype=np.float64)
    sig = np.asarray(significant, dtype=bool)
    if means.ndim != 3 or sig.shape != means.shape[:2]:
        raise ConfigError("pair_means must be (n, m, d) with a matching (n, m) mask")
    n, m, _ = means.shape
    for i in range(n):
        for i2 in range(i + 1, n):
            for j in range(m):
                if not (sig[i, j] and sig[i2, j]):
                    continue
                for j2 in range(j + 1, m):
                    if not (sig[i, j2] and sig[i2, j2]):
                        continue
                    prod = _product(means[i, j], means[i2, j], means[i, j2], means[i2, j2])
                    yield FourTuple(i, i2, j, j2, prod, prod > 0.0)


def indirect_bias_rate(pair_means, significant) -> tuple[int, float | None]:
    """Count significant fourtuples and the fraction flagged as potential.

    Returns (count, fraction); fraction is None when no fourtuple exists,
    e.g. with fewer than two significant groups or categories.
    """
    total = 0
    positive = 0
    for ft in iter_fourtuples(pair_means, significant):
        total += 1
        positive += ft.potential
    return total, (positive / total if total else None)


def write_fourtuples_csv(path, fourtuples) -> int:
    """Write fourtuples with verdicts as CSV; returns the row count."""
    rows = 0
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write("i,i2,j,j2,product,potential\n")
        for ft in fourtuples:
            handle.write(f"{ft.i},{ft.i2},{ft.j},{ft.j2},{ft.product!r},"
                         f"{'true' if ft.potential else 'false'}\n")
            rows += 1
    return rows
