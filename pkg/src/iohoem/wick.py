"""Pairing combinatorics for correlations of Gaussian environmental fields.

A correlation of ``m`` fields with the environment splits into terms where
``2k`` of the fields are contracted among themselves (a free-field moment)
and the remaining ``m - 2k`` are each contracted with a coupling operator.
The latter are what the extended hierarchy propagates; this module does the
bookkeeping that recombines them.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

MAX_FIELDS = 16


def double_factorial(n: int) -> int:
    """``n!!`` with the convention ``(-1)!! = 0!! = 1``."""
    if n < -1:
        raise ValueError("double factorial undefined below -1")
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def enumerate_subsets(m: int, k: int) -> list[tuple[int, ...]]:
    """All subsets of ``{1..m}`` with ``2k`` elements, sorted lexicographically."""
    if m < 0 or k < 0 or 2 * k > m:
        raise ValueError(f"need 0 <= 2k <= m, got m={m}, k={k}")
    if m > MAX_FIELDS:
        raise ValueError(f"at most {MAX_FIELDS} fields are supported")
    return list(itertools.combinations(range(1, m + 1), 2 * k))


def perfect_matchings(labels) -> list[tuple[tuple, ...]]:
    """All ways of splitting ``labels`` into unordered pairs.

    Pairs keep the order of ``labels``; matchings are listed in a
    deterministic order.
    """
    labels = tuple(labels)
    if len(labels) % 2:
        raise ValueError("perfect matchings need an even number of labels")
    if not labels:
        return [()]
    first, rest = labels[0], labels[1:]
    out = []
    for i, partner in enumerate(rest):
        remaining = rest[:i] + rest[i + 1:]
        for sub in perfect_matchings(remaining):
            out.append(((first, partner),) + sub)
    return out


def contraction_count_identity(m: int, n: int) -> tuple[int, int]:
    """Both sides of the count of full contractions of ``m`` fields and ``n``
    coupling operators.

    The left side is ``(m + n - 1)!!``. The right side groups contractions by
    the number ``2k`` of fields paired among themselves: choose them, pair
    them, attach the other ``m - 2k`` fields to distinct coupling operators,
    then pair the leftover coupling operators.
    """
    if m < 0 or n < 0:
        raise ValueError("counts must be non-negative")
    if (m + n) % 2:
        raise ValueError("m + n must be even")
    lhs = double_factorial(m + n - 1)
    rhs = 0
    for k in range(max(0, (m - n) // 2), m // 2 + 1):
        free = n - m + 2 * k
        pair_fields = math.factorial(2 * k) // (2 ** k * math.factorial(k))
        field_to_coupling = math.factorial(n) // math.factorial(free)
        coupling_pairs = math.factorial(free) // (2 ** (free // 2) * math.factorial(free // 2))
        rhs += math.comb(m, 2 * k) * pair_fields * field_to_coupling * coupling_pairs
    return lhs, rhs


@dataclass
class FieldSet:
    """Ordered field labels and their free two-point correlations.

    ``pairings[(i, j)]`` holds the time-ordered free correlation of fields
    ``i`` and ``j``; either key order is accepted on lookup. Missing pairs
    are treated as zero.
    """

    labels: tuple
    pairings: dict = field(default_factory=dict)

    def __post_init__(self):
        self.labels = tuple(self.labels)
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("field labels must be distinct")
        if len(self.labels) > MAX_FIELDS:
            raise ValueError(f"at most {MAX_FIELDS} fields are supported")

    @property
    def m(self) -> int:
        return len(self.labels)

    def pair(self, i, j) -> complex:
        if (i, j) in self.pairings:
            return complex(self.pairings[(i, j)])
        return complex(self.pairings.get((j, i), 0.0))

    def moment(self, subset) -> complex:
        """Free expectation of the product of the fields in ``subset``."""
        total = 0j
        for matching in perfect_matchings(subset):
            prod = 1 + 0j
            for i, j in matching:
                prod *= self.pair(i, j)
            total += prod
        return total


@dataclass(frozen=True)
class SeriesTerm:
    k: int
    subset: tuple
    complement: tuple
    coefficient: complex


def series_terms(fs: FieldSet) -> list[SeriesTerm]:
    """Terms of the reconstruction sum, ordered by ``k`` then subset."""
    m = fs.m
    terms = []
    for k in range(m // 2 + 1):
        for positions in enumerate_subsets(m, k):
            subset = tuple(fs.labels[p - 1] for p in positions)
            complement = tuple(lab for lab in fs.labels if lab not in subset)
            coeff = fs.moment(subset) * (-1j) ** (m - 2 * k)
            terms.append(SeriesTerm(k, subset, complement, coeff))
    return terms


def assemble_series(fs: FieldSet, complement_matrices: dict) -> np.ndarray:
    """Combine free moments with hierarchy outputs.

    ``complement_matrices`` maps each complement (a tuple of labels in field
    order, ``()`` for the bare reduced state) to the matrix obtained by
    contracting exactly those fields with the environment.
    """
    total = None
    for term in series_terms(fs):
        if term.complement not in complement_matrices:
            raise KeyError(f"missing matrix for complement {term.complement}")
        contrib = term.coefficient * np.asarray(complement_matrices[term.complement], dtype=complex)
        total = contrib if total is None else total + contrib
    return total
