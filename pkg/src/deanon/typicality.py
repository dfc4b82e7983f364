"""Strong typicality for binary sequences.

A sequence ``x`` of length ``n`` is epsilon-typical for Bern(q) when both of
its empirical symbol frequencies lie within ``epsilon`` of the source
probabilities: ``|N(a|x)/n - P(a)| <= epsilon``.  Pairs are jointly typical
when all four empirical pair frequencies are within ``epsilon`` of the joint
pmf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

# absorbs rounding in N/n - P so boundary cases like |1/4 - 1/2| <= 1/4 hold
TOL = 1e-12

MAX_CENSUS_LENGTH = 24


@dataclass(frozen=True)
class TypicalityParams:
    epsilon: float
    block_length: int

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")
        if int(self.block_length) < 1:
            raise ParameterError(f"block length must be >= 1, got {self.block_length}")


def _as_bits(x) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 1 or x.size == 0:
        raise ParameterError("expected a non-empty 1-d binary sequence")
    return x.astype(bool)


def is_typical(x, q: float, epsilon: float) -> bool:
    x = _as_bits(x)
    freq1 = np.count_nonzero(x) / x.size
    # |freq0 - (1-q)| == |freq1 - q|, so one check covers both symbols
    return abs(freq1 - q) <= epsilon + TOL


def pair_counts(u, y) -> np.ndarray:
    """``C[a, b]`` = number of positions with ``u = a`` and ``y = b``."""
    u = _as_bits(u)
    y = _as_bits(y)
    if u.size != y.size:
        raise ParameterError(f"length mismatch: {u.size} vs {y.size}")
    c11 = int(np.count_nonzero(u & y))
    c10 = int(np.count_nonzero(u & ~y))
    c01 = int(np.count_nonzero(~u & y))
    return np.array([[u.size - c11 - c10 - c01, c01], [c10, c11]])


def is_conditionally_typical(u, y, joint, epsilon: float) -> bool:
    """Whether ``(u, y)`` is jointly typical for the 2x2 pmf ``joint[a, b]``."""
    counts = pair_counts(u, y)
    n = counts.sum()
    joint = np.asarray(joint, dtype=float)
    return bool(np.all(np.abs(counts / n - joint) <= epsilon + TOL))


def typical_rows(rows: np.ndarray, y, joint, epsilon: float) -> np.ndarray:
    """Mask of the rows of ``rows`` (users x positions) jointly typical with ``y``.

    Vectorized form of :func:`is_conditionally_typical` used for candidate sets.
    """
    rows = np.asarray(rows, dtype=bool)
    y = _as_bits(y)
    if rows.ndim != 2 or rows.shape[1] != y.size:
        raise ParameterError("rows must be a (users, len(y)) matrix")
    n = y.size
    w = int(np.count_nonzero(y))
    c11 = rows[:, y].sum(axis=1)
    c10 = rows[:, ~y].sum(axis=1)
    c01 = w - c11
    c00 = (n - w) - c10
    joint = np.asarray(joint, dtype=float)
    ok = np.ones(rows.shape[0], dtype=bool)
    for c, target in ((c00, joint[0, 0]), (c01, joint[0, 1]),
                      (c10, joint[1, 0]), (c11, joint[1, 1])):
        ok &= np.abs(c / n - target) <= epsilon + TOL
    return ok


def typical_set_census(n: int, q: float, epsilon: float,
                       max_length: int = MAX_CENSUS_LENGTH):
    """Exact ``(|A|, P(A))`` for the epsilon-typical set of Bern(q) sequences.

    Sequences of equal weight are either all typical or none, so the census
    costs ``n + 1`` binomial terms.
    """
    if not 1 <= n <= max_length:
        raise ParameterError(f"census length must be in [1,{max_length}], got {n}")
    if not epsilon > 0:
        raise ParameterError("epsilon must be positive")
    card = 0
    prob = 0.0
    for k in range(n + 1):
        if abs(k / n - q) <= epsilon + TOL:
            c = math.comb(n, k)
            card += c
            prob += c * q**k * (1.0 - q) ** (n - k)
    return card, prob


def typical_probability_lower_bound(n: int, epsilon: float, alphabet: int = 2) -> float:
    """Chebyshev lower bound ``1 - |X| / (4 n eps^2)`` on P(typical set)."""
    return 1.0 - alphabet / (4.0 * n * epsilon**2)
