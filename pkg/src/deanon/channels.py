"""Binary channels and the information measures built on them.

Everything is in bits.  Divergences that are infinite because of a support
mismatch return ``math.inf`` (:data:`INFINITY`) rather than a large number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

INFINITY = math.inf


def _check_prob(name, value):
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ParameterError(f"{name} must be in [0,1], got {value}")
    return value


@dataclass(frozen=True)
class BinaryChannel:
    """Memoryless binary channel.

    ``p10`` is P(out=0 | in=1) (a miss), ``p01`` is P(out=1 | in=0) (a false
    alarm).  The graph observation channel is ``BinaryChannel(e1, e2)`` and the
    response channel is ``BinaryChannel(f1, f2)``.
    """

    p10: float = 0.0
    p01: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "p10", _check_prob("p10", self.p10))
        object.__setattr__(self, "p01", _check_prob("p01", self.p01))

    @property
    def matrix(self) -> np.ndarray:
        """Transition matrix ``W[x, y] = P(out=y | in=x)``."""
        return np.array([[1.0 - self.p01, self.p01],
                         [self.p10, 1.0 - self.p10]])

    @property
    def noiseless(self) -> bool:
        return self.p10 == 0.0 and self.p01 == 0.0

    def flip_prob(self, bit: int) -> float:
        return self.p10 if bit else self.p01

    def transmit(self, bits, rng: np.random.Generator) -> np.ndarray:
        bits = np.asarray(bits, dtype=bool)
        draws = rng.random(bits.shape)
        return np.where(bits, draws >= self.p10, draws < self.p01)

    def then(self, other: BinaryChannel) -> BinaryChannel:
        """Cascade: this channel followed by ``other``."""
        w = self.matrix @ other.matrix
        return BinaryChannel(p10=w[1, 0], p01=w[0, 1])


def binary_entropy(q: float) -> float:
    q = _check_prob("q", q)
    if q == 0.0 or q == 1.0:
        return 0.0
    return -q * math.log2(q) - (1.0 - q) * math.log2(1.0 - q)


def entropy(pmf) -> float:
    """Shannon entropy of an arbitrary pmf (any shape), 0 log 0 = 0."""
    pmf = np.asarray(pmf, dtype=float).ravel()
    nz = pmf[pmf > 0]
    return float(-np.sum(nz * np.log2(nz)))


def kl_divergence_binary(q: float, r: float) -> float:
    """D(Bern(q) || Bern(r)) in bits; :data:`INFINITY` if q is not << r."""
    q = _check_prob("q", q)
    r = _check_prob("r", r)
    total = 0.0
    for a, b in ((q, r), (1.0 - q, 1.0 - r)):
        if a == 0.0:
            continue
        if b == 0.0:
            return INFINITY
        total += a * math.log2(a / b)
    return max(total, 0.0)


def mutual_information(joint2) -> float:
    """I(A;B) from a 2-d joint pmf ``joint2[a, b]``."""
    joint2 = np.asarray(joint2, dtype=float)
    pa = joint2.sum(axis=1)
    pb = joint2.sum(axis=0)
    mi = entropy(pa) + entropy(pb) - entropy(joint2)
    return max(mi, 0.0)


@dataclass(frozen=True, eq=False)
class JointUYZ:
    """Joint pmf of (U, Y, Z) for one adjacency entry.

    ``Z`` is the true membership bit, ``U`` the attacker's copy of it (through
    the graph channel) and ``Y`` the noisy answer to a membership query
    (through the response channel).  ``table[u, y, z]``.
    """

    table: np.ndarray
    p: float
    graph_channel: BinaryChannel
    response_channel: BinaryChannel

    @property
    def uy(self) -> np.ndarray:
        """Marginal ``P[u, y]``."""
        return self.table.sum(axis=2)

    @property
    def uz(self) -> np.ndarray:
        return self.table.sum(axis=1)

    @property
    def zy(self) -> np.ndarray:
        """Marginal ``P[z, y]``."""
        return self.table.sum(axis=0).T

    @property
    def p_u1(self) -> float:
        return float(self.table[1].sum())

    @property
    def p_y1(self) -> float:
        return float(self.table[:, 1].sum())

    @property
    def p_z1(self) -> float:
        return float(self.table[:, :, 1].sum())

    def y_given_u(self) -> np.ndarray:
        """``W[u, y] = P(Y=y | U=u)``; rows for impossible ``u`` are NaN."""
        uy = self.uy
        pu = uy.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(pu > 0, uy / pu, np.nan)


def build_joint(p: float, graph_channel: BinaryChannel,
                response_channel: BinaryChannel) -> JointUYZ:
    """``table[u, y, z] = P(z) P(u | z) P(y | z)``."""
    p = _check_prob("p", p)
    pz = np.array([1.0 - p, p])
    wu = graph_channel.matrix      # [z, u]
    wy = response_channel.matrix   # [z, y]
    table = np.einsum("z,zu,zy->uyz", pz, wu, wy)
    table.setflags(write=False)
    return JointUYZ(table, p, graph_channel, response_channel)


def mutual_information_uy(joint: JointUYZ) -> float:
    return min(mutual_information(joint.uy), 1.0)


def mutual_information_uz(joint: JointUYZ) -> float:
    return mutual_information(joint.uz)


def mutual_information_zy(joint: JointUYZ) -> float:
    return mutual_information(joint.zy)
