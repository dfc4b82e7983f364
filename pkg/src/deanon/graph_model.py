"""Random user/group membership graphs and the attacker's noisy copy.

A graph is an ``m x n`` boolean matrix: entry ``(i, j)`` is set when user
``i`` belongs to group ``j``.  Two realizations are provided:

* :class:`BipartiteGraph` holds the full matrix.  :func:`generate_graph` and
  :func:`observe_noisy` fill it in row-major order (all groups of user 0, then
  user 1, ...) from a single random stream, so a seed fixes every bit.
* :class:`LazyGraphPair` realizes the true graph and its noisy observation
  column by column, each column from its own stream derived from
  ``(seed, column)``.  Strategies only ever read a few columns, so large Monte
  Carlo cells never pay for the full matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ParameterError

TRUE_GRAPH = "true_graph"
ATTACKER_GRAPH = "attacker_graph"
RESPONSE = "response"


def _check_prob(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ParameterError(f"{name} must be in [0,1], got {value}")
    return value


def _check_dims(m: int, n: int) -> None:
    if int(m) < 1 or int(n) < 1:
        raise ParameterError(f"graph dimensions must be positive, got m={m}, n={n}")


@dataclass(frozen=True)
class GraphNoiseParams:
    """Edge probability ``p`` plus the observation channel.

    ``e1`` is the probability that a true edge is missing from the attacker's
    graph, ``e2`` the probability that a non-edge shows up in it.
    """

    p: float
    e1: float = 0.0
    e2: float = 0.0

    def __post_init__(self):
        for name in ("p", "e1", "e2"):
            object.__setattr__(self, name, _check_prob(name, getattr(self, name)))

    @property
    def noiseless(self) -> bool:
        return self.e1 == 0.0 and self.e2 == 0.0


@dataclass(frozen=True)
class GroupSignature:
    bits: tuple
    owner: int
    source: str = TRUE_GRAPH

    def __len__(self):
        return len(self.bits)


class BipartiteGraph:
    """Immutable membership matrix with lazily cached member lists."""

    def __init__(self, adjacency):
        adj = np.asarray(adjacency)
        if adj.ndim != 2:
            raise ParameterError("adjacency must be a 2-d matrix")
        _check_dims(*adj.shape)
        if adj.dtype != np.bool_:
            if not np.isin(adj, (0, 1)).all():
                raise ParameterError("adjacency entries must be 0 or 1")
        adj = np.array(adj, dtype=bool, order="C")
        adj.setflags(write=False)
        self._adj = adj
        self._members = {}

    @property
    def m(self) -> int:
        return self._adj.shape[0]

    @property
    def n(self) -> int:
        return self._adj.shape[1]

    @property
    def shape(self):
        return self._adj.shape

    @property
    def adjacency(self) -> np.ndarray:
        return self._adj

    def entry(self, user: int, group: int) -> int:
        return int(self._adj[user, group])

    def column(self, group: int) -> np.ndarray:
        return self._adj[:, group]

    def row(self, user: int) -> np.ndarray:
        return self._adj[user]

    def members(self, group: int) -> np.ndarray:
        """Sorted user indices of ``group``; computed on first access."""
        cached = self._members.get(group)
        if cached is None:
            cached = np.flatnonzero(self._adj[:, group])
            cached.setflags(write=False)
            self._members[group] = cached
        return cached

    def groups_of(self, user: int) -> np.ndarray:
        return np.flatnonzero(self._adj[user])

    def edge_count(self) -> int:
        return int(np.count_nonzero(self._adj))

    def to_dense(self) -> BipartiteGraph:
        return self

    def __eq__(self, other):
        if not isinstance(other, BipartiteGraph):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self._adj, other._adj))

    def __hash__(self):
        return hash((self.shape, np.packbits(self._adj).tobytes()))

    def __repr__(self):
        return f"BipartiteGraph(m={self.m}, n={self.n}, edges={self.edge_count()})"

    def dumps(self, p: float = float("nan"), seed: int | None = None) -> str:
        """Text dump: header ``m n p seed`` then one ``0/1`` line per user."""
        header = f"{self.m} {self.n} {p!r} {'-' if seed is None else seed}"
        rows = ("".join("1" if b else "0" for b in row) for row in self._adj)
        return "\n".join([header, *rows]) + "\n"

    @classmethod
    def loads(cls, text: str) -> BipartiteGraph:
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ParameterError("empty graph dump")
        fields = lines[0].split()
        if len(fields) != 4:
            raise ParameterError("graph dump header must be 'm n p seed'")
        m, n = int(fields[0]), int(fields[1])
        rows = lines[1:]
        if len(rows) != m or any(len(r) != n or set(r) - {"0", "1"} for r in rows):
            raise ParameterError("graph dump body does not match header dimensions")
        return cls(np.array([[c == "1" for c in r] for r in rows], dtype=bool))


def generate_graph(m: int, n: int, p: float, rng: np.random.Generator) -> BipartiteGraph:
    """Draw every entry independently as Bernoulli(p), row-major from ``rng``."""
    _check_dims(m, n)
    p = _check_prob("p", p)
    return BipartiteGraph(rng.random((int(m), int(n))) < p)


def _flip(bits: np.ndarray, miss: float, false_alarm: float, draws: np.ndarray) -> np.ndarray:
    # a set bit survives with prob 1-miss; a clear bit turns on with prob false_alarm
    return np.where(bits, draws >= miss, draws < false_alarm)


def observe_noisy(g0: BipartiteGraph, params: GraphNoiseParams,
                  rng: np.random.Generator) -> BipartiteGraph:
    """Pass every entry of ``g0`` through the (e1, e2) channel, row-major."""
    draws = rng.random(g0.shape)
    return BipartiteGraph(_flip(g0.adjacency, params.e1, params.e2, draws))


def signature(g, user: int, group_subset: Sequence[int],
              source: str = TRUE_GRAPH) -> GroupSignature:
    """Partial group signature of ``user`` over ``group_subset`` (order kept)."""
    if not 0 <= user < g.m:
        raise ParameterError(f"user index {user} out of range [0,{g.m})")
    bits = []
    for j in group_subset:
        if not 0 <= j < g.n:
            raise ParameterError(f"group index {j} out of range [0,{g.n})")
        bits.append(g.entry(user, j))
    return GroupSignature(tuple(bits), int(user), source)


class _LazyView:
    """Read-only graph interface backed by a :class:`LazyGraphPair`."""

    def __init__(self, pair: LazyGraphPair, which: int):
        self._pair = pair
        self._which = which
        self._members = {}

    @property
    def m(self) -> int:
        return self._pair.m

    @property
    def n(self) -> int:
        return self._pair.n

    @property
    def shape(self):
        return (self._pair.m, self._pair.n)

    def column(self, group: int) -> np.ndarray:
        return self._pair._columns(group)[self._which]

    def entry(self, user: int, group: int) -> int:
        return int(self.column(group)[user])

    def members(self, group: int) -> np.ndarray:
        cached = self._members.get(group)
        if cached is None:
            cached = np.flatnonzero(self.column(group))
            self._members[group] = cached
        return cached

    def to_dense(self) -> BipartiteGraph:
        return BipartiteGraph(np.column_stack([self.column(j) for j in range(self.n)]))


class LazyGraphPair:
    """True graph ``g0`` and observation ``g1`` realized one column at a time.

    Column ``j`` comes from the stream seeded by ``(seed, j)``: ``m`` uniforms
    decide ``g0[:, j]``, the next ``m`` decide the channel flips for
    ``g1[:, j]``.  Results do not depend on which columns are touched first.
    """

    def __init__(self, m: int, n: int, params: GraphNoiseParams, seed: int):
        _check_dims(m, n)
        self.m = int(m)
        self.n = int(n)
        self.params = params
        self.seed = int(seed)
        self._cache = {}
        self.g0 = _LazyView(self, 0)
        self.g1 = _LazyView(self, 1)

    def _columns(self, group: int):
        cols = self._cache.get(group)
        if cols is None:
            if not 0 <= group < self.n:
                raise ParameterError(f"group index {group} out of range [0,{self.n})")
            rng = np.random.default_rng([self.seed, group])
            col0 = rng.random(self.m) < self.params.p
            if self.params.noiseless:
                col1 = col0
            else:
                col1 = _flip(col0, self.params.e1, self.params.e2, rng.random(self.m))
            col0.setflags(write=False)
            col1.setflags(write=False)
            cols = self._cache[group] = (col0, col1)
        return cols

    @property
    def materialized_columns(self) -> int:
        return len(self._cache)
