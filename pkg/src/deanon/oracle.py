"""Query protocol between an attacker and the network.

A session hides the true graph and the victim index.  Group-membership (GM)
answers come from the true graph and pass through the response channel; a
user-id (UID) answer is exact, and the first UID query naming the victim ends
the session.  Every query counts towards ``Q``.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .channels import BinaryChannel
from .errors import ParameterError, ProtocolError

GM = "GM"
UID = "UID"


class Query(NamedTuple):
    kind: str
    index: int


class TranscriptEntry(NamedTuple):
    kind: str
    index: int
    z: int
    y: int


class AttackSession:
    """One victim, one graph pair and the running transcript.

    Noise for GM answers is drawn from the session's own stream, one uniform
    per GM query in transcript order, so a session replays exactly from its
    seed.  Repeated GM queries on a group get fresh noise.
    """

    def __init__(self, g0, g1, response_channel: BinaryChannel,
                 rng: np.random.Generator, victim: int | None = None):
        if tuple(g0.shape) != tuple(g1.shape):
            raise ParameterError(f"graph shapes differ: {g0.shape} vs {g1.shape}")
        self._g0 = g0
        self.g1 = g1
        self.response_channel = response_channel
        self._rng = rng
        if victim is None:
            victim = int(rng.integers(g0.m))
        elif not 0 <= victim < g0.m:
            raise ParameterError(f"victim {victim} out of range [0,{g0.m})")
        self._victim = int(victim)
        # TranscriptEntry items, or (users, hit) for a bulk UID sweep
        self._log = []
        self._last = None
        self.gm_count = 0
        self.uid_count = 0
        self.terminated = False

    @property
    def m(self) -> int:
        return self.g1.m

    @property
    def n(self) -> int:
        return self.g1.n

    @property
    def q(self) -> int:
        return self.gm_count + self.uid_count

    @property
    def victim(self) -> int:
        if not self.terminated:
            raise ProtocolError("victim is hidden until the session terminates")
        return self._victim

    def _check_open(self):
        if self.terminated:
            raise ProtocolError("session already terminated")

    def query_gm(self, group: int) -> int:
        self._check_open()
        if not 0 <= group < self.n:
            raise ParameterError(f"group index {group} out of range [0,{self.n})")
        z = self._g0.entry(self._victim, group)
        flip = self._rng.random() < self.response_channel.flip_prob(z)
        y = z ^ int(flip)
        self._last = TranscriptEntry(GM, int(group), z, y)
        self._log.append(self._last)
        self.gm_count += 1
        return y

    def query_uid(self, user: int) -> int:
        self._check_open()
        if not 0 <= user < self.m:
            raise ParameterError(f"user index {user} out of range [0,{self.m})")
        z = int(user == self._victim)
        self._last = TranscriptEntry(UID, int(user), z, z)
        self._log.append(self._last)
        self.uid_count += 1
        if z:
            self.terminated = True
        return z

    def query(self, q: Query) -> int:
        if q.kind == GM:
            return self.query_gm(q.index)
        if q.kind == UID:
            return self.query_uid(q.index)
        raise ParameterError(f"unknown query kind {q.kind!r}")

    def uid_sweep(self, users) -> bool:
        """UID-query ``users`` in order, stopping at the victim.

        Same effect on the transcript and counters as calling
        :meth:`query_uid` for each user in turn.  Returns ``terminated``.
        """
        self._check_open()
        users = np.asarray(users, dtype=np.int64)
        if users.size == 0:
            return False
        if users.min() < 0 or users.max() >= self.m:
            raise ParameterError("user index out of range in UID sweep")
        hits = np.flatnonzero(users == self._victim)
        hit = bool(hits.size)
        stop = int(hits[0]) + 1 if hit else users.size
        self._log.append((users[:stop], hit))
        self._last = TranscriptEntry(UID, int(users[stop - 1]), int(hit), int(hit))
        self.uid_count += stop
        self.terminated = hit
        return hit

    @property
    def transcript(self) -> list:
        """Ordered list of :class:`TranscriptEntry`; ``len`` equals ``q``."""
        out = []
        for item in self._log:
            if isinstance(item, TranscriptEntry):
                out.append(item)
                continue
            users, hit = item
            out.extend(TranscriptEntry(UID, u, 0, 0) for u in users.tolist())
            if hit:
                out[-1] = TranscriptEntry(UID, out[-1].index, 1, 1)
        return out

    @property
    def last_entry(self) -> TranscriptEntry | None:
        return self._last

    def dump_transcript(self) -> str:
        """One line per query: ``t kind index z y`` with ``t`` from 1."""
        return "".join(f"{t} {e.kind} {e.index} {e.z} {e.y}\n"
                       for t, e in enumerate(self.transcript, 1))


def new_session(g0, g1, response_channel: BinaryChannel, rng: np.random.Generator,
                victim: int | None = None) -> AttackSession:
    """Start a session with a victim drawn uniformly from ``rng``.

    ``victim`` pins the victim instead (replays and exact enumeration).
    """
    return AttackSession(g0, g1, response_channel, rng, victim=victim)
