"""Attack strategies that drive an :class:`~deanon.oracle.AttackSession`.

All strategies first pick groups with a seeded uniform draw without
replacement, ask GM queries about them, narrow the users down using the
attacker graph ``g1`` and then UID-query candidates until the victim answers.
Each one ends with an exhaustive sweep over users not yet asked, so every run
terminates on ``(UID(victim), 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channels import JointUYZ, mutual_information_uy
from .errors import ParameterError
from .typicality import is_typical, typical_rows

EXHAUSTIVE = "exhaustive"
GIS = "gis"
MAP = "map"
TSS = "tss"
STRATEGIES = (EXHAUSTIVE, GIS, MAP, TSS)

FIXED_POINT_ITERATIONS = 100


@dataclass(frozen=True)
class StrategyParams:
    n_prime: int = 0
    epsilon: float | None = None
    rounds: int | None = None
    group_selection_seed: int = 0

    def __post_init__(self):
        if int(self.n_prime) < 0:
            raise ParameterError(f"n_prime must be non-negative, got {self.n_prime}")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")
        if self.rounds is not None and int(self.rounds) < 1:
            raise ParameterError(f"rounds must be >= 1, got {self.rounds}")


@dataclass
class AttackOutcome:
    total_q: int
    gm_q: int
    uid_q: int
    rounds_used: int = 1
    ambiguity_size_per_round: list = field(default_factory=list)
    fell_back_to_exhaustive: bool = False

    @property
    def ambiguity(self) -> int:
        """Size of the first candidate set the strategy formed (0 if none)."""
        return self.ambiguity_size_per_round[0] if self.ambiguity_size_per_round else 0


def _outcome(session, **kw) -> AttackOutcome:
    if not session.terminated:
        raise AssertionError("strategy returned before the victim was found")
    return AttackOutcome(session.q, session.gm_count, session.uid_count, **kw)


def select_groups(n: int, k: int, seed: int) -> np.ndarray:
    """``k`` distinct groups out of ``n``, uniformly at random, in draw order."""
    if not 0 <= k <= n:
        raise ParameterError(f"cannot select {k} groups out of {n}")
    return np.random.default_rng(seed).permutation(n)[:k]


def _groups(session, params, count, groups):
    if groups is None:
        return select_groups(session.n, count, params.group_selection_seed)
    groups = np.asarray(groups, dtype=np.int64)
    if groups.size < count:
        raise ParameterError(f"need {count} groups, got {groups.size}")
    return groups[:count]


def _ask(session, groups) -> np.ndarray:
    return np.array([session.query_gm(int(j)) for j in groups], dtype=bool)


def run_exhaustive(session) -> AttackOutcome:
    session.uid_sweep(np.arange(session.m))
    return _outcome(session, ambiguity_size_per_round=[session.m],
                    fell_back_to_exhaustive=True)


def run_gis(session, params: StrategyParams, groups=None) -> AttackOutcome:
    """Group intersection: candidates are the common members of every group
    that answered 1.  No positive answer leaves every user a candidate."""
    if params.n_prime > session.n:
        raise ParameterError(f"n_prime={params.n_prime} exceeds n={session.n}")
    chosen = _groups(session, params, params.n_prime, groups)
    answers = _ask(session, chosen)
    mask = np.ones(session.m, dtype=bool)
    for j in chosen[answers]:
        mask &= session.g1.column(int(j))
    candidates = np.flatnonzero(mask)
    fell_back = False
    if not session.uid_sweep(candidates):
        fell_back = True
        session.uid_sweep(np.flatnonzero(~mask))
    return _outcome(session, ambiguity_size_per_round=[int(candidates.size)],
                    fell_back_to_exhaustive=fell_back)


def bit_log_likelihood(joint: JointUYZ | None) -> np.ndarray:
    """``L[u, y] = log2 P(Y=y | U=u)`` for the attacker's bit ``u``.

    Without a joint the channels are taken as noiseless (identity).
    """
    if joint is None:
        w = np.eye(2)
    else:
        w = joint.y_given_u()
        w = np.where(np.isnan(w), 0.0, w)
    with np.errstate(divide="ignore"):
        return np.log2(w)


def posterior_scores(columns: np.ndarray, answers: np.ndarray, loglik: np.ndarray) -> np.ndarray:
    """Per-user log2-likelihood of the answers given each user's g1 bits.

    Scores depend only on the four pair counts of each user, so users with
    the same counts get bit-identical scores.
    """
    m = columns.shape[0]
    y = answers.astype(bool)
    w = int(np.count_nonzero(y))
    c11 = columns[:, y].sum(axis=1)
    c10 = columns[:, ~y].sum(axis=1)
    counts = {(1, 1): c11, (1, 0): c10, (0, 1): w - c11, (0, 0): (y.size - w) - c10}
    score = np.zeros(m)
    for (u, yy), c in counts.items():
        lv = loglik[u, yy]
        if np.isneginf(lv):
            score[c > 0] = -np.inf
        else:
            score += c * lv
    return score


def run_map(session, params: StrategyParams, joint: JointUYZ | None = None,
            groups=None) -> AttackOutcome:
    """Posterior ranking: UID-query users by descending P(J=i | answers).

    The victim prior is uniform, so the posterior is proportional to the
    likelihood of the answers given the user's attacker-graph bits.  Ties go to
    the lower user index.  Users of zero posterior come last, in index order.
    """
    if params.n_prime > session.n:
        raise ParameterError(f"n_prime={params.n_prime} exceeds n={session.n}")
    chosen = _groups(session, params, params.n_prime, groups)
    answers = _ask(session, chosen)
    if chosen.size:
        cols = np.column_stack([session.g1.column(int(j)) for j in chosen])
    else:
        cols = np.zeros((session.m, 0), dtype=bool)
    score = posterior_scores(cols, answers, bit_log_likelihood(joint))
    finite = np.isfinite(score)
    order = np.lexsort((np.arange(session.m), -score))
    n_finite = int(np.count_nonzero(finite))
    fell_back = n_finite == 0
    if not session.uid_sweep(order[:n_finite]):
        fell_back = True
        session.uid_sweep(order[n_finite:])
    return _outcome(session, ambiguity_size_per_round=[n_finite],
                    fell_back_to_exhaustive=fell_back)


def run_tss(session, params: StrategyParams, joint: JointUYZ, groups=None) -> AttackOutcome:
    """Typical-set rounds over disjoint blocks of ``n_prime`` groups.

    A round whose answers are not typical for P_Y is skipped.  Otherwise the
    candidates are the users whose g1 bits on the block are jointly typical
    with the answers under P_{U,Y}; they are UID-queried in index order.
    Users already asked are never asked again.
    """
    if params.epsilon is None or params.rounds is None:
        raise ParameterError("TSS needs epsilon and rounds")
    k = int(params.n_prime)
    if k < 1:
        raise ParameterError("TSS needs n_prime >= 1")
    usable = min(session.n // k, int(params.rounds)) * k
    order = _groups(session, params, usable, groups)
    py1 = joint.p_y1
    puy = joint.uy
    asked = np.zeros(session.m, dtype=bool)
    sizes = []
    rounds_used = 0
    for r in range(int(params.rounds)):
        if (r + 1) * k > order.size:
            break
        rounds_used += 1
        block = order[r * k:(r + 1) * k]
        answers = _ask(session, block)
        if not is_typical(answers, py1, params.epsilon):
            continue
        cols = np.column_stack([session.g1.column(int(j)) for j in block])
        mask = typical_rows(cols, answers, puy, params.epsilon)
        sizes.append(int(np.count_nonzero(mask)))
        candidates = np.flatnonzero(mask & ~asked)
        if session.uid_sweep(candidates):
            return _outcome(session, rounds_used=rounds_used,
                            ambiguity_size_per_round=sizes)
        asked[candidates] = True
    session.uid_sweep(np.flatnonzero(~asked))
    return _outcome(session, rounds_used=rounds_used, ambiguity_size_per_round=sizes,
                    fell_back_to_exhaustive=True)


def _check_schedule_inputs(m, p):
    if not 0.0 < p < 1.0:
        raise ParameterError(f"default n' needs 0 < p < 1, got p={p}")
    if m < 2:
        raise ParameterError(f"default n' needs m >= 2, got m={m}")


def gis_default_nprime(m: int, p: float) -> int:
    """ceil((1/(p(1-p)) + 1/log2(1/(1-p))) * log2 m)."""
    _check_schedule_inputs(m, p)
    const = 1.0 / (p * (1.0 - p)) + 1.0 / math.log2(1.0 / (1.0 - p))
    return math.ceil(const * math.log2(m) - 1e-9)


def map_default_nprime(m: int, p: float) -> int:
    """ceil(log2 m / (2 p (1-p)))."""
    _check_schedule_inputs(m, p)
    return math.ceil(math.log2(m) / (2.0 * p * (1.0 - p)) - 1e-9)


def tss_default_params(m: int, joint: JointUYZ, group_selection_seed: int = 0) -> StrategyParams:
    """Block length, slack and round count from the mutual information.

    The block length solves ``n' = log2 m / (I + n'^(-1/3))`` by fixed-point
    iteration from ``log2 m / I``; then ``eps = n'^(-1/3)`` and
    ``l = ceil(log2 m / log2(n' eps^2))``.
    """
    info = mutual_information_uy(joint)
    if info <= 0.0:
        raise ParameterError("I(U;Y) = 0: answers carry no information, use exhaustive")
    if m < 2:
        raise ParameterError(f"TSS schedule needs m >= 2, got m={m}")
    log_m = math.log2(m)
    x = log_m / info
    for _ in range(FIXED_POINT_ITERATIONS):
        nxt = log_m / (info + x ** (-1.0 / 3.0))
        if abs(nxt - x) < 1e-12:
            break
        x = nxt
    n_prime = max(1, math.ceil(x - 1e-9))
    eps = n_prime ** (-1.0 / 3.0)
    gain = n_prime * eps * eps
    if gain <= 1.0 + 1e-12:
        raise ParameterError(
            f"TSS schedule gives n'*eps^2 = {gain:.3f} <= 1 at m={m}; "
            "use a larger m or set epsilon explicitly")
    rounds = math.ceil(log_m / math.log2(gain) - 1e-9)
    return StrategyParams(n_prime=n_prime, epsilon=eps, rounds=max(rounds, 1),
                          group_selection_seed=group_selection_seed)


def run_strategy(name: str, session, params: StrategyParams | None = None,
                 joint: JointUYZ | None = None, groups=None) -> AttackOutcome:
    if name == EXHAUSTIVE:
        return run_exhaustive(session)
    if name == GIS:
        return run_gis(session, params, groups=groups)
    if name == MAP:
        return run_map(session, params, joint=joint, groups=groups)
    if name == TSS:
        return run_tss(session, params, joint, groups=groups)
    raise ParameterError(f"unknown strategy {name!r}")
