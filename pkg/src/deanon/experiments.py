"""Monte Carlo estimation of the expected query count and exact references.

Seeding: trial ``t`` of cell ``c`` under master seed ``s`` uses the 64-bit
BLAKE2b digest of ``(s, c, t)`` (little-endian 8-byte words).  That trial seed
is expanded into three child seeds, again by BLAKE2b-64 of ``(trial seed,
role)``: role 0 seeds the graph pair, 1 the session (victim and response
noise), 2 the group selection.
"""

from __future__ import annotations

import hashlib
import math
import statistics
import struct
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from itertools import product

import numpy as np

from .channels import BinaryChannel, JointUYZ, build_joint, mutual_information_uy
from .errors import ParameterError
from .graph_model import BipartiteGraph, GraphNoiseParams, LazyGraphPair, generate_graph, observe_noisy
from .oracle import new_session
from .strategies import (EXHAUSTIVE, GIS, MAP, STRATEGIES, TSS, StrategyParams,
                         gis_default_nprime, map_default_nprime, run_strategy,
                         tss_default_params)

SEED_SCHEME = "blake2b64(master_seed,cell_index,trial_index)->blake2b64(trial_seed,role) role=graph/session/groups"

TINY_MAX_USERS = 4
TINY_MAX_GROUPS = 3
TINY_MAX_CELLS = 12

CSV_COLUMNS = (
    "strategy", "m", "n", "p", "e1", "e2", "f1", "f2", "nprime", "epsilon", "rounds",
    "trials", "seed", "mean_q", "std_q", "ci95_halfwidth", "mean_gm_q", "mean_uid_q",
    "mean_ambiguity", "q_per_log2m", "theory_ref_value", "runtime_s",
)


@dataclass(frozen=True)
class ExperimentConfig:
    strategy: str
    m: int
    n: int | None = None
    p: float = 0.5
    e1: float = 0.0
    e2: float = 0.0
    f1: float = 0.0
    f2: float = 0.0
    n_prime: int | None = None
    epsilon: float | None = None
    rounds: int | None = None
    trials: int = 1000
    master_seed: int = 0
    confidence: float = 0.95
    cell_index: int = 0
    fixed_graph: bool = False

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ParameterError(f"unknown strategy {self.strategy!r}")
        if int(self.m) < 1:
            raise ParameterError(f"m must be >= 1, got {self.m}")
        if self.n is not None and int(self.n) < 1:
            raise ParameterError(f"n must be >= 1, got {self.n}")
        for name in ("p", "e1", "e2", "f1", "f2"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ParameterError(f"{name} must be in [0,1], got {v}")
        if int(self.trials) < 1:
            raise ParameterError(f"trials must be >= 1, got {self.trials}")
        if not 0.0 < self.confidence < 1.0:
            raise ParameterError(f"confidence must be in (0,1), got {self.confidence}")

    @property
    def noiseless(self) -> bool:
        return self.e1 == self.e2 == self.f1 == self.f2 == 0.0

    @property
    def graph_params(self) -> GraphNoiseParams:
        return GraphNoiseParams(self.p, self.e1, self.e2)

    @property
    def response_channel(self) -> BinaryChannel:
        return BinaryChannel(self.f1, self.f2)

    def joint(self) -> JointUYZ:
        return build_joint(self.p, BinaryChannel(self.e1, self.e2), self.response_channel)


@dataclass
class CellRecord:
    strategy: str
    m: int
    n: int
    p: float
    e1: float
    e2: float
    f1: float
    f2: float
    nprime: int
    epsilon: float | None
    rounds: int | None
    trials: int
    seed: int
    mean_q: float = math.nan
    std_q: float = math.nan
    ci95_halfwidth: float = math.nan
    mean_gm_q: float = math.nan
    mean_uid_q: float = math.nan
    mean_ambiguity: float = math.nan
    q_per_log2m: float = math.nan
    theory_ref_value: float = math.nan
    runtime_s: float = 0.0
    se_q: float = math.nan
    se_ambiguity: float = math.nan
    success_rate: float = math.nan
    frac_ambiguity_gt1: float = math.nan
    fallback_rate: float = math.nan
    cell_index: int = 0
    error: str | None = None
    extra: dict = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return self.error is not None

    def row(self) -> dict:
        d = asdict(self)
        return {k: d[k] for k in CSV_COLUMNS}


def trial_seed(master_seed: int, cell_index: int, trial_index: int) -> int:
    data = struct.pack("<QQQ", master_seed % 2**64, cell_index % 2**64, trial_index % 2**64)
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "little")


def _child_seeds(seed: int):
    """(graph, session, groups) seeds: BLAKE2b-64 of ``(seed, role)``, role 0..2."""
    return tuple(
        int.from_bytes(hashlib.blake2b(struct.pack("<QQ", seed, role), digest_size=8).digest(),
                       "little")
        for role in range(3))


def required_groups(strategy: str, params: StrategyParams | None) -> int:
    if strategy == EXHAUSTIVE or params is None:
        return 1
    if strategy == TSS:
        return max(1, params.n_prime * params.rounds)
    return max(1, params.n_prime)


def resolve_params(config: ExperimentConfig):
    """Strategy parameters (defaults filled in), the joint pmf and ``n``."""
    joint = config.joint()
    s = config.strategy
    if s == EXHAUSTIVE:
        params = None
    elif s in (GIS, MAP):
        if config.n_prime is not None:
            k = int(config.n_prime)
        else:
            k = (gis_default_nprime if s == GIS else map_default_nprime)(config.m, config.p)
            if config.n is not None:
                k = min(max(k, 1), config.n)
        params = StrategyParams(n_prime=k)
    else:
        try:
            base = tss_default_params(config.m, joint)
        except ParameterError:
            if config.n_prime is None:
                raise
            k = int(config.n_prime)
            eps = config.epsilon if config.epsilon is not None else k ** (-1.0 / 3.0)
            rounds = config.rounds
            if rounds is None:
                rounds = max(1, (config.n or k) // k)
            base = StrategyParams(n_prime=k, epsilon=eps, rounds=rounds)
        params = replace(
            base,
            n_prime=int(config.n_prime) if config.n_prime is not None else base.n_prime,
            epsilon=config.epsilon if config.epsilon is not None else base.epsilon,
            rounds=int(config.rounds) if config.rounds is not None else base.rounds,
        )
    n = config.n if config.n is not None else required_groups(s, params)
    if params is not None and params.n_prime > n:
        raise ParameterError(f"n_prime={params.n_prime} exceeds n={n}")
    return params, joint, n


def _run_trials(config: ExperimentConfig, params, joint, n, start: int, stop: int):
    out = np.zeros((stop - start, 5), dtype=np.int64)
    fixed = None
    if config.fixed_graph:
        fixed = _fixed_graph_pair(config, n)
    for row, t in enumerate(range(start, stop)):
        graph_seed, session_seed, group_seed = _child_seeds(
            trial_seed(config.master_seed, config.cell_index, t))
        if fixed is None:
            pair = LazyGraphPair(config.m, n, config.graph_params, graph_seed)
            g0, g1 = pair.g0, pair.g1
        else:
            g0, g1 = fixed
        session = new_session(g0, g1, config.response_channel,
                              np.random.Generator(np.random.PCG64(session_seed)))
        trial_params = None if params is None else replace(params, group_selection_seed=group_seed)
        outcome = run_strategy(config.strategy, session, trial_params, joint)
        last = session.last_entry
        if (last.kind, last.index, last.y) != ("UID", session.victim, 1):
            raise AssertionError("session ended without identifying the victim")
        out[row] = (outcome.total_q, outcome.gm_q, outcome.uid_q, outcome.ambiguity,
                    int(outcome.fell_back_to_exhaustive))
    return out


def _fixed_graph_pair(config: ExperimentConfig, n: int):
    rng = np.random.default_rng(trial_seed(config.master_seed, config.cell_index, 2**64 - 1))
    g0 = generate_graph(config.m, n, config.p, rng)
    g1 = g0 if config.graph_params.noiseless else observe_noisy(g0, config.graph_params, rng)
    return g0, g1


def _z_value(confidence: float) -> float:
    return statistics.NormalDist().inv_cdf(0.5 + confidence / 2.0)


def _blank_record(config: ExperimentConfig, params, n) -> CellRecord:
    return CellRecord(
        strategy=config.strategy, m=config.m, n=n, p=config.p, e1=config.e1, e2=config.e2,
        f1=config.f1, f2=config.f2,
        nprime=0 if params is None else params.n_prime,
        epsilon=None if params is None else params.epsilon,
        rounds=None if params is None else params.rounds,
        trials=config.trials, seed=config.master_seed, cell_index=config.cell_index)


def summarize(record: CellRecord, results: np.ndarray, confidence: float,
              weights: np.ndarray | None = None) -> CellRecord:
    """Fill the statistics of ``record`` from per-trial rows
    ``(q, gm, uid, ambiguity, fell_back)``; ``weights`` are repeat counts."""
    if weights is None:
        weights = np.ones(results.shape[0], dtype=np.int64)
    total = int(weights.sum())
    w = weights.astype(float)
    q = results[:, 0].astype(float)
    mean = float(np.sum(w * q) / total)
    var = float(np.sum(w * (q - mean) ** 2) / (total - 1)) if total > 1 else 0.0
    std = math.sqrt(var)
    se = std / math.sqrt(total)
    record.mean_q = mean
    record.std_q = std
    record.se_q = se
    record.ci95_halfwidth = _z_value(confidence) * se
    record.mean_gm_q = float(np.sum(w * results[:, 1]) / total)
    record.mean_uid_q = float(np.sum(w * results[:, 2]) / total)
    amb = results[:, 3].astype(float)
    record.mean_ambiguity = float(np.sum(w * amb) / total)
    if total > 1:
        amb_var = float(np.sum(w * (amb - record.mean_ambiguity) ** 2) / (total - 1))
        record.se_ambiguity = math.sqrt(amb_var / total)
    record.frac_ambiguity_gt1 = float(np.sum(w * (results[:, 3] > 1)) / total)
    record.fallback_rate = float(np.sum(w * results[:, 4]) / total)
    record.success_rate = 1.0
    record.q_per_log2m = mean / math.log2(record.m) if record.m > 1 else math.nan
    return record


def run_cell(config: ExperimentConfig, jobs: int = 1) -> CellRecord:
    """Run ``config.trials`` independent sessions and aggregate them.

    Each trial draws a fresh graph pair and victim unless ``fixed_graph`` is
    set.  Parameter errors are caught and reported in ``record.error``.
    """
    started = time.perf_counter()
    try:
        params, joint, n = resolve_params(config)
    except ParameterError as exc:
        rec = _blank_record(config, None, config.n or 0)
        rec.error = str(exc)
        return rec
    record = _blank_record(config, params, n)
    trials = int(config.trials)
    if jobs == 0:
        jobs = _auto_jobs()
    if jobs > 1 and trials > 1:
        bounds = np.linspace(0, trials, min(jobs, trials) + 1).astype(int)
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = pool.map(_run_trials, *zip(*[
                (config, params, joint, n, int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]))
            results = np.concatenate(list(parts))
    else:
        results = _run_trials(config, params, joint, n, 0, trials)
    summarize(record, results, config.confidence)
    record.theory_ref_value = theory_reference(config.strategy, config, params)
    record.runtime_s = time.perf_counter() - started
    return record


def _auto_jobs() -> int:
    import os
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)


def closed_form_candidates(strategy: str, m: int, p: float, n_prime: int,
                           noise: tuple = (0.0, 0.0, 0.0, 0.0)) -> float:
    """Expected candidate-set size of noiseless GIS or MAP.

    Another user survives one queried group with probability ``1-p+p^2``
    (GIS: it must be in every group the victim is in) or ``p^2+(1-p)^2``
    (MAP: it must agree with the victim on the group).
    """
    if any(noise):
        raise ParameterError("closed forms only hold for the noiseless model")
    if strategy == GIS:
        r = 1.0 - p + p * p
    elif strategy == MAP:
        r = p * p + (1.0 - p) ** 2
    else:
        raise ParameterError(f"no closed form for strategy {strategy!r}")
    return (m - 1) * r**n_prime + 1.0


def theory_reference(strategy: str, config: ExperimentConfig, params) -> float:
    """Reference value for E[Q] reported next to the estimate.

    Exact for exhaustive and noiseless GIS/MAP (the victim sits at a uniform
    rank among the candidates), the leading term ``log2 m / I(U;Y)`` for TSS,
    NaN where nothing is known.
    """
    m = config.m
    if strategy == EXHAUSTIVE:
        return (m + 1) / 2.0
    if strategy in (GIS, MAP):
        if not config.noiseless:
            return math.nan
        k = params.n_prime
        return k + (closed_form_candidates(strategy, m, config.p, k) + 1.0) / 2.0
    info = mutual_information_uy(config.joint())
    if info <= 0 or m < 2:
        return math.nan
    return math.log2(m) / info


def _tiny_check(m, n, noise):
    if any(noise):
        raise ParameterError("the exact oracle is noiseless only")
    if not (1 <= m <= TINY_MAX_USERS and 1 <= n <= TINY_MAX_GROUPS and m * n <= TINY_MAX_CELLS):
        raise ParameterError(
            f"exact oracle limited to m<={TINY_MAX_USERS}, n<={TINY_MAX_GROUPS}, got m={m}, n={n}")


def _oracle_q(strategy, adj, victim, n_prime, epsilon, rounds, p):
    """Query count of one noiseless run, traced by hand from the rules."""
    m = len(adj)
    n = len(adj[0])
    if strategy == EXHAUSTIVE:
        return victim + 1
    if strategy in (GIS, MAP):
        groups = range(n_prime)
        y = [adj[victim][g] for g in groups]
        if strategy == GIS:
            cands = [i for i in range(m)
                     if all(adj[i][g] for g, bit in zip(groups, y) if bit)]
        else:
            cands = [i for i in range(m) if [adj[i][g] for g in groups] == y]
        return n_prime + cands.index(victim) + 1
    # TSS: consecutive blocks of n_prime groups
    q = 0
    asked = set()
    tol = 1e-12
    joint = {(1, 1): p, (0, 0): 1 - p, (0, 1): 0.0, (1, 0): 0.0}
    for r in range(rounds):
        block = range(r * n_prime, (r + 1) * n_prime)
        if block.stop > n:
            break
        q += n_prime
        y = [adj[victim][g] for g in block]
        if abs(sum(y) / n_prime - p) > epsilon + tol:
            continue
        cands = []
        for i in range(m):
            u = [adj[i][g] for g in block]
            counts = {ab: 0 for ab in joint}
            for a, b in zip(u, y):
                counts[(a, b)] += 1
            if all(abs(counts[ab] / n_prime - joint[ab]) <= epsilon + tol for ab in joint):
                if i not in asked:
                    cands.append(i)
        if victim in cands:
            return q + cands.index(victim) + 1
        q += len(cands)
        asked.update(cands)
    rest = [i for i in range(m) if i not in asked]
    return q + rest.index(victim) + 1


def exact_tiny_oracle(strategy: str, m: int, n: int, p: float, n_prime: int = 0,
                      epsilon: float | None = None, rounds: int | None = None,
                      noise: tuple = (0.0, 0.0, 0.0, 0.0)) -> float:
    """Exact noiseless E[Q] by enumerating all 2^(m n) graphs and all victims.

    Uses groups ``0..n'-1`` (TSS: consecutive blocks).  Group subsets are
    exchangeable, so this equals the expectation under random selection.
    """
    _tiny_check(m, n, noise)
    if strategy not in STRATEGIES:
        raise ParameterError(f"unknown strategy {strategy!r}")
    if strategy in (GIS, MAP, TSS) and not 0 <= n_prime <= n:
        raise ParameterError(f"n_prime={n_prime} outside [0,{n}]")
    if strategy == TSS and (epsilon is None or rounds is None or n_prime < 1):
        raise ParameterError("TSS oracle needs n_prime >= 1, epsilon and rounds")
    cells = m * n
    total = 0.0
    for code in range(2**cells):
        bits = [(code >> k) & 1 for k in range(cells)]
        ones = sum(bits)
        prob = p**ones * (1 - p) ** (cells - ones)
        if prob == 0.0:
            continue
        adj = [bits[i * n:(i + 1) * n] for i in range(m)]
        qs = sum(_oracle_q(strategy, adj, v, n_prime, epsilon, rounds, p) for v in range(m))
        total += prob * qs / m
    return total


def monte_carlo_noiseless(strategy: str, m: int, n: int, p: float,
                          params: StrategyParams | None, trials: int, seed: int):
    """Monte Carlo E[Q] for small noiseless instances.

    Draws ``trials`` independent (graph, victim, group order) triples.  In the
    noiseless model the query count is a deterministic function of that
    triple, so each distinct triple is played once through a real session and
    weighted by its multiplicity.  Returns ``(mean, standard error)``.
    """
    if m * n > 30:
        raise ParameterError("graph too large for triple deduplication")
    rng = np.random.default_rng(seed)
    bits = rng.random((trials, m * n)) < p
    codes = bits.astype(np.int64) @ (np.int64(1) << np.arange(m * n, dtype=np.int64))
    victims = rng.integers(m, size=trials)
    perms = np.argsort(rng.random((trials, n)), axis=1)
    perm_codes = perms @ (np.int64(n) ** np.arange(n, dtype=np.int64))
    keys = np.stack([codes, victims, perm_codes], axis=1)
    uniq, idx, counts = np.unique(keys, axis=0, return_index=True, return_counts=True)
    joint = build_joint(p, BinaryChannel(), BinaryChannel())
    rows = np.zeros((uniq.shape[0], 5), dtype=np.int64)
    quiet = np.random.default_rng(0)
    for r, i in enumerate(idx):
        g = BipartiteGraph(bits[i].reshape(m, n))
        session = new_session(g, g, BinaryChannel(), quiet, victim=int(victims[i]))
        o = run_strategy(strategy, session, params, joint, groups=perms[i])
        rows[r] = (o.total_q, o.gm_q, o.uid_q, o.ambiguity, int(o.fell_back_to_exhaustive))
    rec = CellRecord(strategy, m, n, p, 0, 0, 0, 0, 0, None, None, trials, seed)
    summarize(rec, rows, 0.95, weights=counts)
    return rec.mean_q, rec.se_q


def tiny_instance_params(strategy: str, n: int) -> StrategyParams | None:
    """Parameters used for the tiny-instance checks.

    GIS/MAP query ``max(1, n-1)`` groups so the subset draw matters; TSS uses
    single-group rounds with epsilon 0.6 (answers are atypical for some p,
    which exercises the skipped-round path) over all ``n`` groups.
    """
    if strategy == EXHAUSTIVE:
        return None
    if strategy == TSS:
        return StrategyParams(n_prime=1, epsilon=0.6, rounds=n)
    return StrategyParams(n_prime=max(1, n - 1))


def scaling_sweep(strategy: str, ms, trials: int, seed: int = 0, p: float = 0.5,
                  noise: tuple = (0.0, 0.0, 0.0, 0.0), n_prime_fn=None,
                  jobs: int = 1) -> list:
    """One cell per ``m``; each row carries ``mean_q / log2 m``.

    ``n_prime_fn(m)`` overrides the strategy's default block length.  The
    number of groups is whatever the resolved schedule needs.
    """
    rows = []
    e1, e2, f1, f2 = noise
    for idx, m in enumerate(ms):
        k = None if n_prime_fn is None else n_prime_fn(m)
        cfg = ExperimentConfig(strategy, m, None, p, e1, e2, f1, f2, n_prime=k,
                               trials=trials, master_seed=seed, cell_index=idx)
        rec = run_cell(cfg, jobs=jobs)
        rows.append({
            "m": m, "log2m": math.log2(m), "nprime": rec.nprime, "mean_q": rec.mean_q,
            "se_q": rec.se_q, "q_per_log2m": rec.q_per_log2m,
            "residual": rec.mean_q - rec.nprime, "mean_ambiguity": rec.mean_ambiguity,
            "frac_ambiguity_gt1": rec.frac_ambiguity_gt1, "record": rec,
        })
    return rows


def expand_sweep(base: dict, axes: dict) -> list:
    """Cross product of ``axes`` (name -> list of values) over ``base``."""
    names = list(axes)
    configs = []
    for idx, values in enumerate(product(*(axes[k] for k in names))):
        kw = dict(base)
        kw.update(zip(names, values))
        kw["cell_index"] = idx
        configs.append(ExperimentConfig(**kw))
    return configs
