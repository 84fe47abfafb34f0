"""Reciprocal-unchoke prediction via stable b-matching with a global preference.

Preferences are tie-broken uplink speeds, so the stable matching is unique and
a single greedy pass (fastest node grabs its b fastest available neighbors)
finds it. The completion-aware variant filters edges by mutual chunk interest
and steps completion levels forward one unchoke interval at a time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .bounds import hypergeom_pmf, hypergeom_support
from .datamodel import KBPS_TO_BYTES_PER_SEC, ChunkParams, SpeedModel, speed_table
from .overlay import OverlayGraph
from .seeding import derive_seed


def tiebreak_speeds(
    speeds: Mapping[str, float], epsilon: float = 1e-9, seed: int = 0
) -> dict[str, float]:
    """Perturb speeds into pairwise-distinct values.

    The jitter is strictly increasing along the (speed, node id) ranking, so
    the argsort of originally-distinct values is preserved exactly and equal
    speeds come out distinct. Relative deviation stays below epsilon.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    order = sorted(speeds, key=lambda v: (speeds[v], v))
    n = max(len(order), 1)
    rng = np.random.default_rng(seed)
    noise = rng.random(n)
    out = {}
    for rank, node in enumerate(order):
        out[node] = speeds[node] * (1.0 + epsilon * (rank + noise[rank]) / (2.0 * n))
    return out


@dataclass(frozen=True)
class MatchingProblem:
    """Nodes, who may match whom, per-node slot count b, and global preference.

    allowed=None denotes the complete relation (everyone may match everyone),
    which large-swarm callers use to avoid materializing O(n^2) sets.
    """

    nodes: tuple[str, ...]
    allowed: Optional[Mapping[str, frozenset[str]]]
    slots_b: int
    preference: Mapping[str, float]

    def __post_init__(self):
        if self.slots_b < 1:
            raise ValueError("slots_b must be >= 1")
        prefs = [self.preference[v] for v in self.nodes]
        if len(set(prefs)) != len(prefs):
            raise ValueError("preferences must be pairwise distinct (tie-break first)")
        if self.allowed is not None:
            for v, others in self.allowed.items():
                if v in others:
                    raise ValueError(f"self-pair at {v}")
                for u in others:
                    if v not in self.allowed.get(u, frozenset()):
                        raise ValueError(f"asymmetric allowed relation at ({v}, {u})")

    def permits(self, v: str, u: str) -> bool:
        if v == u:
            return False
        if self.allowed is None:
            return True
        return u in self.allowed.get(v, frozenset())

    def edge_list(self) -> list[tuple[str, str]]:
        if self.allowed is None:
            return [
                (v, u) for i, v in enumerate(self.nodes) for u in self.nodes[i + 1 :]
            ]
        seen = []
        for v in self.nodes:
            for u in self.allowed.get(v, frozenset()):
                if v < u:
                    seen.append((v, u))
        return sorted(seen)


@dataclass(frozen=True)
class Matching:
    """Set of reciprocal-unchoke pairs."""

    pairs: frozenset[tuple[str, str]]

    def partners_map(self) -> dict[str, set[str]]:
        out: dict[str, set[str]] = {}
        for a, b in self.pairs:
            out.setdefault(a, set()).add(b)
            out.setdefault(b, set()).add(a)
        return out

    def contains(self, a: str, b: str) -> bool:
        return (min(a, b), max(a, b)) in self.pairs


def solve_bmatching(problem: MatchingProblem) -> Matching:
    """Greedy stable b-matching under a global preference.

    Nodes are processed in descending preference; each grabs its most-preferred
    available allowed partners. With distinct global preferences this yields
    the unique stable matching, so the result is independent of input order.
    """
    order = sorted(problem.nodes, key=lambda v: -problem.preference[v])
    slots = {v: problem.slots_b for v in problem.nodes}
    matched: dict[str, set[str]] = {v: set() for v in problem.nodes}
    # Doubly-linked free list over the preference order lets a node skip
    # already-full candidates in O(1); total work is near O(n*b) on dense
    # relations.
    nxt: dict[Optional[str], Optional[str]] = {}
    prv: dict[Optional[str], Optional[str]] = {}
    prev: Optional[str] = None
    for v in order:
        nxt[prev] = v
        prv[v] = prev
        prev = v
    nxt[prev] = None

    def drop(v: str) -> None:
        p, n = prv[v], nxt[v]
        nxt[p] = n
        if n is not None:
            prv[n] = p

    pairs = []
    for v in order:
        if slots[v] == 0:
            continue
        u = nxt[None]
        while u is not None and slots[v] > 0:
            candidate = u
            u = nxt[u]
            if candidate == v or candidate in matched[v]:
                continue
            if not problem.permits(v, candidate):
                continue
            matched[v].add(candidate)
            matched[candidate].add(v)
            pairs.append((min(v, candidate), max(v, candidate)))
            slots[candidate] -= 1
            if slots[candidate] == 0:
                drop(candidate)
            slots[v] -= 1
        if slots[v] == 0:
            # Filled by its own walk; earlier walks drop it at grab time.
            drop(v)
    return Matching(pairs=frozenset(pairs))


def verify_stability(problem: MatchingProblem, matching: Matching) -> list[tuple[str, str]]:
    """Exhaustive blocking-pair scan; the empty list certifies stability.

    A pair blocks when both endpoints are allowed, unmatched to each other,
    and each either has a free slot or prefers the other to its worst partner.
    """
    partners = matching.partners_map()
    pref = problem.preference
    worst: dict[str, float] = {}
    free: dict[str, bool] = {}
    for v in problem.nodes:
        ps = partners.get(v, set())
        free[v] = len(ps) < problem.slots_b
        worst[v] = min((pref[u] for u in ps), default=-math.inf)
    blocking = []
    for v, u in problem.edge_list():
        if u in partners.get(v, ()):
            continue
        v_wants = free[v] or pref[u] > worst[v]
        u_wants = free[u] or pref[v] > worst[u]
        if v_wants and u_wants:
            blocking.append((v, u))
    return blocking


# ---------------------------------------------------------------------------
# Completion-aware variant (edge filtering + time-stepped completion ratios).


def slot_chunk_budget(chunk: ChunkParams, uplink_kbps: float) -> float:
    """Chunks one unchoke slot can move in one interval: T*U / (sigma*k)."""
    bytes_per_interval = chunk.unchoke_interval_T_sec * uplink_kbps * KBPS_TO_BYTES_PER_SEC
    return bytes_per_interval / (chunk.chunk_size_sigma_bytes * chunk.regular_slots_k)


def expected_interest(c_v: float, c_u: float, C: int) -> tuple[float, float]:
    """Expected chunks of mutual interest (v's chunks u lacks, and vice versa).

    Under the random-subset chunk model each of v's c_v chunks is missing at u
    with probability (C-c_u)/C, giving E{I(v->u)} = c_v*(C-c_u)/C; the reverse
    direction follows from I(u->v) = c_u - c_v + I(v->u).
    """
    if not (0 <= c_v <= C and 0 <= c_u <= C):
        raise ValueError("completions must lie in [0, C]")
    e_vu = c_v * (C - c_u) / C
    e_uv = c_u - c_v + e_vu
    return e_vu, e_uv


def expected_interest_pmf(c_v: int, c_u: int, C: int) -> tuple[float, float]:
    """Slow oracle: the same expectations by summing the hypergeometric pmf of
    the chunk overlap (population C, c_v successes, c_u draws)."""
    if not (0 <= c_v <= C and 0 <= c_u <= C):
        raise ValueError("completions must lie in [0, C]")
    e_vu = 0.0
    e_uv = 0.0
    for h in hypergeom_support(C, c_v, c_u):
        p = hypergeom_pmf(h, C, c_v, c_u)
        e_vu += (c_v - h) * p
        e_uv += (c_u - h) * p
    return e_vu, e_uv


def filtering_probability(
    c_v: float,
    c_u: float,
    C: int,
    chunk: ChunkParams,
    uplink_v_kbps: float,
    uplink_u_kbps: float,
) -> float:
    """Probability of keeping edge (v, u): both directions' expected interest
    relative to the per-slot chunk budget, capped at 1."""
    e_vu, e_uv = expected_interest(c_v, c_u, C)
    budget_v = slot_chunk_budget(chunk, uplink_v_kbps)
    budget_u = slot_chunk_budget(chunk, uplink_u_kbps)
    return min(e_vu / budget_v, e_uv / budget_u, 1.0)


@dataclass(frozen=True)
class CompletionState:
    """Per-node downloaded-chunk counts at a point in simulated time.

    Counts are fractional because updates are expectations; dataset-facing
    records still round to whole chunks.
    """

    chunks: Mapping[str, float]
    sim_time_sec: float = 0.0

    def completed(self, C: int) -> set[str]:
        return {v for v, c in self.chunks.items() if c >= C}


def filter_problem(
    problem: MatchingProblem,
    state: CompletionState,
    chunk: ChunkParams,
    seed: int,
) -> MatchingProblem:
    """Independently keep each allowed edge with its filtering probability.

    Preferences double as uplink speeds here (they are tie-broken speeds).
    The coin order follows the sorted edge list, so the outcome is a pure
    function of (problem, state, seed).
    """
    rng = np.random.default_rng(seed)
    kept: dict[str, set[str]] = {v: set() for v in problem.nodes}
    for v, u in problem.edge_list():
        phi = filtering_probability(
            state.chunks[v],
            state.chunks[u],
            chunk.total_chunks_C,
            chunk,
            problem.preference[v],
            problem.preference[u],
        )
        if rng.random() < phi:
            kept[v].add(u)
            kept[u].add(v)
    allowed = {v: frozenset(kept[v]) for v in problem.nodes}
    return MatchingProblem(
        nodes=problem.nodes,
        allowed=allowed,
        slots_b=problem.slots_b,
        preference=problem.preference,
    )


def step_completions(
    matching: Matching,
    state: CompletionState,
    chunk: ChunkParams,
    speeds: Mapping[str, float],
) -> CompletionState:
    """Advance one unchoke interval: each matched neighbor delivers up to its
    per-slot chunk budget, bounded by its expected interest; capped at C."""
    C = chunk.total_chunks_C
    gains = {v: 0.0 for v in state.chunks}
    for a, b in matching.pairs:
        e_ab, e_ba = expected_interest(state.chunks[a], state.chunks[b], C)
        if state.chunks[b] < C:
            gains[b] += min(e_ab, slot_chunk_budget(chunk, speeds[a]))
        if state.chunks[a] < C:
            gains[a] += min(e_ba, slot_chunk_budget(chunk, speeds[b]))
    new_chunks = {v: min(C, state.chunks[v] + gains[v]) for v in state.chunks}
    return CompletionState(
        chunks=new_chunks,
        sim_time_sec=state.sim_time_sec + chunk.unchoke_interval_T_sec,
    )


@dataclass(frozen=True)
class CompletionTraceRow:
    step: int
    sim_time_sec: float
    aggregate_capacity_kbps: float
    completed_nodes: int
    state: CompletionState


def run_completion_simulation(
    graph: OverlayGraph,
    speeds: Union[SpeedModel, Mapping[str, float], None],
    chunk: ChunkParams,
    initial_c: Mapping[str, float],
    steps: int,
    seed: int,
) -> list[CompletionTraceRow]:
    """Filter, solve, record and advance for up to `steps` unchoke intervals.

    Edges between two incomplete nodes face the filtering coin each interval.
    An edge touching exactly one complete node is kept outright: the finished
    side keeps seeding its neighbor even though it wants nothing back.
    Complete-complete edges carry no interest and drop out, so an all-complete
    swarm produces an empty matching and zero aggregate capacity.
    """
    table = speed_table(graph.peers, speeds)
    prefs = tiebreak_speeds(table, seed=derive_seed(seed, "tiebreak"))
    nodes = tuple(sorted(table))
    C = chunk.total_chunks_C
    state = CompletionState(chunks={v: float(initial_c[v]) for v in nodes})
    k = chunk.regular_slots_k
    trace = []
    for step in range(steps):
        rng = np.random.default_rng(derive_seed(seed, "filter", step))
        allowed: dict[str, set[str]] = {v: set() for v in nodes}
        for a, b in graph.edges():
            a_done = state.chunks[a] >= C
            b_done = state.chunks[b] >= C
            if a_done and b_done:
                continue
            if not (a_done or b_done):
                phi = filtering_probability(
                    state.chunks[a], state.chunks[b], C, chunk, table[a], table[b]
                )
                if rng.random() >= phi:
                    continue
            allowed[a].add(b)
            allowed[b].add(a)
        problem = MatchingProblem(
            nodes=nodes,
            allowed={v: frozenset(allowed[v]) for v in nodes},
            slots_b=k,
            preference=prefs,
        )
        matching = solve_bmatching(problem)
        capacity = sum((table[a] + table[b]) / (k + 1) for a, b in matching.pairs)
        completed = len(state.completed(C))
        trace.append(
            CompletionTraceRow(
                step=step,
                sim_time_sec=state.sim_time_sec,
                aggregate_capacity_kbps=capacity,
                completed_nodes=completed,
                state=state,
            )
        )
        if completed == len(nodes):
            break
        state = step_completions(matching, state, chunk, table)
    return trace


def baseline_capacity_kbps(
    graph: OverlayGraph,
    speeds: Union[SpeedModel, Mapping[str, float], None],
    k: int,
    seed: int,
) -> float:
    """Aggregate matched capacity of the unfiltered b-matching (steady state)."""
    table = speed_table(graph.peers, speeds)
    prefs = tiebreak_speeds(table, seed=derive_seed(seed, "tiebreak"))
    nodes = tuple(sorted(table))
    allowed = {v: frozenset(graph.adjacency[v]) for v in nodes}
    problem = MatchingProblem(nodes=nodes, allowed=allowed, slots_b=k, preference=prefs)
    matching = solve_bmatching(problem)
    return sum((table[a] + table[b]) / (k + 1) for a, b in matching.pairs)


def write_completion_trace(trace: Sequence[CompletionTraceRow], path) -> None:
    """Trace CSV: step, sim_time_sec, aggregate_capacity_kbps, completed_nodes."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("step,sim_time_sec,aggregate_capacity_kbps,completed_nodes\n")
        for row in trace:
            fh.write(
                f"{row.step},{row.sim_time_sec:.1f},"
                f"{row.aggregate_capacity_kbps:.3f},{row.completed_nodes}\n"
            )


def write_matching(matching: Matching, path) -> None:
    """Pair-list CSV for unchoke-pattern plots."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("peer_a,peer_b\n")
        for a, b in sorted(matching.pairs):
            fh.write(f"{a},{b}\n")
