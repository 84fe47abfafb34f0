"""Per-torrent overlay graphs under Random and the Locality(delta, mu) family.

Each node first draws min(W, n-1) random neighbors; a family policy then
substitutes remote picks with unused locals (slowest remote out first, fastest
local in first) subject to the delta speed rule and the mu remote cap. The
graph is the union of all per-node selections (incoming connections are
accepted), after which the mu cap is re-enforced by pruning remote edges.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .datamodel import Peer, SpeedModel, TorrentRecord


class EdgeScope(enum.Enum):
    INTERNAL = "internal"  # same ISP
    PEERING = "peering"  # same country, different ISP
    TRANSIT = "transit"  # different country


@dataclass(frozen=True)
class OverlayPolicy:
    """Random, or the Locality family member with speed margin delta and
    remote-neighbor cap mu (None = unbounded)."""

    name: str
    is_random: bool = False
    delta: float = 0.0
    mu: Optional[int] = None

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")
        if self.mu is not None and self.mu < 0:
            raise ValueError("mu must be >= 0")

    @classmethod
    def random_overlay(cls) -> "OverlayPolicy":
        return cls(name="random", is_random=True)

    @classmethod
    def loif(cls) -> "OverlayPolicy":
        """Switch a remote for a local only if the local is strictly faster."""
        return cls(name="loif", delta=0.0)

    @classmethod
    def locality(cls) -> "OverlayPolicy":
        """Switch every remote for an unused local regardless of speed."""
        return cls(name="locality", delta=1.0)

    @classmethod
    def strict(cls, mu: int = 1) -> "OverlayPolicy":
        name = "strict" if mu == 1 else f"strict{mu}"
        return cls(name=name, delta=1.0, mu=mu)

    @classmethod
    def family(cls, delta: float, mu: Optional[int] = None) -> "OverlayPolicy":
        mu_part = "inf" if mu is None else str(mu)
        return cls(name=f"family-{delta:g}-{mu_part}", delta=delta, mu=mu)

    @classmethod
    def parse(cls, token: str) -> "OverlayPolicy":
        t = token.strip().lower()
        if t == "random":
            return cls.random_overlay()
        if t == "loif":
            return cls.loif()
        if t == "locality":
            return cls.locality()
        if t == "strict":
            return cls.strict()
        if t.startswith("strict:"):
            return cls.strict(int(t.split(":", 1)[1]))
        if t.startswith("family:"):
            parts = t.split(":")
            if len(parts) not in (2, 3):
                raise ValueError(f"bad policy spec {token!r}")
            delta = float(parts[1])
            mu = None
            if len(parts) == 3 and parts[2] not in ("", "inf", "unbounded"):
                mu = int(parts[2])
            return cls.family(delta, mu)
        raise ValueError(f"unknown overlay policy {token!r}")


@dataclass
class OverlayGraph:
    """Symmetric neighbor relation over one torrent's peers, with per-edge scope."""

    torrent_id: str
    peers: tuple[Peer, ...]
    adjacency: dict[str, set[str]] = field(default_factory=dict)
    edge_scopes: dict[tuple[str, str], Optional[EdgeScope]] = field(default_factory=dict)
    singleton: bool = False  # set when the torrent had no possible neighbors

    def __post_init__(self):
        for p in self.peers:
            self.adjacency.setdefault(p.peer_id, set())

    @property
    def peer_map(self) -> dict[str, Peer]:
        return {p.peer_id: p for p in self.peers}

    def add_edge(self, a: str, b: str) -> None:
        if a == b:
            raise ValueError("self-edges are not allowed")
        self.adjacency[a].add(b)
        self.adjacency[b].add(a)
        self.edge_scopes.setdefault(_edge_key(a, b), None)

    def remove_edge(self, a: str, b: str) -> None:
        self.adjacency[a].discard(b)
        self.adjacency[b].discard(a)
        self.edge_scopes.pop(_edge_key(a, b), None)

    def neighbors(self, peer_id: str) -> list[str]:
        return sorted(self.adjacency[peer_id])

    def degree(self, peer_id: str) -> int:
        return len(self.adjacency[peer_id])

    def edges(self) -> list[tuple[str, str]]:
        return sorted(self.edge_scopes)

    def edge_count(self) -> int:
        return len(self.edge_scopes)

    def scope_of(self, a: str, b: str) -> Optional[EdgeScope]:
        return self.edge_scopes[_edge_key(a, b)]

    def scope_counts(self) -> dict[EdgeScope, int]:
        counts = {scope: 0 for scope in EdgeScope}
        for scope in self.edge_scopes.values():
            if scope is not None:
                counts[scope] += 1
        return counts


def _edge_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a < b else (b, a)


def _speed_lookup(torrent: TorrentRecord, speeds: Optional[SpeedModel]) -> dict[str, float]:
    table = {}
    for p in torrent.peers:
        if speeds is not None:
            table[p.peer_id] = speeds.speed_of(p)
        elif p.uplink_kbps is not None:
            table[p.peer_id] = p.uplink_kbps
        else:
            raise ValueError(f"peer {p.peer_id} has no resolved uplink speed")
    return table


def random_selections(
    torrent: TorrentRecord, W: int, seed: int
) -> dict[str, list[str]]:
    """Each node's uniform draw of min(W, n-1) distinct neighbors.

    This is the shared base draw: family policies filter exactly these
    selections, which keeps random and locality runs seed-comparable.
    """
    ids = [p.peer_id for p in torrent.peers]
    n = len(ids)
    draws = min(W, n - 1)
    rng = np.random.default_rng(seed)
    selections: dict[str, list[str]] = {}
    for i, pid in enumerate(ids):
        others = ids[:i] + ids[i + 1 :]
        if draws <= 0:
            selections[pid] = []
            continue
        picks = rng.choice(len(others), size=draws, replace=False)
        selections[pid] = [others[j] for j in sorted(picks)]
    return selections


def build_random(torrent: TorrentRecord, W: int, seed: int) -> OverlayGraph:
    """Union of every node's random draw; incoming selections are accepted."""
    selections = random_selections(torrent, W, seed)
    return _union_graph(torrent, selections)


def build_family(
    torrent: TorrentRecord,
    policy: OverlayPolicy,
    speeds: Optional[SpeedModel],
    W: int,
    seed: int,
    home_view: Optional[Mapping[str, str]] = None,
) -> OverlayGraph:
    """Filter each node's random draw per the Locality(delta, mu) rules."""
    if policy.is_random:
        return build_random(torrent, W, seed)
    speed_of = _speed_lookup(torrent, speeds)
    label = dict(home_view) if home_view else {p.peer_id: p.isp_id for p in torrent.peers}
    selections = random_selections(torrent, W, seed)
    filtered: dict[str, list[str]] = {}
    by_isp: dict[str, list[str]] = {}
    for p in torrent.peers:
        by_isp.setdefault(label[p.peer_id], []).append(p.peer_id)
    for pid in sorted(selections):
        filtered[pid] = _filter_selection(
            pid, selections[pid], policy, speed_of, label, by_isp[label[pid]]
        )
    graph = _union_graph(torrent, filtered)
    if policy.mu is not None:
        _enforce_remote_cap(graph, policy.mu, speed_of, label)
    return graph


def _filter_selection(
    pid: str,
    selection: list[str],
    policy: OverlayPolicy,
    speed_of: Mapping[str, float],
    label: Mapping[str, str],
    same_isp: list[str],
) -> list[str]:
    home = label[pid]
    kept = set(selection)
    # Fastest unused local first; slowest remote out first.
    unused_locals = sorted(
        (w for w in same_isp if w != pid and w not in kept),
        key=lambda w: (-speed_of[w], w),
    )
    remotes = sorted(
        (u for u in kept if label[u] != home),
        key=lambda u: (speed_of[u], u),
    )
    mu = math.inf if policy.mu is None else policy.mu
    while len(remotes) > mu:
        u = remotes.pop(0)
        kept.discard(u)
        if unused_locals:
            kept.add(unused_locals.pop(0))
    for u in remotes:
        if not unused_locals:
            break
        w = unused_locals[0]
        # Switch tolerates a speed sacrifice below delta (strict inequality).
        if 1.0 - speed_of[w] / speed_of[u] < policy.delta:
            kept.discard(u)
            kept.add(unused_locals.pop(0))
        else:
            break
    return sorted(kept)


def _union_graph(torrent: TorrentRecord, selections: Mapping[str, list[str]]) -> OverlayGraph:
    graph = OverlayGraph(torrent_id=torrent.torrent_id, peers=torrent.peers)
    if torrent.size < 2:
        graph.singleton = True
        return graph
    for pid in sorted(selections):
        for other in selections[pid]:
            graph.add_edge(pid, other)
    return graph


def _enforce_remote_cap(
    graph: OverlayGraph,
    mu: int,
    speed_of: Mapping[str, float],
    label: Mapping[str, str],
) -> None:
    """Prune remote edges, slowest neighbor first, until every node holds <= mu.

    Edges whose removal would isolate the counterpart are pruned last; the cap
    still wins if only those remain.
    """

    def remote_neighbors(pid: str) -> list[str]:
        return [u for u in graph.adjacency[pid] if label[u] != label[pid]]

    for pid in sorted(graph.adjacency):
        over = len(remote_neighbors(pid)) - mu
        while over > 0:
            candidates = sorted(remote_neighbors(pid), key=lambda u: (speed_of[u], u))
            pick = next(
                (u for u in candidates if graph.degree(u) > 1), candidates[0]
            )
            graph.remove_edge(pid, pick)
            over -= 1


def classify_edges(graph: OverlayGraph, geo: Mapping[str, str]) -> OverlayGraph:
    """Tag every edge internal / peering / transit using the simplified routing:
    same ISP, same country over unpaid peering, different country over transit."""
    peer_map = graph.peer_map
    for a, b in graph.edges():
        pa, pb = peer_map[a], peer_map[b]
        if pa.isp_id == pb.isp_id:
            scope = EdgeScope.INTERNAL
        elif geo[pa.isp_id] == geo[pb.isp_id]:
            scope = EdgeScope.PEERING
        else:
            scope = EdgeScope.TRANSIT
        graph.edge_scopes[_edge_key(a, b)] = scope
    return graph


def write_edge_list(graph: OverlayGraph, path) -> None:
    """Edge-list CSV: torrent_id, peer_a, peer_b, scope."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("torrent_id,peer_a,peer_b,scope\n")
        for a, b in graph.edges():
            scope = graph.edge_scopes[_edge_key(a, b)]
            fh.write(f"{graph.torrent_id},{a},{b},{scope.value if scope else ''}\n")
