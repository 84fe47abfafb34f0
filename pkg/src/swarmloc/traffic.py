"""Directed rate matrices from overlays and matchings, plus the ISP metrics.

A leecher splits its uplink into k+1 shares: one per matched (regular-unchoke)
partner, the remainder pooled into the optimistic slot and spread evenly over
choked neighbors. Seeders split their full uplink over leecher neighbors,
uniformly or proportionally to neighbor speed. Every uploader's outgoing rates
therefore sum to exactly its uplink.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Sequence

from .datamodel import Dataset, Peer, Role, speed_table
from .matching import Matching, MatchingProblem, solve_bmatching, tiebreak_speeds
from .overlay import OverlayGraph
from .seeding import derive_seed


class SeederPolicy(Enum):
    UNIFORM = "uniform"
    PROPORTIONAL = "proportional"


@dataclass
class RateMatrix:
    """Directed (from_peer, to_peer) -> kbps entries for one torrent."""

    torrent_id: str
    peers: dict[str, Peer]
    entries: dict[tuple[str, str], float] = field(default_factory=dict)
    stranded_seeders: tuple[str, ...] = ()

    def add(self, src: str, dst: str, kbps: float) -> None:
        key = (src, dst)
        self.entries[key] = self.entries.get(key, 0.0) + kbps

    def outgoing_kbps(self, peer_id: str) -> float:
        return sum(r for (src, _), r in self.entries.items() if src == peer_id)

    def incoming_kbps(self, peer_id: str) -> float:
        return sum(r for (_, dst), r in self.entries.items() if dst == peer_id)

    def total_kbps(self) -> float:
        return sum(self.entries.values())


def leecher_rates(
    graph: OverlayGraph,
    matching: Matching,
    speeds,
    k: int,
) -> dict[tuple[str, str], float]:
    """Leecher upload rates: U/(k+1) per match, the rest optimistically spread.

    A node matched m <= k times pools its (k - m + 1) unallocated shares into
    the optimistic slot, split evenly over choked neighbors; with no choked
    neighbors the pool goes evenly to the matches instead. Output always sums
    to U(v) per leecher with at least one neighbor.
    """
    table = speed_table(graph.peers, speeds)
    partners = matching.partners_map()
    rates: dict[tuple[str, str], float] = {}
    for p in graph.peers:
        if p.role is not Role.LEECHER:
            continue
        v = p.peer_id
        neighborhood = graph.adjacency[v]
        if not neighborhood:
            continue
        u_v = table[v]
        matched = sorted(partners.get(v, set()) & neighborhood)
        share = u_v / (k + 1)
        for u in matched:
            rates[(v, u)] = rates.get((v, u), 0.0) + share
        pool = (k - len(matched) + 1) * share
        choked = sorted(neighborhood - set(matched))
        targets = choked if choked else matched
        each = pool / len(targets)
        for u in targets:
            rates[(v, u)] = rates.get((v, u), 0.0) + each
    return rates


def seeder_rates(
    graph: OverlayGraph,
    speeds,
    policy: SeederPolicy = SeederPolicy.PROPORTIONAL,
) -> tuple[dict[tuple[str, str], float], list[str]]:
    """Seeder upload rates over leecher neighbors plus the stranded-seeder list.

    Uniform gives each leecher neighbor an equal share; Proportional weights
    by the neighbor's uplink. A seeder with no leecher neighbors contributes
    nothing and is flagged.
    """
    table = speed_table(graph.peers, speeds)
    peer_map = graph.peer_map
    rates: dict[tuple[str, str], float] = {}
    stranded = []
    for p in graph.peers:
        if p.role is not Role.SEEDER:
            continue
        s = p.peer_id
        targets = sorted(
            u for u in graph.adjacency[s] if peer_map[u].role is Role.LEECHER
        )
        if not targets:
            if graph.adjacency[s]:
                stranded.append(s)
            continue
        u_s = table[s]
        if policy is SeederPolicy.UNIFORM:
            each = u_s / len(targets)
            for u in targets:
                rates[(s, u)] = rates.get((s, u), 0.0) + each
        else:
            total_speed = sum(table[u] for u in targets)
            for u in targets:
                rates[(s, u)] = rates.get((s, u), 0.0) + u_s * table[u] / total_speed
    return rates, stranded


def leecher_matching(
    graph: OverlayGraph, speeds, k: int, tiebreak_seed: int = 0
) -> Matching:
    """Stable b-matching over the graph's leecher-leecher edges."""
    peer_map = graph.peer_map
    table = speed_table(graph.peers, speeds)
    leechers = tuple(
        sorted(p.peer_id for p in graph.peers if p.role is Role.LEECHER)
    )
    allowed = {
        v: frozenset(
            u for u in graph.adjacency[v] if peer_map[u].role is Role.LEECHER
        )
        for v in leechers
    }
    prefs = tiebreak_speeds(
        {v: table[v] for v in leechers}, seed=derive_seed(tiebreak_seed, "tiebreak")
    )
    problem = MatchingProblem(nodes=leechers, allowed=allowed, slots_b=k, preference=prefs)
    return solve_bmatching(problem)


def torrent_matrix(
    graph: OverlayGraph,
    speeds,
    k: int,
    seeder_policy: SeederPolicy = SeederPolicy.PROPORTIONAL,
    tiebreak_seed: int = 0,
) -> RateMatrix:
    """Full traffic matrix for one torrent: solve the leecher matching, then
    combine leecher and seeder contributions."""
    for p in graph.peers:
        if p.role is None:
            raise ValueError(f"peer {p.peer_id} has no assigned role")
    matching = leecher_matching(graph, speeds, k, tiebreak_seed)
    matrix = RateMatrix(torrent_id=graph.torrent_id, peers=graph.peer_map)
    for (src, dst), r in leecher_rates(graph, matching, speeds, k).items():
        matrix.add(src, dst, r)
    srates, stranded = seeder_rates(graph, speeds, seeder_policy)
    for (src, dst), r in srates.items():
        matrix.add(src, dst, r)
    matrix.stranded_seeders = tuple(stranded)
    return matrix


# ---------------------------------------------------------------------------
# Aggregation and metrics.


@dataclass(frozen=True)
class TorrentScopeRow:
    torrent_id: str
    internal_kbps: float
    peering_kbps: float
    transit_kbps: float


@dataclass(frozen=True)
class TrafficReport:
    """Scope aggregates for one home ISP plus per-leecher download rates."""

    home_isp: str
    internal_kbps: float
    peering_kbps: float
    transit_kbps: float
    # (torrent_id, peer_id) -> download rate of home-ISP leechers
    leecher_downloads: Mapping[tuple[str, str], float]
    per_torrent: tuple[TorrentScopeRow, ...]
    stranded_seeders: tuple[tuple[str, str], ...] = ()

    def download_rates(self) -> list[float]:
        return [self.leecher_downloads[key] for key in sorted(self.leecher_downloads)]


def aggregate(
    matrices: Sequence[RateMatrix],
    home_isp: str,
    geo: Mapping[str, str],
) -> TrafficReport:
    """Bucket every directed rate touching the home ISP into a scope.

    Both directions crossing the boundary count (upload and download), and
    internal entries count once per direction.
    """
    if home_isp not in geo:
        raise ValueError(f"unknown home ISP {home_isp!r}")
    totals = {"internal": 0.0, "peering": 0.0, "transit": 0.0}
    downloads: dict[tuple[str, str], float] = {}
    per_torrent = []
    stranded = []
    home_country = geo[home_isp]
    for matrix in matrices:
        row = {"internal": 0.0, "peering": 0.0, "transit": 0.0}
        for pid, peer in matrix.peers.items():
            if peer.isp_id == home_isp and peer.role is Role.LEECHER:
                downloads.setdefault((matrix.torrent_id, pid), 0.0)
        for (src, dst), rate in matrix.entries.items():
            ps, pd = matrix.peers[src], matrix.peers[dst]
            src_home = ps.isp_id == home_isp
            dst_home = pd.isp_id == home_isp
            if not (src_home or dst_home):
                continue
            if src_home and dst_home:
                row["internal"] += rate
            else:
                other = pd.isp_id if src_home else ps.isp_id
                if geo[other] == home_country:
                    row["peering"] += rate
                else:
                    row["transit"] += rate
            if dst_home and pd.role is Role.LEECHER:
                key = (matrix.torrent_id, dst)
                downloads[key] = downloads.get(key, 0.0) + rate
        per_torrent.append(
            TorrentScopeRow(matrix.torrent_id, row["internal"], row["peering"], row["transit"])
        )
        for key in totals:
            totals[key] += row[key]
        for s in matrix.stranded_seeders:
            stranded.append((matrix.torrent_id, s))
    return TrafficReport(
        home_isp=home_isp,
        internal_kbps=totals["internal"],
        peering_kbps=totals["peering"],
        transit_kbps=totals["transit"],
        leecher_downloads=downloads,
        per_torrent=tuple(per_torrent),
        stranded_seeders=tuple(stranded),
    )


def nearest_rank(values: Sequence[float], percentile: float) -> float:
    """Nearest-rank percentile: element ceil(p*n) of the sorted vector."""
    if not values:
        raise ValueError("empty vector has no percentiles")
    if not 0 < percentile <= 1:
        raise ValueError("percentile must lie in (0, 1]")
    ordered = sorted(values)
    rank = math.ceil(percentile * len(ordered))
    return ordered[rank - 1]


def transit_reduction(
    report_policy: TrafficReport, report_random: TrafficReport
) -> Optional[float]:
    """Fractional transit saved versus Random; None when Random has no transit."""
    if report_random.transit_kbps <= 0.0:
        return None
    return (report_random.transit_kbps - report_policy.transit_kbps) / report_random.transit_kbps


def qos_reduction(
    rates_policy: Sequence[float],
    rates_random: Sequence[float],
    percentile: float = 0.5,
) -> Optional[float]:
    """Relative drop of the download-rate percentile versus Random.

    Negative values mean the policy sped users up."""
    q_random = nearest_rank(rates_random, percentile)
    if q_random <= 0.0:
        return None
    q_policy = nearest_rank(rates_policy, percentile)
    return (q_random - q_policy) / q_random


@dataclass(frozen=True)
class UnlocalizableReport:
    """How much transit concentrates in torrents touching few home-ISP nodes."""

    transit_share: float
    node_share: float
    # cumulative (transit fraction, node fraction) after each ranked torrent
    curve: tuple[tuple[float, float], ...]


def unlocalizable_analysis(
    dataset: Dataset,
    report: TrafficReport,
    home_isp: str,
    threshold: float = 0.9,
) -> UnlocalizableReport:
    """Rank torrents by transit contribution and accumulate the home-ISP node
    fraction participating in them until the transit threshold is reached."""
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    counts = dataset.isp_index.get(home_isp, {})
    total_nodes = sum(counts.values())
    total_transit = sum(row.transit_kbps for row in report.per_torrent)
    ranked = sorted(report.per_torrent, key=lambda r: (-r.transit_kbps, r.torrent_id))
    curve = []
    cum_transit = 0.0
    cum_nodes = 0
    answer = None
    for row in ranked:
        cum_transit += row.transit_kbps
        cum_nodes += counts.get(row.torrent_id, 0)
        t_frac = cum_transit / total_transit if total_transit > 0 else 0.0
        n_frac = cum_nodes / total_nodes if total_nodes > 0 else 0.0
        curve.append((t_frac, n_frac))
        if answer is None and total_transit > 0 and t_frac >= threshold:
            answer = (t_frac, n_frac)
    if answer is None:
        answer = (0.0, 0.0)
    return UnlocalizableReport(
        transit_share=answer[0], node_share=answer[1], curve=tuple(curve)
    )
