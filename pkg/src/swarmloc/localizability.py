"""Inherent localizability: the in-ISP share of a torrent's speed-compatible peers.

The metric is ISP-granular by definition, so per-peer speed tables collapse to
the per-ISP medians here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .datamodel import Dataset, SpeedModel


@dataclass(frozen=True)
class LocalizabilityQuery:
    """Which ISP to score, the speed band half-width q, and an optional
    replacement speed used by what-if sweeps."""

    isp_id: str
    q: float = 0.25
    speed_override_kbps: Optional[float] = None

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise ValueError("q must lie in [0, 1]")
        if self.speed_override_kbps is not None and not self.speed_override_kbps > 0:
            raise ValueError("speed override must be > 0")


def indicator(u_a: float, u_other: float, q: float) -> int:
    """1 iff u_other falls inside [u_a*(1-q), u_a*(1+q)], inclusive ends."""
    return 1 if u_a * (1.0 - q) <= u_other <= u_a * (1.0 + q) else 0


def torrent_localizability(
    dataset: Dataset,
    speeds: SpeedModel,
    torrent_id: str,
    query: LocalizabilityQuery,
) -> float:
    """|V(A,T)| over the total peers of ISPs whose speed is inside A's band."""
    t = dataset.torrent(torrent_id)
    per_isp: dict[str, int] = {}
    for p in t.peers:
        per_isp[p.isp_id] = per_isp.get(p.isp_id, 0) + 1
    if query.isp_id not in per_isp:
        raise ValueError(f"isp {query.isp_id!r} has no peers in torrent {torrent_id}")
    u_a = query.speed_override_kbps
    if u_a is None:
        u_a = speeds.isp_speed(query.isp_id)
    denom = 0
    for isp, count in per_isp.items():
        u_other = u_a if isp == query.isp_id else speeds.isp_speed(isp)
        denom += count * indicator(u_a, u_other, query.q)
    return per_isp[query.isp_id] / denom


def isp_localizability(
    dataset: Dataset,
    speeds: SpeedModel,
    query: LocalizabilityQuery,
) -> float:
    """Per-torrent values weighted by the ISP's peer share |V(A,T)|/|V(A)|."""
    counts = dataset.isp_index.get(query.isp_id)
    if not counts:
        raise ValueError(f"unknown isp {query.isp_id!r}")
    total = sum(counts.values())
    value = 0.0
    for t in dataset.torrents_of_isp(query.isp_id):
        weight = counts[t.torrent_id] / total
        value += weight * torrent_localizability(dataset, speeds, t.torrent_id, query)
    return value


def speed_sweep(
    dataset: Dataset,
    speeds: SpeedModel,
    isp_id: str,
    q: float,
    grid: Sequence[float],
) -> list[tuple[float, float]]:
    """Localizability at each candidate speed, all other ISP speeds fixed.

    Non-monotone curves are expected: raising the speed can pull previously
    out-of-band remote ISPs into unchoke range.
    """
    out = []
    for speed in grid:
        query = LocalizabilityQuery(isp_id=isp_id, q=q, speed_override_kbps=float(speed))
        out.append((float(speed), isp_localizability(dataset, speeds, query)))
    return out
