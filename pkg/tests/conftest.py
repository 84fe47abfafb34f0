"""Shared builders for compact in-memory datasets."""

from __future__ import annotations

import numpy as np
import pytest

from swarmloc.datamodel import Dataset, Peer, Role, TorrentRecord


def make_peer(pid, isp="ispA", country="US", speed=1000.0, role=None, chunks=0):
    return Peer(
        peer_id=pid,
        isp_id=isp,
        country_code=country,
        uplink_kbps=speed,
        role=role,
        completion_chunks=chunks,
    )


def build_torrent(tid, groups):
    """groups: list of (isp, country, count, speed, role) tuples."""
    peers = []
    for gi, (isp, country, count, speed, role) in enumerate(groups):
        for i in range(count):
            peers.append(
                make_peer(f"{tid}-{isp}-{i:03d}", isp, country, speed, role)
            )
    return TorrentRecord(tid, tuple(peers))


def random_dataset(rng: np.random.Generator, n_torrents=6, n_isps=4, n_countries=2,
                   size_lo=4, size_hi=24, leecher_frac=0.7):
    """Mixed-role dataset with per-peer speeds already resolved."""
    isps = [f"isp{i}" for i in range(n_isps)]
    countries = [f"C{i % n_countries}" for i in range(n_isps)]
    speeds = rng.uniform(200.0, 4000.0, n_isps)
    torrents = []
    for ti in range(n_torrents):
        size = int(rng.integers(size_lo, size_hi + 1))
        peers = []
        for pi in range(size):
            gi = int(rng.integers(0, n_isps))
            role = Role.LEECHER if rng.random() < leecher_frac else Role.SEEDER
            peers.append(
                Peer(
                    peer_id=f"t{ti}p{pi:03d}",
                    isp_id=isps[gi],
                    country_code=countries[gi],
                    uplink_kbps=float(speeds[gi] * rng.uniform(0.8, 1.2)),
                    role=role,
                )
            )
        torrents.append(TorrentRecord(f"t{ti}", tuple(peers)))
    return Dataset(torrents=tuple(torrents))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
