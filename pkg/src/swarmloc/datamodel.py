"""Domain records, dataset ingestion, synthetic workloads and seeder-role assignment.

Speeds are uplink kilobits per second throughout. All records are immutable
after construction; peers inside a torrent are kept sorted by peer_id so every
downstream computation is order-independent.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

KBPS_TO_BYTES_PER_SEC = 125.0  # 1 kbit/s = 125 bytes/s


class ParseError(ValueError):
    """Malformed input file; carries the offending path and line number."""

    def __init__(self, path, lineno: int, message: str):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = str(path)
        self.lineno = lineno


class Role(enum.Enum):
    SEEDER = "seeder"
    LEECHER = "leecher"

    @classmethod
    def parse(cls, token: str) -> "Role":
        t = token.strip().lower()
        for role in cls:
            if t == role.value:
                return role
        raise ValueError(f"unknown role token {token!r}")


@dataclass(frozen=True)
class Peer:
    """One client in one torrent."""

    peer_id: str
    isp_id: str
    country_code: str
    uplink_kbps: Optional[float] = None
    role: Optional[Role] = None
    completion_chunks: int = 0

    def __post_init__(self):
        if self.uplink_kbps is not None and not self.uplink_kbps > 0:
            raise ValueError(f"peer {self.peer_id}: uplink_kbps must be > 0")
        if self.completion_chunks < 0:
            raise ValueError(f"peer {self.peer_id}: negative completion_chunks")


@dataclass(frozen=True)
class TorrentRecord:
    """A swarm: torrent id plus its (sorted, duplicate-free) peer set."""

    torrent_id: str
    peers: tuple[Peer, ...]

    def __post_init__(self):
        if not self.peers:
            raise ValueError(f"torrent {self.torrent_id}: empty peer set")
        ordered = tuple(sorted(self.peers, key=lambda p: p.peer_id))
        seen = set()
        for p in ordered:
            if p.peer_id in seen:
                raise ValueError(
                    f"torrent {self.torrent_id}: duplicate peer {p.peer_id}"
                )
            seen.add(p.peer_id)
        object.__setattr__(self, "peers", ordered)

    @property
    def size(self) -> int:
        return len(self.peers)

    @property
    def seeder_count(self) -> int:
        return sum(1 for p in self.peers if p.role is Role.SEEDER)

    @property
    def leecher_count(self) -> int:
        return sum(1 for p in self.peers if p.role is Role.LEECHER)

    def local_count(self, isp_id: str) -> int:
        return sum(1 for p in self.peers if p.isp_id == isp_id)


def _build_isp_index(torrents: Sequence[TorrentRecord]) -> dict[str, dict[str, int]]:
    index: dict[str, dict[str, int]] = {}
    for t in torrents:
        for p in t.peers:
            index.setdefault(p.isp_id, {})
            index[p.isp_id][t.torrent_id] = index[p.isp_id].get(t.torrent_id, 0) + 1
    return index


@dataclass(frozen=True)
class Dataset:
    """All torrents plus the isp -> per-torrent local-peer-count index."""

    torrents: tuple[TorrentRecord, ...]
    isp_index: dict[str, dict[str, int]] = field(default_factory=dict)

    def __post_init__(self):
        ordered = tuple(sorted(self.torrents, key=lambda t: t.torrent_id))
        seen = set()
        for t in ordered:
            if t.torrent_id in seen:
                raise ValueError(f"duplicate torrent_id {t.torrent_id}")
            seen.add(t.torrent_id)
        object.__setattr__(self, "torrents", ordered)
        object.__setattr__(self, "isp_index", _build_isp_index(ordered))
        object.__setattr__(self, "_by_id", {t.torrent_id: t for t in ordered})

    def torrent(self, torrent_id: str) -> TorrentRecord:
        try:
            return self._by_id[torrent_id]
        except KeyError:
            raise KeyError(f"unknown torrent {torrent_id!r}") from None

    def isps(self) -> list[str]:
        return sorted(self.isp_index)

    def torrents_of_isp(self, isp_id: str) -> list[TorrentRecord]:
        """T(A): torrents with at least one peer in the ISP."""
        if isp_id not in self.isp_index:
            raise KeyError(f"unknown isp_id {isp_id!r}")
        ids = self.isp_index[isp_id]
        return [t for t in self.torrents if t.torrent_id in ids]

    def isp_population(self, isp_id: str) -> int:
        """|V(A)|: total peers of the ISP summed over its torrents."""
        return sum(self.isp_index.get(isp_id, {}).values())


@dataclass(frozen=True)
class SpeedModel:
    """Per-ISP median uplink speeds, optionally overridden per peer."""

    per_isp_median_kbps: Mapping[str, float]
    per_peer_kbps: Optional[Mapping[str, float]] = None

    def __post_init__(self):
        for isp, v in self.per_isp_median_kbps.items():
            if not v > 0:
                raise ValueError(f"isp {isp}: speed must be > 0")
        if self.per_peer_kbps is not None:
            for pid, v in self.per_peer_kbps.items():
                if not v > 0:
                    raise ValueError(f"peer {pid}: speed must be > 0")

    def isp_speed(self, isp_id: str) -> float:
        try:
            return self.per_isp_median_kbps[isp_id]
        except KeyError:
            raise KeyError(f"no speed for isp {isp_id!r}") from None

    def speed_of(self, peer: Peer) -> float:
        if self.per_peer_kbps is not None and peer.peer_id in self.per_peer_kbps:
            return self.per_peer_kbps[peer.peer_id]
        return self.isp_speed(peer.isp_id)

    def missing_isps(self, dataset: Dataset) -> list[str]:
        out = []
        for isp in dataset.isps():
            if isp in self.per_isp_median_kbps:
                continue
            # Per-peer tables may cover an ISP completely.
            covered = self.per_peer_kbps or {}
            peers = [
                p
                for t in dataset.torrents
                for p in t.peers
                if p.isp_id == isp and p.peer_id not in covered
            ]
            if peers:
                out.append(isp)
        return out


@dataclass(frozen=True)
class ChunkParams:
    """File/chunk geometry and unchoke schedule parameters."""

    total_chunks_C: int = 10_000
    chunk_size_sigma_bytes: int = 32_768
    unchoke_interval_T_sec: float = 10.0
    regular_slots_k: int = 4
    neighborhood_W: int = 40

    def __post_init__(self):
        if self.total_chunks_C <= 0 or self.chunk_size_sigma_bytes <= 0:
            raise ValueError("chunk counts and sizes must be positive")
        if self.unchoke_interval_T_sec <= 0:
            raise ValueError("unchoke interval must be positive")
        if self.regular_slots_k < 1:
            raise ValueError("regular_slots_k must be >= 1")
        if self.neighborhood_W <= self.regular_slots_k:
            raise ValueError("neighborhood_W must exceed regular_slots_k")


# ---------------------------------------------------------------------------
# File ingestion.  All tables are comma-separated UTF-8 with '#' comments.


def _records(path) -> Iterable[tuple[int, list[str]]]:
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            yield lineno, [f.strip() for f in line.split(",")]


def load_demographics(path) -> Dataset:
    """Parse a demographics table: torrent_id, peer_id, isp_id, country[, role]."""
    by_torrent: dict[str, list[Peer]] = {}
    seen: set[tuple[str, str]] = set()
    for lineno, fields in _records(path):
        if len(fields) not in (4, 5):
            raise ParseError(path, lineno, f"expected 4 or 5 fields, got {len(fields)}")
        tid, pid, isp, country = fields[:4]
        if not tid or not pid or not isp or not country:
            raise ParseError(path, lineno, "empty field")
        role = None
        if len(fields) == 5 and fields[4]:
            try:
                role = Role.parse(fields[4])
            except ValueError as exc:
                raise ParseError(path, lineno, str(exc)) from None
        if (tid, pid) in seen:
            raise ParseError(path, lineno, f"duplicate peer {pid} in torrent {tid}")
        seen.add((tid, pid))
        by_torrent.setdefault(tid, []).append(
            Peer(peer_id=pid, isp_id=isp, country_code=country, role=role)
        )
    if not by_torrent:
        raise ParseError(path, 0, "no records")
    torrents = tuple(TorrentRecord(tid, tuple(peers)) for tid, peers in by_torrent.items())
    return Dataset(torrents=torrents)


def write_demographics(dataset: Dataset, path) -> None:
    """Inverse of load_demographics; canonical (torrent_id, peer_id) order."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# torrent_id, peer_id, isp_id, country_code, role\n")
        for t in dataset.torrents:
            for p in t.peers:
                role = p.role.value if p.role is not None else ""
                fh.write(f"{t.torrent_id},{p.peer_id},{p.isp_id},{p.country_code},{role}\n")


def load_speed_model(isp_path, per_peer_path=None) -> SpeedModel:
    """Parse 'isp_id, median_uplink_kbps' plus an optional per-peer table."""
    medians: dict[str, float] = {}
    for lineno, fields in _records(isp_path):
        if len(fields) != 2:
            raise ParseError(isp_path, lineno, f"expected 2 fields, got {len(fields)}")
        try:
            medians[fields[0]] = float(fields[1])
        except ValueError:
            raise ParseError(isp_path, lineno, f"bad speed {fields[1]!r}") from None
    per_peer = None
    if per_peer_path is not None:
        per_peer = {}
        for lineno, fields in _records(per_peer_path):
            if len(fields) != 2:
                raise ParseError(per_peer_path, lineno, f"expected 2 fields, got {len(fields)}")
            try:
                per_peer[fields[0]] = float(fields[1])
            except ValueError:
                raise ParseError(per_peer_path, lineno, f"bad speed {fields[1]!r}") from None
    return SpeedModel(per_isp_median_kbps=medians, per_peer_kbps=per_peer)


def write_speed_model(model: SpeedModel, isp_path, per_peer_path=None) -> None:
    with open(isp_path, "w", encoding="utf-8") as fh:
        fh.write("# isp_id, median_uplink_kbps\n")
        for isp in sorted(model.per_isp_median_kbps):
            fh.write(f"{isp},{model.per_isp_median_kbps[isp]:.6f}\n")
    if per_peer_path is not None and model.per_peer_kbps is not None:
        with open(per_peer_path, "w", encoding="utf-8") as fh:
            fh.write("# peer_id, uplink_kbps\n")
            for pid in sorted(model.per_peer_kbps):
                fh.write(f"{pid},{model.per_peer_kbps[pid]:.6f}\n")


def load_ratios(path) -> dict[str, tuple[int, int]]:
    """Parse 'torrent_id, seeders, leechers'."""
    out: dict[str, tuple[int, int]] = {}
    for lineno, fields in _records(path):
        if len(fields) != 3:
            raise ParseError(path, lineno, f"expected 3 fields, got {len(fields)}")
        try:
            out[fields[0]] = (int(fields[1]), int(fields[2]))
        except ValueError:
            raise ParseError(path, lineno, "seeder/leecher counts must be integers") from None
    return out


def write_ratios(ratios: Mapping[str, tuple[int, int]], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# torrent_id, seeders, leechers\n")
        for tid in sorted(ratios):
            s, l = ratios[tid]
            fh.write(f"{tid},{s},{l}\n")


def apply_speeds(dataset: Dataset, model: SpeedModel) -> Dataset:
    """Resolve every peer's uplink from the speed model (per-peer values win)."""
    missing = model.missing_isps(dataset)
    if missing:
        raise ValueError("no speed for ISPs: " + ", ".join(sorted(missing)))
    torrents = []
    for t in dataset.torrents:
        peers = tuple(replace(p, uplink_kbps=model.speed_of(p)) for p in t.peers)
        torrents.append(TorrentRecord(t.torrent_id, peers))
    return Dataset(torrents=tuple(torrents))


def isp_countries(dataset: Dataset) -> dict[str, str]:
    """Canonical ISP -> country map (first peer in canonical order wins)."""
    geo: dict[str, str] = {}
    for t in dataset.torrents:
        for p in t.peers:
            geo.setdefault(p.isp_id, p.country_code)
    return geo


def speed_table(peers: Iterable[Peer], speeds=None) -> dict[str, float]:
    """Resolve peer uplinks from a SpeedModel, a peer->kbps mapping, or the
    peers' own resolved fields when speeds is None."""
    table: dict[str, float] = {}
    for p in peers:
        if isinstance(speeds, SpeedModel):
            table[p.peer_id] = speeds.speed_of(p)
        elif speeds is not None:
            table[p.peer_id] = float(speeds[p.peer_id])
        elif p.uplink_kbps is not None:
            table[p.peer_id] = p.uplink_kbps
        else:
            raise ValueError(f"peer {p.peer_id} has no resolved uplink speed")
    return table


# ---------------------------------------------------------------------------
# Synthetic workloads.


@dataclass(frozen=True)
class SizeDistribution:
    """Torrent-size law: 'fixed' (point mass), 'uniform' range, or 'powerlaw'.

    Power-law sizes are floor-discretized truncated Pareto samples with tail
    exponent `exponent` on [lo, hi].
    """

    kind: str
    lo: int
    hi: int
    exponent: float = 2.0

    def __post_init__(self):
        if self.kind not in ("fixed", "uniform", "powerlaw"):
            raise ValueError(f"unknown size distribution {self.kind!r}")
        if self.lo < 1 or self.hi < self.lo:
            raise ValueError("size range must satisfy 1 <= lo <= hi")
        if self.kind == "powerlaw" and self.exponent <= 1.0:
            raise ValueError("power-law exponent must exceed 1")

    @classmethod
    def fixed(cls, n: int) -> "SizeDistribution":
        return cls("fixed", n, n)

    @classmethod
    def uniform(cls, lo: int, hi: int) -> "SizeDistribution":
        return cls("uniform", lo, hi)

    @classmethod
    def powerlaw(cls, exponent: float, lo: int, hi: int) -> "SizeDistribution":
        return cls("powerlaw", lo, hi, exponent)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "fixed":
            return np.full(n, self.lo, dtype=int)
        if self.kind == "uniform":
            return rng.integers(self.lo, self.hi + 1, size=n)
        return np.floor(self._pareto_inverse(rng.random(n))).astype(int)

    def _pareto_inverse(self, u: np.ndarray) -> np.ndarray:
        # Inverse CDF of a Pareto(alpha-1 tail) truncated to [lo, hi+1).
        a = self.exponent - 1.0
        lo, hi = float(self.lo), float(self.hi) + 1.0
        norm = 1.0 - (lo / hi) ** a
        return lo / (1.0 - u * norm) ** (1.0 / a)

    def cdf(self, s: int) -> float:
        """P(size <= s) of the discretized law; the analytic test target."""
        if s < self.lo:
            return 0.0
        if s >= self.hi:
            return 1.0
        if self.kind == "fixed":
            return 1.0
        if self.kind == "uniform":
            return (s - self.lo + 1) / (self.hi - self.lo + 1)
        a = self.exponent - 1.0
        lo, hi = float(self.lo), float(self.hi) + 1.0
        norm = 1.0 - (lo / hi) ** a
        return (1.0 - (lo / (s + 1.0)) ** a) / norm


@dataclass(frozen=True)
class SyntheticSpec:
    """Shape of a generated dataset."""

    n_torrents: int
    sizes: SizeDistribution
    n_isps: int
    isp_skew: float = 0.0  # Zipf exponent over ISP popularity; 0 = uniform
    n_countries: int = 0  # 0 = one country per ISP
    speed_lo_kbps: float = 300.0
    speed_hi_kbps: float = 3000.0
    seeder_fraction: float = 0.25

    def __post_init__(self):
        if self.n_torrents <= 0 or self.n_isps <= 0:
            raise ValueError("torrent and ISP counts must be positive")
        if self.isp_skew < 0:
            raise ValueError("isp_skew must be >= 0")
        if self.n_countries < 0 or self.n_countries > self.n_isps:
            raise ValueError("n_countries must lie in [0, n_isps]")
        if not (0 < self.speed_lo_kbps <= self.speed_hi_kbps):
            raise ValueError("speed range must satisfy 0 < lo <= hi")
        if not (0.0 <= self.seeder_fraction <= 1.0):
            raise ValueError("seeder_fraction must lie in [0, 1]")


def _isp_labels(n: int) -> list[str]:
    width = max(2, len(str(n - 1)))
    return [f"isp{idx:0{width}d}" for idx in range(n)]


def generate_synthetic(spec: SyntheticSpec, seed: int) -> Dataset:
    """Deterministic synthetic demographics for a (spec, seed) pair."""
    rng = np.random.default_rng(seed)
    isps = _isp_labels(spec.n_isps)
    n_countries = spec.n_countries or spec.n_isps
    countries = [f"C{idx % n_countries:02d}" for idx in range(spec.n_isps)]
    weights = np.array([1.0 / (r + 1) ** spec.isp_skew for r in range(spec.n_isps)])
    weights /= weights.sum()
    sizes = spec.sizes.sample(rng, spec.n_torrents)
    torrents = []
    t_width = max(3, len(str(spec.n_torrents - 1)))
    for ti in range(spec.n_torrents):
        size = int(sizes[ti])
        picks = rng.choice(spec.n_isps, size=size, p=weights)
        peers = tuple(
            Peer(
                peer_id=f"t{ti:0{t_width}d}p{pi:05d}",
                isp_id=isps[picks[pi]],
                country_code=countries[picks[pi]],
            )
            for pi in range(size)
        )
        torrents.append(TorrentRecord(f"t{ti:0{t_width}d}", peers))
    return Dataset(torrents=tuple(torrents))


def synthetic_speed_model(spec: SyntheticSpec, seed: int) -> SpeedModel:
    """Per-ISP medians drawn uniformly from the configured speed range."""
    rng = np.random.default_rng(seed)
    isps = _isp_labels(spec.n_isps)
    speeds = rng.uniform(spec.speed_lo_kbps, spec.speed_hi_kbps, size=spec.n_isps)
    return SpeedModel(per_isp_median_kbps={i: float(s) for i, s in zip(isps, speeds)})


def synthetic_ratios(spec: SyntheticSpec, dataset: Dataset) -> dict[str, tuple[int, int]]:
    s = int(round(spec.seeder_fraction * 100))
    return {t.torrent_id: (s, 100 - s) for t in dataset.torrents}


def assign_roles(
    dataset: Dataset,
    ratios: Mapping[str, tuple[int, int]],
    seed: int,
) -> Dataset:
    """Make each peer a seeder with probability seeders/(seeders+leechers).

    The ratio is folded into a probability so values above 1:1 stay valid.
    Deterministic for a given seed; iteration follows canonical peer order.
    """
    for t in dataset.torrents:
        if t.torrent_id not in ratios:
            raise ValueError(f"no seeder/leecher ratio for torrent {t.torrent_id}")
        s, l = ratios[t.torrent_id]
        if s < 0 or l < 0 or s + l <= 0:
            raise ValueError(f"torrent {t.torrent_id}: ratio counts must be >= 0 and sum > 0")
    rng = np.random.default_rng(seed)
    torrents = []
    for t in dataset.torrents:
        s, l = ratios[t.torrent_id]
        p_seed = s / (s + l)
        draws = rng.random(len(t.peers))
        peers = tuple(
            replace(p, role=Role.SEEDER if draws[i] < p_seed else Role.LEECHER)
            for i, p in enumerate(t.peers)
        )
        torrents.append(TorrentRecord(t.torrent_id, peers))
    return Dataset(torrents=tuple(torrents))
