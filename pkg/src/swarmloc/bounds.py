"""Speed-agnostic localized-unchoke bounds for Random and Locality overlays.

The sparse-mode value for a Random overlay is the capped hypergeometric sum
sum_x min(x, k) * P(x locals among W draws); the dense-mode variant replaces
min(x, k) with k*x/W. Locality values depend only on the absolute number of
local peers. Per-ISP aggregates weight each torrent by its share of the ISP's
peers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .datamodel import ChunkParams, Dataset

# Exact rational arithmetic is cheap whenever the binomial coefficients have
# few factors: population below the limit, or a draw count that is small from
# either end. Only huge-population, mid-range draws fall back to lgamma.
_EXACT_POPULATION_LIMIT = 10_000
_EXACT_DRAW_LIMIT = 1_000


class Mode(enum.Enum):
    SPARSE = "sparse"
    DENSE = "dense"


@dataclass(frozen=True)
class BoundInputs:
    """Arguments of the per-torrent bound formulas."""

    torrent_size: int
    local_size: int
    W: int
    k: int

    def __post_init__(self):
        if not 1 <= self.local_size <= self.torrent_size:
            raise ValueError("need 1 <= local_size <= torrent_size")
        if self.W < 1:
            raise ValueError("W must be >= 1")
        if not 1 <= self.k < self.W:
            raise ValueError("need 1 <= k < W")

    @property
    def draws(self) -> int:
        # A node cannot draw more neighbors than other peers exist.
        return min(self.W, self.torrent_size - 1)


def hypergeom_support(population: int, successes: int, draws: int) -> range:
    lo = max(0, draws - (population - successes))
    return range(lo, min(draws, successes) + 1)


def _log_comb(n: int, r: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(r + 1) - math.lgamma(n - r + 1)


def hypergeom_pmf(x: int, population: int, successes: int, draws: int) -> float:
    """P(exactly x successes in `draws` draws without replacement)."""
    if population < 0 or not 0 <= successes <= population:
        raise ValueError("need 0 <= successes <= population")
    if not 0 <= draws <= population:
        raise ValueError("need 0 <= draws <= population")
    if x not in hypergeom_support(population, successes, draws):
        return 0.0
    if (
        population <= _EXACT_POPULATION_LIMIT
        or min(draws, population - draws) <= _EXACT_DRAW_LIMIT
    ):
        num = math.comb(successes, x) * math.comb(population - successes, draws - x)
        return float(Fraction(num, math.comb(population, draws)))
    log_p = (
        _log_comb(successes, x)
        + _log_comb(population - successes, draws - x)
        - _log_comb(population, draws)
    )
    return math.exp(log_p)


def expected_local_random_sparse(b: BoundInputs) -> float:
    """Expected localized unchokes for a Random overlay in sparse mode."""
    pop = b.torrent_size - 1
    succ = b.local_size - 1
    if succ == 0:
        return 0.0
    total = 0.0
    for x in hypergeom_support(pop, succ, b.draws):
        total += min(x, b.k) * hypergeom_pmf(x, pop, succ, b.draws)
    return total


def expected_local_random_dense(b: BoundInputs) -> float:
    """Dense-mode variant: min(x, k) replaced by k*x/W in the sparse sum."""
    pop = b.torrent_size - 1
    succ = b.local_size - 1
    if succ == 0 or pop == 0:
        return 0.0
    total = 0.0
    for x in hypergeom_support(pop, succ, b.draws):
        total += (b.k * x / b.W) * hypergeom_pmf(x, pop, succ, b.draws)
    # The sum telescopes to k/W times the hypergeometric mean.
    closed = b.k * b.draws * succ / (b.W * pop)
    assert math.isclose(total, closed, rel_tol=1e-9), (total, closed)
    return total


def expected_local_locality(b: BoundInputs, mode: Mode) -> float:
    """Locality gives every node as many locals as exist, padding with remotes."""
    locals_avail = b.local_size - 1
    if mode is Mode.SPARSE:
        return float(min(b.k, locals_avail))
    if locals_avail >= b.W:
        return float(b.k)
    return b.k * locals_avail / b.W


def sparse_condition_holds(b: BoundInputs) -> bool:
    """W*(local-1)/(torrent-1) >= k: Random localizes well in sparse mode."""
    pop = b.torrent_size - 1
    if pop == 0:
        return False
    return b.W * (b.local_size - 1) / pop >= b.k


def improvement_factor(b: BoundInputs, mode: Mode) -> float:
    """Locality-over-Random ratio of expected localized unchokes.

    Defined for local_size-1 >= k and torrent_size-1 >= W (the analyzed case);
    in dense mode the ratio reduces to (torrent-1)/(local-1) when the ISP can
    fill a whole neighborhood and (torrent-1)/W otherwise.
    """
    if b.local_size - 1 < b.k:
        raise ValueError("improvement factor needs local_size - 1 >= k")
    if b.torrent_size - 1 < b.W:
        raise ValueError("improvement factor needs torrent_size - 1 >= W")
    if mode is Mode.SPARSE:
        random_value = expected_local_random_sparse(b)
    else:
        random_value = expected_local_random_dense(b)
    return expected_local_locality(b, mode) / random_value


@dataclass(frozen=True)
class TorrentBoundRow:
    """One torrent's contribution to an ISP aggregate (values in units of k)."""

    torrent_id: str
    weight: float
    random_sparse: float
    random_dense: float
    locality_sparse: float
    locality_dense: float


@dataclass(frozen=True)
class IspBoundsReport:
    """Weighted per-ISP localized-unchoke fractions, normalized by k to [0, 1]."""

    isp_id: str
    random_sparse: float
    random_dense: float
    locality_sparse: float
    locality_dense: float
    improvement_sparse: Optional[float]
    improvement_dense: Optional[float]
    per_torrent: tuple[TorrentBoundRow, ...]


def isp_bounds(dataset: Dataset, isp_id: str, params: ChunkParams) -> IspBoundsReport:
    """Aggregate the four bounds over T(A), weighting by |V(A,T)|."""
    torrents = dataset.torrents_of_isp(isp_id)
    counts = dataset.isp_index[isp_id]
    total_local = sum(counts[t.torrent_id] for t in torrents)
    rows = []
    agg = {"rs": 0.0, "rd": 0.0, "ls": 0.0, "ld": 0.0}
    for t in torrents:
        b = BoundInputs(
            torrent_size=t.size,
            local_size=counts[t.torrent_id],
            W=params.neighborhood_W,
            k=params.regular_slots_k,
        )
        weight = counts[t.torrent_id] / total_local
        rs = expected_local_random_sparse(b)
        rd = expected_local_random_dense(b)
        ls = expected_local_locality(b, Mode.SPARSE)
        ld = expected_local_locality(b, Mode.DENSE)
        rows.append(TorrentBoundRow(t.torrent_id, weight, rs, rd, ls, ld))
        agg["rs"] += weight * rs
        agg["rd"] += weight * rd
        agg["ls"] += weight * ls
        agg["ld"] += weight * ld
    k = params.regular_slots_k
    rs, rd, ls, ld = agg["rs"] / k, agg["rd"] / k, agg["ls"] / k, agg["ld"] / k
    return IspBoundsReport(
        isp_id=isp_id,
        random_sparse=rs,
        random_dense=rd,
        locality_sparse=ls,
        locality_dense=ld,
        improvement_sparse=(ls / rs) if rs > 0 else None,
        improvement_dense=(ld / rd) if rd > 0 else None,
        per_torrent=tuple(rows),
    )
