"""End-to-end pipeline: dataset in, policies run under common random numbers,
delimited reports (and figures) out.

Seeds for each stage are derived from (master seed, torrent_id, stage tag), so
role assignment, the base neighborhood draw and speed tie-breaking are shared
across policies; differences between reports isolate the overlay policy.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import figures
from .bounds import IspBoundsReport, isp_bounds
from .datamodel import (
    ChunkParams,
    Dataset,
    SizeDistribution,
    SpeedModel,
    SyntheticSpec,
    apply_speeds,
    assign_roles,
    generate_synthetic,
    isp_countries,
    load_demographics,
    load_ratios,
    load_speed_model,
    synthetic_ratios,
    synthetic_speed_model,
    write_demographics,
    write_ratios,
    write_speed_model,
)
from .localizability import LocalizabilityQuery, isp_localizability, speed_sweep
from .overlay import OverlayPolicy, build_family, build_random, classify_edges
from .seeding import derive_seed
from .traffic import (
    SeederPolicy,
    TrafficReport,
    aggregate,
    qos_reduction,
    torrent_matrix,
    transit_reduction,
)

DEFAULT_PERCENTILES = (5, 25, 50, 75, 95)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs; built by load_config or directly in code."""

    home_isps: tuple[str, ...]
    policies: tuple[OverlayPolicy, ...]
    chunk: ChunkParams = ChunkParams()
    seeder_policy: SeederPolicy = SeederPolicy.PROPORTIONAL
    percentiles: tuple[int, ...] = DEFAULT_PERCENTILES
    master_seed: int = 0
    out_dir: Path = Path("out")
    demographics_path: Optional[Path] = None
    speeds_path: Optional[Path] = None
    per_peer_speeds_path: Optional[Path] = None
    ratios_path: Optional[Path] = None
    synthetic: Optional[SyntheticSpec] = None
    top_n: int = 100
    localizability_q: float = 0.25
    figures: bool = True
    detail: bool = False

    def __post_init__(self):
        if self.synthetic is None and self.demographics_path is None:
            raise ValueError("config needs either a dataset section or a synthetic spec")
        if self.synthetic is not None and self.demographics_path is not None:
            raise ValueError("dataset and synthetic sections are mutually exclusive")


def _parse_size(token: str) -> SizeDistribution:
    parts = [p.strip() for p in token.split(":")]
    kind = parts[0].lower()
    if kind == "fixed" and len(parts) == 2:
        return SizeDistribution.fixed(int(parts[1]))
    if kind == "uniform" and len(parts) == 3:
        return SizeDistribution.uniform(int(parts[1]), int(parts[2]))
    if kind == "powerlaw" and len(parts) == 4:
        return SizeDistribution.powerlaw(float(parts[1]), int(parts[2]), int(parts[3]))
    raise ValueError(f"bad size distribution {token!r}")


def _parse_list(raw: str) -> list[str]:
    return [t.strip() for t in raw.split(",") if t.strip()]


def load_config(path, seed_override: Optional[int] = None, out_override=None) -> ExperimentConfig:
    """Parse the INI-style config documented in the README."""
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    read = parser.read(path)
    if not read:
        raise ValueError(f"cannot read config {path}")
    base = path.parent

    def _path(section: str, key: str) -> Optional[Path]:
        if parser.has_option(section, key):
            return (base / parser.get(section, key)).resolve()
        return None

    synthetic = None
    if parser.has_section("synthetic"):
        syn = parser["synthetic"]
        synthetic = SyntheticSpec(
            n_torrents=syn.getint("torrents"),
            sizes=_parse_size(syn.get("size", "fixed:20")),
            n_isps=syn.getint("isps"),
            isp_skew=syn.getfloat("isp_skew", 0.0),
            n_countries=syn.getint("countries", 0),
            speed_lo_kbps=float(syn.get("speed_range", "300:3000").split(":")[0]),
            speed_hi_kbps=float(syn.get("speed_range", "300:3000").split(":")[1]),
            seeder_fraction=syn.getfloat("seeder_fraction", 0.25),
        )

    exp = parser["experiment"] if parser.has_section("experiment") else {}
    policies = tuple(
        OverlayPolicy.parse(tok)
        for tok in _parse_list(exp.get("policies", "random,loif,locality,strict"))
    )
    chunk_sec = parser["chunks"] if parser.has_section("chunks") else {}
    chunk = ChunkParams(
        total_chunks_C=int(chunk_sec.get("C", 10_000)),
        chunk_size_sigma_bytes=int(chunk_sec.get("sigma_bytes", 32_768)),
        unchoke_interval_T_sec=float(chunk_sec.get("interval_sec", 10.0)),
        regular_slots_k=int(chunk_sec.get("k", 4)),
        neighborhood_W=int(chunk_sec.get("W", 40)),
    )
    seed = seed_override
    if seed is None:
        seed = int(exp.get("seed", 0))
    out_dir = Path(out_override) if out_override is not None else Path(exp.get("out", "out"))
    bounds_sec = parser["bounds"] if parser.has_section("bounds") else {}
    loc_sec = parser["localizability"] if parser.has_section("localizability") else {}
    return ExperimentConfig(
        home_isps=tuple(_parse_list(exp.get("home_isps", ""))),
        policies=policies,
        chunk=chunk,
        seeder_policy=SeederPolicy(exp.get("seeder_policy", "proportional").lower()),
        percentiles=tuple(
            int(p) for p in _parse_list(exp.get("percentiles", "5,25,50,75,95"))
        ),
        master_seed=seed,
        out_dir=out_dir,
        demographics_path=_path("dataset", "demographics"),
        speeds_path=_path("dataset", "speeds"),
        per_peer_speeds_path=_path("dataset", "per_peer_speeds"),
        ratios_path=_path("dataset", "ratios"),
        synthetic=synthetic,
        top_n=int(bounds_sec.get("top_n", 100)),
        localizability_q=float(loc_sec.get("q", 0.25)),
        figures=str(exp.get("figures", "true")).lower() in ("1", "true", "yes"),
        detail=str(exp.get("detail", "false")).lower() in ("1", "true", "yes"),
    )


def load_inputs(config: ExperimentConfig) -> tuple[Dataset, SpeedModel]:
    """Materialize the dataset and speed model, synthetic or from files.

    Roles are resolved here: a ratio table (or the synthetic default) assigns
    them; otherwise every peer must already carry one.
    """
    if config.synthetic is not None:
        ds = generate_synthetic(config.synthetic, derive_seed(config.master_seed, "synthetic"))
        speeds = synthetic_speed_model(
            config.synthetic, derive_seed(config.master_seed, "synthetic-speeds")
        )
        ratios = synthetic_ratios(config.synthetic, ds)
    else:
        ds = load_demographics(config.demographics_path)
        if config.speeds_path is None:
            raise ValueError("dataset config needs a speeds table")
        speeds = load_speed_model(config.speeds_path, config.per_peer_speeds_path)
        ratios = load_ratios(config.ratios_path) if config.ratios_path else None
    ds = apply_speeds(ds, speeds)
    if ratios is not None:
        ds = assign_roles(ds, ratios, derive_seed(config.master_seed, "roles"))
    else:
        missing = [
            t.torrent_id
            for t in ds.torrents
            if any(p.role is None for p in t.peers)
        ]
        if missing:
            raise ValueError(
                "no ratio table and no roles for torrents: " + ", ".join(missing[:10])
            )
    return ds, speeds


@dataclass
class RunResult:
    reports: dict[tuple[str, str], TrafficReport]
    rows: list[dict]
    files: list[Path] = field(default_factory=list)


def _policy_list(config: ExperimentConfig) -> list[OverlayPolicy]:
    policies = [OverlayPolicy.random_overlay()]
    for p in config.policies:
        if not p.is_random:
            policies.append(p)
    return policies


def build_policy_graph(torrent, policy: OverlayPolicy, speeds, W: int, seed: int):
    if policy.is_random:
        return build_random(torrent, W, seed)
    return build_family(torrent, policy, speeds, W, seed)


def run(config: ExperimentConfig) -> RunResult:
    """Run every policy for every home ISP over T(A) and emit the report files."""
    ds, speeds = load_inputs(config)
    geo = isp_countries(ds)
    unknown = [isp for isp in config.home_isps if isp not in ds.isp_index]
    if unknown:
        raise ValueError("home ISPs absent from dataset: " + ", ".join(unknown))
    if not config.home_isps:
        raise ValueError("no home ISPs configured")
    policies = _policy_list(config)
    needed = sorted(
        {
            t.torrent_id
            for isp in config.home_isps
            for t in ds.torrents_of_isp(isp)
        }
    )
    torrents = {t.torrent_id: t for t in ds.torrents}
    k = config.chunk.regular_slots_k
    W = config.chunk.neighborhood_W
    matrices: dict[tuple[str, str], object] = {}
    for tid in needed:
        overlay_seed = derive_seed(config.master_seed, tid, "overlay")
        tiebreak_seed = derive_seed(config.master_seed, tid)
        for policy in policies:
            graph = build_policy_graph(torrents[tid], policy, None, W, overlay_seed)
            classify_edges(graph, geo)
            matrices[(tid, policy.name)] = torrent_matrix(
                graph,
                None,
                k,
                config.seeder_policy,
                tiebreak_seed=tiebreak_seed,
            )
    reports: dict[tuple[str, str], TrafficReport] = {}
    for isp in config.home_isps:
        tids = [t.torrent_id for t in ds.torrents_of_isp(isp)]
        for policy in policies:
            reports[(isp, policy.name)] = aggregate(
                [matrices[(tid, policy.name)] for tid in tids], isp, geo
            )
    rows = []
    for isp in config.home_isps:
        random_report = reports[(isp, "random")]
        random_rates = random_report.download_rates()
        for policy in policies:
            rep = reports[(isp, policy.name)]
            row = {
                "policy": policy.name,
                "isp_id": isp,
                "internal_kbps": rep.internal_kbps,
                "peering_kbps": rep.peering_kbps,
                "transit_kbps": rep.transit_kbps,
                "transit_reduction": transit_reduction(rep, random_report),
            }
            for pct in config.percentiles:
                row[f"qos_reduction_p{pct}"] = qos_reduction(
                    rep.download_rates(), random_rates, pct / 100.0
                )
            rows.append(row)
    result = RunResult(reports=reports, rows=rows)
    _write_run_outputs(config, result)
    return result


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def _write_run_outputs(config: ExperimentConfig, result: RunResult) -> None:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report_path = out / "report.csv"
    columns = ["policy", "isp_id", "internal_kbps", "peering_kbps", "transit_kbps", "transit_reduction"]
    columns += [f"qos_reduction_p{p}" for p in config.percentiles]
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write(",".join(columns) + "\n")
        for row in result.rows:
            fh.write(",".join(_fmt(row[c]) for c in columns) + "\n")
    result.files.append(report_path)
    if config.detail:
        for (isp, policy), rep in sorted(result.reports.items()):
            detail_path = out / f"detail_{isp}_{policy}.csv"
            with open(detail_path, "w", encoding="utf-8") as fh:
                fh.write("torrent_id,internal_kbps,peering_kbps,transit_kbps\n")
                for trow in rep.per_torrent:
                    fh.write(
                        f"{trow.torrent_id},{trow.internal_kbps:.6f},"
                        f"{trow.peering_kbps:.6f},{trow.transit_kbps:.6f}\n"
                    )
            result.files.append(detail_path)
    if config.figures:
        fig_dir = out / "figures"
        fig_dir.mkdir(exist_ok=True)
        for isp in config.home_isps:
            transit = {
                policy.name: result.reports[(isp, policy.name)].transit_kbps
                for policy in _policy_list(config)
            }
            p1 = figures.policy_bars(
                transit, fig_dir / f"transit_{isp}.png",
                ylabel="transit kbps", title=f"Transit traffic, home ISP {isp}",
            )
            rates = {
                policy.name: result.reports[(isp, policy.name)].download_rates()
                for policy in _policy_list(config)
            }
            p2 = figures.cdf_plot(
                rates, fig_dir / f"downloads_{isp}.png",
                xlabel="download rate (kbps)",
                title=f"Leecher download rates, home ISP {isp}",
            )
            result.files.extend([p1, p2])


def bounds_sweep(config: ExperimentConfig) -> list[IspBoundsReport]:
    """Per-ISP bound aggregates for the top-N ISPs by client count."""
    ds, _ = load_inputs(config)
    ranked = sorted(ds.isps(), key=lambda isp: (-ds.isp_population(isp), isp))
    chosen = ranked[: config.top_n]
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports = [isp_bounds(ds, isp, config.chunk) for isp in chosen]
    path = out / "bounds.csv"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            "isp_id,random_sparse,random_dense,locality_sparse,"
            "locality_dense,improvement_sparse,improvement_dense,clients\n"
        )
        for rep in reports:
            fh.write(
                f"{rep.isp_id},"
                f"{rep.random_sparse:.6f},{rep.random_dense:.6f},"
                f"{rep.locality_sparse:.6f},{rep.locality_dense:.6f},"
                f"{_fmt(rep.improvement_sparse)},{_fmt(rep.improvement_dense)},"
                f"{ds.isp_population(rep.isp_id)}\n"
            )
    if config.figures:
        series = {
            "random sparse": [r.random_sparse for r in reports],
            "random dense": [r.random_dense for r in reports],
            "locality sparse": [r.locality_sparse for r in reports],
            "locality dense": [r.locality_dense for r in reports],
        }
        figures.cdf_plot(
            series,
            out / "figures" / "bounds_cdf.png",
            xlabel="localized unchoke fraction",
            title=f"Bound CDFs over top-{len(reports)} ISPs",
        )
    return reports


def localizability_report(
    config: ExperimentConfig,
    isp_id: str,
    q: Optional[float] = None,
    sweep: Optional[tuple[float, float, int]] = None,
) -> list[tuple[float, float]]:
    """Localizability at the ISP's current speed, or along a sweep grid."""
    ds, speeds = load_inputs(config)
    if q is None:
        q = config.localizability_q
    if sweep is None:
        current = speeds.isp_speed(isp_id)
        points = [
            (current, isp_localizability(ds, speeds, LocalizabilityQuery(isp_id, q)))
        ]
    else:
        lo, hi, steps = sweep
        if steps < 1 or hi < lo:
            raise ValueError("sweep must be lo:hi:steps with hi >= lo, steps >= 1")
        if steps == 1:
            grid = [lo]
        else:
            grid = [lo + (hi - lo) * i / (steps - 1) for i in range(steps)]
        points = speed_sweep(ds, speeds, isp_id, q, grid)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"localizability_{isp_id}.csv"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("speed_kbps,localizability\n")
        for speed, value in points:
            fh.write(f"{speed:.6f},{value:.6f}\n")
    if config.figures and len(points) > 1:
        figures.line_plot(
            {isp_id: points},
            out / "figures" / f"localizability_{isp_id}.png",
            xlabel="uplink speed (kbps)",
            ylabel="inherent localizability",
            title=f"Speed sweep, q={q:g}",
        )
    return points


def synthesize(config: ExperimentConfig) -> list[Path]:
    """Write synthetic demographics, speed and ratio tables to the out dir."""
    if config.synthetic is None:
        raise ValueError("config has no [synthetic] section")
    ds = generate_synthetic(config.synthetic, derive_seed(config.master_seed, "synthetic"))
    speeds = synthetic_speed_model(
        config.synthetic, derive_seed(config.master_seed, "synthetic-speeds")
    )
    ratios = synthetic_ratios(config.synthetic, ds)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    demo = out / "demographics.csv"
    spd = out / "speeds.csv"
    rat = out / "ratios.csv"
    write_demographics(ds, demo)
    write_speed_model(speeds, spd)
    write_ratios(ratios, rat)
    return [demo, spd, rat]
