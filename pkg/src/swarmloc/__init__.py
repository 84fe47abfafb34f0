"""Swarm-demographics toolkit for BitTorrent inter-ISP traffic under
locality-biased overlay construction."""

from .bounds import (
    BoundInputs,
    IspBoundsReport,
    Mode,
    expected_local_locality,
    expected_local_random_dense,
    expected_local_random_sparse,
    hypergeom_pmf,
    improvement_factor,
    isp_bounds,
    sparse_condition_holds,
)
from .datamodel import (
    ChunkParams,
    Dataset,
    ParseError,
    Peer,
    Role,
    SizeDistribution,
    SpeedModel,
    SyntheticSpec,
    TorrentRecord,
    apply_speeds,
    assign_roles,
    generate_synthetic,
    isp_countries,
    load_demographics,
    load_ratios,
    load_speed_model,
    write_demographics,
)
from .experiment import ExperimentConfig, bounds_sweep, load_config, run
from .localizability import (
    LocalizabilityQuery,
    indicator,
    isp_localizability,
    speed_sweep,
    torrent_localizability,
)
from .matching import (
    CompletionState,
    Matching,
    MatchingProblem,
    expected_interest,
    filter_problem,
    filtering_probability,
    run_completion_simulation,
    solve_bmatching,
    step_completions,
    tiebreak_speeds,
    verify_stability,
)
from .overlay import (
    EdgeScope,
    OverlayGraph,
    OverlayPolicy,
    build_family,
    build_random,
    classify_edges,
)
from .traffic import (
    RateMatrix,
    SeederPolicy,
    TrafficReport,
    aggregate,
    leecher_rates,
    qos_reduction,
    seeder_rates,
    torrent_matrix,
    transit_reduction,
    unlocalizable_analysis,
)

__version__ = "0.1.0"
