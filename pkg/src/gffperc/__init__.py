"""Desk-scale laboratory for level-set percolation of the lattice Gaussian
free field: exact zero-boundary sampling, crossing/connectivity estimation,
and numeric checkers for the associated inequalities and recursions."""

from .estimators import (
    CriticalEstimate,
    DecayFit,
    DifferentialReport,
    Estimate,
    InfluenceEstimate,
    boundary_connection_curve,
    differential_inequality_report,
    estimate_critical_height,
    estimate_event,
    estimate_events_shared,
    estimate_influence,
    fit_decay,
    wilson_interval,
)
from .events import (
    AllOfEvent,
    ConnectedEvent,
    CrossingEvent,
    DisjointCrossingsEvent,
    DualConnectedEvent,
    Event,
    OriginToRingEvent,
    SiteEvent,
    TrueEvent,
    parse_event,
)
from .field import (
    FactorizationError,
    FieldSample,
    GreenOperator,
    build_green,
    conditional_sample,
    sample,
    sample_batch,
)
from .inequalities import (
    CheckReport,
    check_coupling_bound,
    check_dual_decay,
    check_fkg,
    check_height_shift_bound,
)
from .lattice import (
    HORIZONTAL,
    VERTICAL,
    BoxLattice,
    Rect,
    build_box,
    crossing_geometry,
    dual_neighbors,
    primal_neighbors,
)
from .levelset import (
    ClusterReport,
    LevelSet,
    cluster_of,
    connected,
    count_disjoint_crossings,
    crossing,
    dual_connected,
    dual_crossing,
    levelset_from_text,
    levelset_to_text,
    threshold,
)
from .renorm import (
    BetaTrajectory,
    RenormSequences,
    check_product_bound,
    crossing_bound_iteration,
    easy_sequences,
    hard_sequences,
    log_log_ratio,
    max_supported_crossings,
)
from .rng import StreamKey, derive, next_standard_normals

__version__ = "0.1.0"
