"""regimescope: statistical segmentation of index series into volatility phases."""

from .cluster import (
    Dendrogram,
    PhaseAssignment,
    SegmentDistanceMatrix,
    build_distance_matrix,
    complete_link,
    cut_tree,
    segment_distance,
    to_newick,
)
from .errors import RegimescopeError
from .ingest import (
    BarSeries,
    Model,
    MovementSeries,
    Tick,
    TradingCalendar,
    aggregate_ticks,
    movements,
)
from .report import (
    CommonBoundaryReport,
    PhaseTimeline,
    ShockReport,
    compare_segmentations,
    detect_shock_sequences,
    export_bundle,
    phase_timeline,
)
from .segment import (
    DivergenceSpectrum,
    EditKind,
    ManualEdit,
    Provenance,
    Segmentation,
    SegmentationConfig,
    apply_manual_edit,
    best_split,
    divergence_spectrum,
    optimize_boundaries,
    recursive_segment,
)
from .stats import (
    GaussianStats,
    PrefixStats,
    build_prefix_stats,
    gaussian_max_loglik,
    interval_stats,
    merge_stats,
)

__version__ = "0.1.0"
