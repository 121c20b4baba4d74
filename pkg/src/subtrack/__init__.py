"""Streaming subspace tracking from partially observed vectors.

Gradient-rotation (GROUSE) and incremental-SVD trackers over a common
stepping interface, the closed-form SVD of the rank-one update matrix, a
synthetic stream generator, and a CLI harness that cross-checks the two
update paths against each other to machine precision.

Hot per-step kernels run on a compiled extension when available and fall
back to numpy otherwise; see :func:`backend_name`.
"""

from ._backend import backend_name
from .datagen import GeneratedStream, GroundTruth, StreamConfig, generate_stream, random_orthonormal
from .exceptions import (
    ContractViolationError,
    DegenerateUpdateError,
    FileFormatError,
    RankLossError,
    StreamProcessingError,
)
from .harness import (
    EquivalenceReport,
    load_basis,
    load_stream,
    main,
    save_stream,
    snapshot_basis,
    write_trace_csv,
)
from .kernels import (
    Observation,
    StepScalars,
    StructuredSVDResult,
    SubspaceEstimate,
    UpdateIntermediates,
    build_rotation,
    complement_basis,
    compute_intermediates,
    greedy_step_scalars,
    impute_vector,
    nonunit_eigenvalues,
    reorthonormalize,
    restricted_least_squares,
    structured_update_svd,
    subspace_error,
)
from .trackers import (
    BrandState,
    BrandTracker,
    ExperimentTrace,
    FullIsvdTracker,
    FullSVDState,
    GrouseTracker,
    PartialIsvdTracker,
    StepPolicy,
    TraceRecord,
    TrackerState,
    brand_update,
    grouse_update,
    isvd_full_step,
    isvd_partial_update,
    process_stream,
)

__version__ = "0.1.0"

__all__ = [
    "BrandState",
    "BrandTracker",
    "ContractViolationError",
    "DegenerateUpdateError",
    "EquivalenceReport",
    "ExperimentTrace",
    "FileFormatError",
    "FullIsvdTracker",
    "FullSVDState",
    "GeneratedStream",
    "GroundTruth",
    "GrouseTracker",
    "Observation",
    "PartialIsvdTracker",
    "RankLossError",
    "StepPolicy",
    "StepScalars",
    "StreamConfig",
    "StreamProcessingError",
    "StructuredSVDResult",
    "SubspaceEstimate",
    "TraceRecord",
    "TrackerState",
    "UpdateIntermediates",
    "backend_name",
    "brand_update",
    "build_rotation",
    "complement_basis",
    "compute_intermediates",
    "generate_stream",
    "greedy_step_scalars",
    "grouse_update",
    "impute_vector",
    "isvd_full_step",
    "isvd_partial_update",
    "load_basis",
    "load_stream",
    "main",
    "nonunit_eigenvalues",
    "process_stream",
    "random_orthonormal",
    "reorthonormalize",
    "restricted_least_squares",
    "save_stream",
    "snapshot_basis",
    "structured_update_svd",
    "subspace_error",
    "write_trace_csv",
]
