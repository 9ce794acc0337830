"""Depth-based view warping and geometric conditioning toolkit.

Warps images and feature grids between posed views using per-pixel depth,
detects and regularizes disocclusion holes, builds warped multi-band
coordinate embeddings, runs occlusion-aware augmented attention, and
aligns camera poses from 2D-3D correspondences. A synthetic-scene module
provides exact oracles, and a dataset pipeline turns posed video
sequences into training manifests.
"""

from .attention import AttentionResult, attention_heatmaps, augmented_attention
from .colormap import apply_colormap
from .coordembed import (
    DEFAULT_NUM_BANDS,
    CoordinateMap,
    FourierEmbedding,
    ablation_condition,
    canonical_coords,
    fourier_encode,
    warped_coord_embedding,
)
from .datapipe import (
    FramePairRecord,
    Manifest,
    PipelineConfig,
    build_manifest,
    load_manifest,
    make_fixture,
    sample_pairs,
    validate_manifest,
    write_manifest,
)
from .errors import (
    BehindCamera,
    DegenerateConfiguration,
    DegenerateSize,
    DimensionMismatch,
    IndexOutOfRange,
    InsufficientInliers,
    InvalidDepthAtMatch,
    MalformedLayout,
    MissingConfidence,
    MissingInput,
    NoConvergence,
    NonFinite,
    SequenceTooShort,
    ShapeMismatch,
    ViewWarpError,
)
from .geometry import (
    CameraIntrinsics,
    PixelCoord,
    RayGrid,
    RigidPose,
    compose,
    pixel_centers,
    plucker_rays,
    project,
    reproject,
    reproject_grid,
    unproject,
)
from .posealign import (
    Correspondence,
    PoseEstimate,
    depth_to_correspondences,
    pnp_ransac,
    reprojection_errors,
    solve_pnp,
)
from .warpcore import (
    DEPTH_BAND,
    MAX_FILL_DISTANCE,
    WEIGHT_EPSILON,
    DepthMap,
    FeatureGrid,
    FlowField,
    OcclusionMask,
    compute_flow,
    downscale_mask,
    filter_occlusion_mask,
    forward_warp,
    inverse_warp,
    splat_coverage,
)

__version__ = "0.1.0"

__all__ = [
    "AttentionResult",
    "attention_heatmaps",
    "augmented_attention",
    "apply_colormap",
    "DEFAULT_NUM_BANDS",
    "CoordinateMap",
    "FourierEmbedding",
    "ablation_condition",
    "canonical_coords",
    "fourier_encode",
    "warped_coord_embedding",
    "FramePairRecord",
    "Manifest",
    "PipelineConfig",
    "build_manifest",
    "load_manifest",
    "make_fixture",
    "sample_pairs",
    "validate_manifest",
    "write_manifest",
    "BehindCamera",
    "DegenerateConfiguration",
    "DegenerateSize",
    "DimensionMismatch",
    "IndexOutOfRange",
    "InsufficientInliers",
    "InvalidDepthAtMatch",
    "MalformedLayout",
    "MissingConfidence",
    "MissingInput",
    "NoConvergence",
    "NonFinite",
    "SequenceTooShort",
    "ShapeMismatch",
    "ViewWarpError",
    "CameraIntrinsics",
    "PixelCoord",
    "RayGrid",
    "RigidPose",
    "compose",
    "pixel_centers",
    "plucker_rays",
    "project",
    "reproject",
    "reproject_grid",
    "unproject",
    "Correspondence",
    "PoseEstimate",
    "depth_to_correspondences",
    "pnp_ransac",
    "reprojection_errors",
    "solve_pnp",
    "DEPTH_BAND",
    "MAX_FILL_DISTANCE",
    "WEIGHT_EPSILON",
    "DepthMap",
    "FeatureGrid",
    "FlowField",
    "OcclusionMask",
    "compute_flow",
    "downscale_mask",
    "filter_occlusion_mask",
    "forward_warp",
    "inverse_warp",
    "splat_coverage",
]
