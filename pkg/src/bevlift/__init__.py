"""Deterministic core of depth-based bird's-eye-view perception.

The package covers the geometry and bookkeeping that make camera-to-BEV
pipelines reproducible: pinhole projection and its inverse, min-pooled
one-hot depth supervision targets, a calibration-gated depth head with an
explicit per-bin cross-entropy loss, the outer-product lift from image
features to frustum points, ego-motion alignment across frames, and three
interchangeable voxel-pooling engines held to an equivalence contract and
timed by a benchmark harness.
"""

__version__ = "0.1.0"

from .errors import BenchmarkError, BevLiftError, ConfigurationError, ValidationError
from .geometry import (
    DEPTH_EPS,
    CameraView,
    EgoPose,
    Point25D,
    RigidTransform,
    compose_relative,
    project_points,
    unproject_pixel,
    unproject_pixels,
)
from .grids import (
    DEFAULT_BINS,
    GRID_TAGS,
    TAG_BEV_FEATURE,
    TAG_DEPTH_DISTRIBUTION,
    TAG_DEPTH_ONEHOT,
    TAG_IMAGE_FEATURE,
    DepthBinSpec,
    FeatureGrid,
)
from .depth_gt import SparseDepthMap, make_depth_gt, min_pool, one_hot_depth
from .depth_head import (
    CAM_VEC_LEN,
    PROB_CLAMP,
    DepthHeadParams,
    DepthLossResult,
    bce_depth_loss,
    camera_param_vector,
    channel_gates,
    depth_logits,
    predict_depth,
    se_gate,
    softmax_over_bins,
)
from .lift import FrustumPoints, lift_view
from .pooling import (
    DEFAULT_BEV,
    ENGINE_PREFIX_SUM,
    ENGINE_SCATTER_ADD,
    ENGINE_SEQUENTIAL,
    POOLING_ENGINES,
    BenchmarkRow,
    BevGridSpec,
    PooledBev,
    assert_pooled_close,
    benchmark_pooling,
    cell_id,
    linearized_cell_ids,
    make_benchmark_instance,
    max_pool_discrepancy,
    pool,
    pool_prefix_sum,
    pool_scatter_add,
    pool_sequential,
)
from .temporal import align_points, fuse_frames
from .metrics import (
    DepthEvalPairs,
    DepthMetrics,
    compute_metrics,
    extract_depth_scalar,
    supervised_depth_pairs,
)
from .scene import SCENE_PRESETS, SyntheticScene, generate_scene, ring_rig, straight_trajectory
from .io import (
    load_bev_dump,
    load_head_params,
    load_point_cloud,
    load_poses,
    load_rig,
    save_bev_dump,
    save_head_params,
    save_point_cloud,
    save_poses,
    save_rig,
    write_benchmark_csv,
    write_metrics_csv,
)
from .pipeline import (
    BenchmarkReport,
    DepthReport,
    PipelineConfig,
    RunResult,
    rerun_from_manifest,
    run_benchmark,
    run_pipeline,
    synthesize_context,
)

__all__ = [name for name in dir() if not name.startswith("_")]
