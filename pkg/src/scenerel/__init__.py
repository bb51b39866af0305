"""scenerel: relation reasoning over 3D boxes.

Geometric relation labeling of axis-aligned box pairs, a trainable
pairwise relation module producing per-object relation features and
relation predictions, and a toy synthetic-scene detection pipeline that
demonstrates the relation features improving detection mAP.
"""

from .config import RunConfig, load_config
from .detection import (
    DetectionModel,
    DetectionResult,
    LossWeights,
    Proposal,
    build_scene_batch,
    decode_box,
    encode_box,
    extract_features,
    generate_proposals,
    infer,
    load_model,
    run_ablation,
    save_model,
    total_loss,
    train,
)
from .evaluation import (
    ApReport,
    BenchReport,
    RelationMetrics,
    ap_report,
    average_precision,
    bench_relations,
    relation_metrics,
)
from .geometry import (
    Aabb3,
    PlaneOverlap,
    ScoredBox,
    axis_distance,
    center_distance,
    iou3d,
    nms3d,
    plane_overlap,
)
from .mlp import AdamState, MlpParams, adam_step, bce_loss, init_mlp, mlp_backward, mlp_forward
from .pairing import PairingConfig, PairSet, build_pairs
from .relations import (
    AnnotatedObject,
    RelationLabels,
    RelationThresholds,
    relation_labels,
    relation_labels_batch,
    semantic_relations,
    spatial_relations,
)
from .relnet import (
    RELATION_NAMES,
    RelationModuleParams,
    init_relation_module,
    relation_backward,
    relation_forward,
)
from .scenes import (
    CLASS_NAMES,
    Scene,
    generate_scene,
    generate_scenes,
    load_scene,
    load_scene_dir,
    save_scene,
)

__version__ = "0.1.0"
