"""Uncertainty and adversarial-robustness evaluation for object detectors.

The toolkit consumes prediction dumps (the detections a dropout-sampled
detector emits over repeated stochastic passes), groups them with density
clustering, and reports uncertainty metrics, detection accuracy, robustness
scores, and statistical comparisons between runs.
"""

from .accuracy import (
    ConsensusDetection,
    MatchResult,
    average_precision,
    consensus,
    match,
    mean_average_precision,
)
from .clustering import (
    ClusterParams,
    DetectionCluster,
    cluster_detections,
    core_distance,
    feature_vector,
    mutual_reachability,
)
from .errors import EmptyManifestError, ImageSetMismatchError, SchemaError, UqodError
from .geometry import ConvexPolygon, Point2D, convex_hull, iou, polygon_area
from .robustness import (
    PairedMetrics,
    RobustnessReport,
    avg_and_diff,
    rs_map,
    rs_uq,
    rs_uqm,
)
from .stats import (
    EffectSize,
    HolmResult,
    PairedSampleMatrix,
    TestOutcome,
    directional_compare,
    friedman,
    holm_bonferroni,
    median_mad_interval,
    rank_biserial,
    spearman,
    wilcoxon_signed_rank,
)
from .synthgen import AdversarialDegradation, SynthConfig, generate, write_dataset
from .types import (
    BoundingBox,
    DatasetManifest,
    Detection,
    EvaluationRun,
    GroundTruthAnnotation,
    GroundTruthObject,
    ImageMetrics,
    ManifestEntry,
    PredictionDump,
    SoftmaxScore,
    ValidationResult,
    predicted_label,
    validate_dump,
)
from .uncertainty import (
    ImageUncertainty,
    ObjectUncertainty,
    image_uncertainty,
    mutual_information,
    object_uncertainty,
    predictive_surface,
    shannon_entropy,
    total_variance,
    variation_ratio,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
