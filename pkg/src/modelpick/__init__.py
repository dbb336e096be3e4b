"""modelpick: score how well pretrained source models will transfer to a
target dataset, and benchmark such scores against ground-truth fine-tuned
accuracies.

Public surface:
    scoring     parc_score, rsa_score, dds_score, leep_score, nce_score,
                hscore, knn_cv_score, logistic_score, heuristic_score
    calibration reduce_features, normalize_features, ensemble_depth
    embeddings  embed_single_label, embed_multi_label, embed_detection,
                label_l1_distance
    harness     sample_probe, mean_pc, topk_relative_accuracy, run_benchmark
    I/O         read_tensor, write_tensor, load_manifest, validate_manifest
"""

from .bench import (
    EVAL_MODES,
    EvalReport,
    MethodReport,
    ProbeSet,
    derive_seed,
    mean_pc,
    run_benchmark,
    sample_probe,
    topk_relative_accuracy,
)
from .calibrate import ensemble_depth, normalize_features, reduce_features
from .embed import (
    LabelEmbedding,
    embed_detection,
    embed_labels,
    embed_multi_label,
    embed_single_label,
    embedding_distances,
    label_l1_distance,
)
from .errors import (
    BadMagic,
    DidNotConverge,
    InvalidShape,
    MissingArtifact,
    NonFiniteValue,
    ParseError,
    TensorFormatError,
    TruncatedPayload,
    UnsupportedDtype,
    UnsupportedTask,
    UnsupportedVersion,
    ValidationError,
)
from .methods import (
    ENSEMBLE_NAMES,
    FEATURE_METHODS,
    METHOD_NAMES,
    PROB_METHODS,
    MethodConfig,
    ScoreRecord,
    dds_score,
    heuristic_score,
    hscore,
    knn_cv_score,
    leep_score,
    logistic_score,
    nce_score,
    parc_score,
    rsa_score,
)
from .stats import (
    PcaModel,
    corrcoef_rows,
    correlation_distances,
    cosine_distances,
    pca_fit,
    pca_transform,
    pearson,
    pseudo_inverse,
    rankdata,
    spearman,
    zscore,
)
from .tensorio import (
    ArtifactPaths,
    BankManifest,
    ModelMeta,
    TargetMeta,
    TransferOutcome,
    load_labels,
    load_manifest,
    read_tensor,
    validate_manifest,
    write_tensor,
)

__version__ = "0.1.0"
