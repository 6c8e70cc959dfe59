"""Clustering-based Wi-Fi fingerprint indoor positioning.

The pipeline: partition a training radio map with k-means (per building or
per floor, in spatial or RSSI feature space), represent each cluster by a
frequency table of its members' strongest-AP combinations, assign queries to
clusters by subset scoring against that table, then estimate position and
floor inside the assigned cluster with KNN, WKNN or WKNN-T.
"""

from .assignment import (
    ApCombinationTable,
    AssignResult,
    TableRow,
    assign,
    build_table,
    top_n_aps,
    top_n_sets,
)
from .bundle import Bundle, load_bundle, save_bundle
from .clustering import (
    ClusterModel,
    ClusterStrategy,
    KMeansResult,
    Level,
    Scope,
    fit_clusters,
    kmeans,
)
from .errors import (
    ConfigError,
    DataError,
    DegenerateDataError,
    EmptyDatasetError,
    FpClusterError,
    InfeasibleKError,
    ModelError,
    NoModelError,
    ParseError,
    SchemaError,
    SynthSpecError,
    UndetectableFingerprintError,
)
from .evaluation import (
    EvaluationReport,
    SampleResult,
    SweepGrid,
    SweepResult,
    SweepSettings,
    evaluate,
    evaluate_many,
    percentile,
    summarize,
    sweep,
    write_cdf_svg,
    write_per_sample_csv,
    write_report_json,
    write_summary_csv,
)
from .ingest import (
    SCHEMA_PRESETS,
    DatasetSchema,
    Fingerprint,
    RadioMap,
    compute_global_min,
    load_csv,
    load_schema_file,
    resolve_schema,
    save_csv,
)
from .localisation import (
    ZERO_DISTANCE,
    ClusterMembers,
    Estimator,
    KnnConfig,
    Pipeline,
    PositionEstimate,
    Variant,
    distance,
    knn_estimate,
    predict,
    top_strongest,
)
from .synth import SynthSpec, path_loss_rssi, synth_radio_map, synth_rssi_matrix
from .transform import (
    DEFAULT_EXPONENT,
    DEFAULT_FLOOR_HEIGHT,
    FeatureSpace,
    PowedConfig,
    Representation,
    feature_matrix,
    features,
    powed,
    raw_clamped,
    rssi_features,
)

__version__ = "0.1.0"
