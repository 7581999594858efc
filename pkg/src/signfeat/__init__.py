"""Hand-sign image classification from handcrafted local features.

The pieces, in pipeline order: image loading and resizing (imageio),
multiscale corner detection with steered binary descriptors (orb),
k-means visual-word histograms (bovw), and a Gini-split decision tree
(cart). The cli/pipeline modules wire them together over a work
directory with reproducible, digest-tracked artifacts.
"""

__version__ = "0.1.0"

from . import errors
from .bovw import (
    Codebook,
    encode_image,
    kmeans_fit,
    kmeans_predict,
    load_codebook,
    read_feature_csv,
    save_codebook,
    write_feature_csv,
)
from .cart import (
    DecisionTree,
    best_split,
    evaluate,
    fit,
    gini,
    load_tree,
    predict,
    predict_proba,
    save_tree,
    stratified_split,
    tune_depth,
)
from .config import PipelineConfig, load_config, parse_config
from .imageio import (
    DatasetManifest,
    load_dataset,
    load_image,
    resize,
    to_grayscale,
)
from .orb import (
    BriefPattern,
    Keypoint,
    OrbParams,
    SteerLut,
    build_pyramid,
    build_steer_lut,
    compute_descriptor,
    compute_descriptors,
    compute_orientation,
    default_pattern,
    detect_and_compute,
    fast_detect,
    harris_response,
    hamming_distance,
    learn_rbrief,
    load_pattern,
    match_hamming,
    save_pattern,
    steer_pattern,
)

__all__ = [
    "__version__",
    "errors",
    # imageio
    "DatasetManifest", "load_dataset", "load_image", "resize", "to_grayscale",
    # orb
    "BriefPattern", "Keypoint", "OrbParams", "SteerLut", "build_pyramid",
    "build_steer_lut", "compute_descriptor", "compute_descriptors",
    "compute_orientation",
    "default_pattern", "detect_and_compute", "fast_detect", "harris_response",
    "hamming_distance", "learn_rbrief", "load_pattern", "match_hamming",
    "save_pattern", "steer_pattern",
    # bovw
    "Codebook", "encode_image", "kmeans_fit", "kmeans_predict",
    "load_codebook", "read_feature_csv", "save_codebook", "write_feature_csv",
    # cart
    "DecisionTree", "best_split", "evaluate", "fit", "gini", "load_tree",
    "predict", "predict_proba", "save_tree", "stratified_split", "tune_depth",
    # config
    "PipelineConfig", "load_config", "parse_config",
]
