"""perturbchain: black-box falsification of image-segmentation models.

Searches, with gradient-free differential evolution, for ordered chains of
bounded natural perturbations that maximize a model's IoU deterioration on
clusters of similar images, and reports per-cluster weaknesses.
"""
from .calibrate import BoundsCalibrator, CalibrationConfig, calibrate_all, calibrate_param
from .cluster import (
    CosinePCA,
    FeatureMatrix,
    GridFeatureExtractor,
    SeededKMeans,
    build_cluster_model,
    extract_features,
)
from .dataset import Dataset, DatasetItem, generate_synthetic, load_dataset, write_synthetic
from .genome import Chain, Genome, apply_chain, decode, genome_dim
from .harness import Falsifier, FalsifyReport, falsify_cluster, run_campaign
from .imgcore import (
    DEFAULT_THRESHOLDS,
    Image,
    Mask,
    ProbMap,
    ThresholdSet,
    deterioration,
    iou,
)
from .models import ModelError, ReferenceModel, SubprocessModel, open_model
from .optimize import DEConfig, OptResult, optimize, random_search
from .perturb import ParamBounds, Registry, apply, default_registry, neutral_params

__version__ = "0.1.0"

__all__ = [
    "BoundsCalibrator",
    "CalibrationConfig",
    "Chain",
    "CosinePCA",
    "DEConfig",
    "DEFAULT_THRESHOLDS",
    "Dataset",
    "DatasetItem",
    "Falsifier",
    "FalsifyReport",
    "FeatureMatrix",
    "Genome",
    "GridFeatureExtractor",
    "Image",
    "Mask",
    "ModelError",
    "OptResult",
    "ParamBounds",
    "ProbMap",
    "ReferenceModel",
    "Registry",
    "SeededKMeans",
    "SubprocessModel",
    "ThresholdSet",
    "apply",
    "apply_chain",
    "build_cluster_model",
    "calibrate_all",
    "calibrate_param",
    "decode",
    "default_registry",
    "deterioration",
    "extract_features",
    "falsify_cluster",
    "generate_synthetic",
    "genome_dim",
    "iou",
    "load_dataset",
    "neutral_params",
    "open_model",
    "optimize",
    "random_search",
    "run_campaign",
    "write_synthetic",
]
