"""Breast percent density from raw mammograms via superpixel texture classification."""

__version__ = "0.1.0"

from .calibration import CutoffCalibration, CutoffCalibrator, calibrate_cutoff, reference_labels
from .ensemble import (
    DensityEnsemble,
    DensityModel,
    PdResult,
    classify_and_pd,
    load_ensemble,
    save_ensemble,
    train_ensemble,
)
from .exceptions import BreastPDError
from .features import (
    ALL_FEATURES,
    BANK_VERSION,
    IMAGE_FEATURES,
    SUPERPIXEL_FEATURES,
    FeatureMatrix,
    extract_image_features,
    extract_superpixel_features,
)
from .imaging import PreprocessedImage, RawImage, load_image, preprocess, save_image, standardize_orientation
from .phantom import PhantomSpec, generate_corpus, generate_phantom
from .pipeline import PipelineConfig, process_image, train_from_results
from .segmentation import RegionMask, remove_abdominal_bump, segment_background_classical
from .selection import CorrelationPruner, ForestImportanceSelector, select_features
from .superpixel import SuperpixelMap, generate_superpixels
from .svm import SMOClassifier

__all__ = [
    "ALL_FEATURES", "BANK_VERSION", "BreastPDError", "CorrelationPruner", "CutoffCalibration",
    "CutoffCalibrator", "DensityEnsemble", "DensityModel", "FeatureMatrix", "ForestImportanceSelector",
    "IMAGE_FEATURES", "PdResult", "PhantomSpec", "PipelineConfig", "PreprocessedImage", "RawImage",
    "RegionMask", "SMOClassifier", "SUPERPIXEL_FEATURES", "SuperpixelMap", "calibrate_cutoff",
    "classify_and_pd", "extract_image_features", "extract_superpixel_features", "generate_corpus",
    "generate_phantom", "generate_superpixels", "load_ensemble", "load_image", "preprocess", "process_image",
    "reference_labels", "remove_abdominal_bump", "save_ensemble", "save_image", "segment_background_classical",
    "select_features", "standardize_orientation", "train_ensemble", "train_from_results",
]
