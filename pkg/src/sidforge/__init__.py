"""Artifact-preserving preprocessing, augmentation and frequency features for
synthetic image detection, with a small trainable detector head."""
from .classifier import LogisticModel, TrainConfig, featurize, image_features, train
from .corrmap import corr_summary, local_correlation_map
from .features import BIOR13, Extractor, ExtractorKind, dwt2_single, extract_hh
from .harness import Dataset, evaluate, load_dataset, make_toy_corpus, synthesize_fake
from .imgcore import bilinear_resize, decode_image, nearest_resize, read_image, to_gray, write_png
from .metrics import accuracy, average_precision
from .transforms import AugmentConfig, RandStream, augment, center_crop, random_crop

__all__ = [
    "LogisticModel",
    "TrainConfig",
    "featurize",
    "image_features",
    "train",
    "corr_summary",
    "local_correlation_map",
    "BIOR13",
    "Extractor",
    "ExtractorKind",
    "dwt2_single",
    "extract_hh",
    "Dataset",
    "evaluate",
    "load_dataset",
    "make_toy_corpus",
    "synthesize_fake",
    "bilinear_resize",
    "decode_image",
    "nearest_resize",
    "read_image",
    "to_gray",
    "write_png",
    "accuracy",
    "average_precision",
    "AugmentConfig",
    "RandStream",
    "augment",
    "center_crop",
    "random_crop",
]

__version__ = "0.1.0"
