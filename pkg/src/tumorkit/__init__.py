"""tumorkit: MRI tumor-detection pipeline at desk scale.

Preprocessing (mean/Gaussian/bilateral filtering, grayscale, resize),
intensity K-means segmentation with elbow model selection, IoU overlap
reporting, stochastic augmentation, and a small residual CNN trained with
Adam on binary cross-entropy -- all reproducible from one seed.
"""

from .augment import AugmentConfig, affine_warp, augment_apply, hflip, sample_augmentation
from .dataset import (
    ClassLabel,
    DatasetManifest,
    LabeledSample,
    SplitSpec,
    load_manifest,
    load_sample,
    split,
)
from .errors import ConfigError, ImageFormatError, ManifestError, ShapeError, TumorkitError
from .imgproc import (
    BilateralParams,
    bilateral_filter,
    box_smooth,
    gaussian_smooth,
    preprocess_pipeline,
    resize,
    to_grayscale,
)
from .metrics import IoUReport, TrainReport, binary_accuracy, iou, overlap_report
from .rng import derive_rng, derive_seed
from .segment import (
    ClusterModel,
    ElbowResult,
    KMeansConfig,
    choose_elbow_k,
    elbow_scan,
    extract_tumor_mask,
    kmeans,
    wcss,
)
from .synth import generate_corpus

__version__ = "0.1.0"
