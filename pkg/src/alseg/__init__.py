"""Active learning engine for binary image segmentation.

Ranks an unlabeled pool by MC-dropout pixel uncertainty weighted by the
exact Euclidean distance to the predicted contour, routes the annotation
budget to complementary sample buckets, pseudo-labels confident predictions,
and iteratively fine-tunes a pluggable stochastic predictor.
"""

from .distance import UncertaintyScore, edt_brute, edt_exact, score_sample, weighted_score
from .imaging import binarize, extract_contour, read_pgm, write_pgm
from .metrics import RegionLabel, RegionThresholds, classify_region, dice
from .orchestrator import RunConfig, RunLog, init_pools, run, run_iteration
from .pool import PoolState, oracle_label
from .predictor import (
    ExternalPredictor,
    RefPredictor,
    TrainConfig,
    extract_features,
    external_predict,
    read_umap,
    ref_predict,
    ref_train,
    write_umap,
)
from .selection import (
    PseudoPolicy,
    ScoredSample,
    SelectionQuotas,
    SelectionResult,
    apply_selection,
    pseudo_threshold,
    select_complementary,
)
from .synthdata import SynthParams, generate_dataset, generate_sample, load_dataset
from .uncertainty import McConfig, VarianceAccumulator, mc_predict

__version__ = "0.1.0"
