"""Natural synthetic anomalies: patch sampling, Poisson blending, labels and metrics."""

from .config import ClassConfig, ConfigError, load_config, parse_config, serialize_config, validate_config
from .core import Rect, RngStream, median_filter, object_mask, resize_bilinear
from .labeler import LabelMap, label_binary, label_continuous, label_logistic
from .metrics import ScoredSample, ScoreReport, au_pro, auroc, bce_loss, image_score, mse_loss, pixel_auroc
from .poisson import GuidanceField, SolveStats, guidance_mixed, guidance_source, seamless_clone, solve_poisson
from .sampler import PatchPlacement, PlacementError, sample_placements

__version__ = "0.1.0"
