"""planloc: 3-DoF visual localization against semantic maps built from OSM data.

A camera's bird's-eye-view features are matched exhaustively over
(x, y, heading) against an encoded planimetric map; the result is a
probability volume supporting point estimates, uncertainty, multi-view
fusion, and sequence filtering.
"""

from .bev import BevGrid, ColumnFeatures, ScaleBins
from .errors import (
    CompatibilityWarning,
    ConfigurationError,
    DegeneratePriorError,
    DomainError,
    FormatError,
    ParseError,
    PlanlocError,
    ThrottledError,
    TransportError,
    UnsupportedVersionError,
)
from .geometry import Datum, GridSpec, Pose2, compose, inverse, normalize_angle, transform_point
from .mapenc import AnalyticEncoderParams, NeuralMap, encode_analytic, load_neural_map, save_neural_map
from .matcher import MatchPlan, pose_posterior, rotate_template, score_volume
from .raster import MapRaster, load_tile, rasterize, save_tile
from .volumes import KIND_LOG_SCORE, KIND_PROBABILITY, PoseVolume, uniform

__version__ = "0.1.0"

__all__ = [
    "AnalyticEncoderParams",
    "BevGrid",
    "ColumnFeatures",
    "CompatibilityWarning",
    "ConfigurationError",
    "Datum",
    "DegeneratePriorError",
    "DomainError",
    "FormatError",
    "GridSpec",
    "KIND_LOG_SCORE",
    "KIND_PROBABILITY",
    "MapRaster",
    "MatchPlan",
    "NeuralMap",
    "ParseError",
    "PlanlocError",
    "Pose2",
    "PoseVolume",
    "ScaleBins",
    "ThrottledError",
    "TransportError",
    "UnsupportedVersionError",
    "compose",
    "encode_analytic",
    "inverse",
    "load_neural_map",
    "load_tile",
    "normalize_angle",
    "pose_posterior",
    "rasterize",
    "rotate_template",
    "save_neural_map",
    "save_tile",
    "score_volume",
    "transform_point",
    "uniform",
    "__version__",
]
