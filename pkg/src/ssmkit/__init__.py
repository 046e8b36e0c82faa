"""Statistical shape model engine.

Loads Statismo-format PCA shape models, synthesizes instances from
principal-component coefficients, reconstructs full shapes from partial
observations via a pseudo-inverse posterior-mean solve, and exports meshes as
PLY. Served as a library, a CLI (``ssmkit``) and an HTTP session service.
"""

__version__ = "0.1.0"

from .errors import (
    ComputationCancelled,
    DimensionError,
    PlyFormatError,
    SsmError,
    StatismoFormatError,
    SvdConvergenceError,
)
from .linalg import DEFAULT_RCOND, pinv, svd
from .model import ShapeModel, TriangleMesh, build_model, instance, mean_shape, sample_random
from .picking import nearest_vertex, pick_vertex
from .ply import export_ply, parse_ply
from .posterior import (
    Observation,
    ObservationSet,
    SubModel,
    load_observations,
    posterior_mean,
    select_rows,
    solve_alpha,
)
from .statismo import ValidationReport, load_statismo, save_statismo, validate_statismo

__all__ = [
    "__version__",
    "ComputationCancelled",
    "DimensionError",
    "PlyFormatError",
    "SsmError",
    "StatismoFormatError",
    "SvdConvergenceError",
    "DEFAULT_RCOND",
    "pinv",
    "svd",
    "ShapeModel",
    "TriangleMesh",
    "build_model",
    "instance",
    "mean_shape",
    "sample_random",
    "nearest_vertex",
    "pick_vertex",
    "export_ply",
    "parse_ply",
    "Observation",
    "ObservationSet",
    "SubModel",
    "load_observations",
    "posterior_mean",
    "select_rows",
    "solve_alpha",
    "ValidationReport",
    "load_statismo",
    "save_statismo",
    "validate_statismo",
]
