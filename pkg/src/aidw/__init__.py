"""Adaptive inverse distance weighting with grid-accelerated exact kNN search."""

from ._jit import FAST as _FAST  # noqa: F401  (configures numba before any kernel compiles)
from .aidw_params import (
    AdaptiveAlpha,
    adaptive_alpha,
    adaptive_alphas,
    alpha_from_mu,
    expected_nn_distance,
    nn_statistic,
    normalize_mu,
)
from .core_types import (
    AidwParams,
    BoundingBox,
    DataPoint,
    PointSet,
    QueryPoint,
    ValueRule,
    compute_bbox,
    generate_random_points,
    read_points,
    write_points,
)
from .grid_index import (
    GridConfig,
    GridIndex,
    build_index,
    choose_cell_width,
    delinearize,
    linearize,
    locate_cell,
    make_grid,
)
from .interpolation import (
    InterpolationResult,
    aidw_predict_all,
    idw_predict,
    idw_predict_all,
)
from .knn_search import (
    KnnBatch,
    KnnResult,
    brute_force_knn,
    determine_expansion_level,
    grid_knn,
    knn_stage,
)
from .parallel_executor import StageTimings, parallel_map_indexed, time_stage

__version__ = "0.1.0"
