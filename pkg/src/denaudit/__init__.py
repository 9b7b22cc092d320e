"""Label-free performance disparity estimates from proxy embedding neighborhoods."""

__version__ = "0.1.0"

from .core import (DataError, Dataset, DenError, ModelRun, Partition, TaskKind,  # noqa: E402
                   per_datapoint_error, validate_dataset)
from .disparity import (EPSILON, DenCurve, DisparityMetric, NeighborhoodErrors, SizeGrid,  # noqa: E402
                        default_grid, den_curve, estimation_error_curve, neighborhood_errors,
                        partition_disparity, rawlsian, std_dev, sweep_neighborhood_errors)
from .geometry import (DistanceProfile, Metric, NeighborhoodSpec, build_distance_profile,  # noqa: E402
                       knn_neighborhood, per_point_retrieval_auroc, radius_neighborhood)
from .stats import (CorrelationResult, RankReport, ccc, kendall_tau_with_p, pcc,  # noqa: E402
                    pearson_with_p, rank_models, rmse, sagr)
