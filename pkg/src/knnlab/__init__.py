"""k-NN regression and convergence-rate experiments on the unit cube."""

from knnlab.knn_core import KnnRegressor, k_schedule
from knnlab.sampler import Dataset, DistributionSpec, NoiseKind, sample
from knnlab.smooth_model import SmoothFunction, SmoothnessClass, catalog

__all__ = [
    "Dataset",
    "DistributionSpec",
    "KnnRegressor",
    "NoiseKind",
    "SmoothFunction",
    "SmoothnessClass",
    "catalog",
    "k_schedule",
    "sample",
]
