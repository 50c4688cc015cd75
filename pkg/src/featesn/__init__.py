"""Feature-based echo-state networks and the classic ESN baseline."""

from .core_math import (derive_seed, erdos_renyi, kronecker, normalize_spectral,
                        power_iteration, ridge_solve, spectral_radius)
from .data import (EmbeddingSpec, LorenzParams, RosslerParams, TimeSeries, add_noise,
                   closed_loop_embed_adapter, delay_embed, generate_lorenz, generate_rossler,
                   load_traffic_csv, split)
from .esn import EsnHyperparams, EsnModel
from .exceptions import (ConfigError, DataError, FeatEsnError, NotTrainedError, NumericError,
                         ParameterError, ShapeError, SingularMatrixError)
from .feat_esn import (FeatEsnHyperparams, FeatEsnModel, FeatureMatrix, feature_contributions,
                       full_feature_matrix, prefix_feature_matrix, prune, readout_vector,
                       singleton_feature_matrix, suggest_prune_threshold)
from .metrics import TrialResult, aggregate, nrmse, pearson

__version__ = "0.1.0"

__all__ = [
    "derive_seed",
    "erdos_renyi",
    "kronecker",
    "normalize_spectral",
    "power_iteration",
    "ridge_solve",
    "spectral_radius",
    "EmbeddingSpec",
    "LorenzParams",
    "RosslerParams",
    "TimeSeries",
    "add_noise",
    "closed_loop_embed_adapter",
    "delay_embed",
    "generate_lorenz",
    "generate_rossler",
    "load_traffic_csv",
    "split",
    "EsnHyperparams",
    "EsnModel",
    "ConfigError",
    "DataError",
    "FeatEsnError",
    "NotTrainedError",
    "NumericError",
    "ParameterError",
    "ShapeError",
    "SingularMatrixError",
    "FeatEsnHyperparams",
    "FeatEsnModel",
    "FeatureMatrix",
    "feature_contributions",
    "full_feature_matrix",
    "prefix_feature_matrix",
    "prune",
    "readout_vector",
    "singleton_feature_matrix",
    "suggest_prune_threshold",
    "TrialResult",
    "aggregate",
    "nrmse",
    "pearson",
]
