"""Pain-score regression from facial landmark sequences.

Landmark sequences become trajectories of Gram matrices on the manifold of
fixed-rank PSD matrices, are smoothed by blended Bezier curves, compared
with the global alignment kernel and regressed with an epsilon-SVR.
"""
from .evaluation import ProtocolSpec, make_folds, permutation_control, run_protocol
from .fitting import FittingConfig, fit_trajectory, mean_square_acceleration
from .gak import SimilarityKernel, build_kernel_matrix, gak_similarity, load_kernel, save_kernel
from .landmark_io import Dataset, GeneratorConfig, LandmarkSequence, ParseError, generate_synthetic, load_dataset
from .manifold import distance, distance_2d, exp_map, log_map, optimal_rotation
from .regression import PredictionReport, SvrModel, mae, predict, rmse, train_svr
from .representation import GramTrajectory, build_trajectory

__version__ = "0.1.0"

__all__ = [
    "Dataset", "FittingConfig", "GeneratorConfig", "GramTrajectory", "LandmarkSequence", "ParseError",
    "PredictionReport", "ProtocolSpec", "SimilarityKernel", "SvrModel", "build_kernel_matrix",
    "build_trajectory", "distance", "distance_2d", "exp_map", "fit_trajectory", "gak_similarity",
    "generate_synthetic", "load_dataset", "load_kernel", "log_map", "mae", "make_folds",
    "mean_square_acceleration", "optimal_rotation", "permutation_control", "predict", "rmse",
    "run_protocol", "save_kernel", "train_svr",
]
