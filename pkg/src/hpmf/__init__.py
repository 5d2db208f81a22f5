"""Tensor completion with hierarchical low-rank, total-variation and DCT sparse priors."""

from .errors import HpmfError
from .imaging import SamplingSpec, load_image, make_observation, psnr, rse, save_image, ssim
from .priors import PriorOperators, build_dct_matrix, build_tv_matrix, estimate_rank
from .solver import (
    CompletionReport,
    HpmfConfig,
    ModeState,
    ObservationProblem,
    run_hpmf,
)
from .tensor_core import fold_mode, khatri_rao, kronecker, unfold_mode

__version__ = "0.1.0"

__all__ = [
    "CompletionReport",
    "HpmfConfig",
    "HpmfError",
    "ModeState",
    "ObservationProblem",
    "PriorOperators",
    "SamplingSpec",
    "build_dct_matrix",
    "build_tv_matrix",
    "estimate_rank",
    "fold_mode",
    "khatri_rao",
    "kronecker",
    "load_image",
    "make_observation",
    "psnr",
    "rse",
    "run_hpmf",
    "save_image",
    "ssim",
    "unfold_mode",
]
