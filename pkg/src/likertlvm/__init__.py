"""Decomposition of longitudinal Likert data into signal, transient
error, and measurement error via a coarsened latent normal model."""

from .cutpoints import CutPointEstimate, estimate_cuts
from .harness import RmseReport, StudyConfig, autocorrelation, run_study
from .model import (
    CutPointSet,
    LatentDataset,
    LikertDataset,
    ModelParams,
    build_covariance,
    canonicalize,
    simulate,
)
from .polychoric import (
    PairTable,
    PolychoricFit,
    UndefinedCorrelationError,
    fit_pair,
    pair_log_likelihood,
)
from .reconstruction import (
    FitResult,
    ReconstructedCorrelation,
    fit_frobenius,
    reconstruct,
)
from .statprims import (
    TruncationBox,
    bivariate_norm_cdf,
    gibbs_truncated_mvn,
    norm_cdf,
    norm_quantile,
    sample_truncated_normal,
)
from .stem import (
    StemChain,
    StemConfig,
    impute_latent,
    maximize_q1,
    run_stem,
    update_cuts,
)

__version__ = "0.1.0"

__all__ = [
    "ModelParams",
    "CutPointSet",
    "LikertDataset",
    "LatentDataset",
    "build_covariance",
    "simulate",
    "canonicalize",
    "TruncationBox",
    "norm_cdf",
    "norm_quantile",
    "bivariate_norm_cdf",
    "sample_truncated_normal",
    "gibbs_truncated_mvn",
    "CutPointEstimate",
    "estimate_cuts",
    "PairTable",
    "PolychoricFit",
    "UndefinedCorrelationError",
    "pair_log_likelihood",
    "fit_pair",
    "ReconstructedCorrelation",
    "FitResult",
    "reconstruct",
    "fit_frobenius",
    "StemConfig",
    "StemChain",
    "impute_latent",
    "maximize_q1",
    "update_cuts",
    "run_stem",
    "StudyConfig",
    "RmseReport",
    "run_study",
    "autocorrelation",
    "__version__",
]
