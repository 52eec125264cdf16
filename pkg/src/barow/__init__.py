"""Batched confidence-weighted online linear regression and a cross-sectional backtester."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BarowError,
    InvalidArgumentError,
    InvalidDataError,
    NumericalError,
    ParseError,
    RankDeficiencyError,
)
from .model import (  # noqa: E402
    Batch,
    BeliefState,
    Hyperparams,
    RScaling,
    arow_update,
    barow_update,
    barow_update_dispersion_form,
    barow_update_information_form,
    cost,
    init_belief,
    kl_gaussian,
    predict,
    reset_covariance,
)
