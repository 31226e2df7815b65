"""Robust support vector machines trained with a conic loss derived from the
convex hull of the 0-1 loss mixed-integer set."""

from .core import (
    InputError,
    Kernel,
    LabeledDataset,
    SolverError,
    SolverStatus,
    TrainedClassifier,
    gram_matrix,
    misclassification_rate,
    predict,
    read_csv,
    read_model,
    write_csv,
    write_model,
)
from .loss import (
    ConicLossParams,
    conic_loss,
    conic_loss_argmin_z,
    gamma_max_single,
    hinge_loss,
    strengthening_h,
    zero_one_loss,
)

__version__ = "0.1.0"
