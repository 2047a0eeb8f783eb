"""Threshold-mix simulation and the statistical disclosure attack family."""

from .attacks import AttackKind, SingularSystemError, UndefinedEstimate, lsda, run_attack, sda, sda0, sda1, sda2
from .core import (
    EstimatedProfiles,
    MixConfig,
    ObservationPair,
    SenderFrequencies,
    SenderProfiles,
    ValidationError,
    validate,
)
from .metrics import box_stats, mse_per_user, mse_summary
from .theory import mse_lsda_theory, mse_sda2_theory, theory_report
from .traffic import RngStream, ring_profiles, simulate

__version__ = "0.1.0"
