"""Profile error metrics and box-plot summaries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import EstimatedProfiles


class EmptyReportError(ValueError):
    pass


def _truth(truth):
    return np.asarray(getattr(truth, "probs", truth), dtype=np.float64)


def mse_per_user(truth, est: EstimatedProfiles, i: int) -> float:
    """Squared Euclidean distance between true and estimated profile of ``i``."""
    if i in est.undefined_users:
        raise ValueError(f"user {i} has no estimate under {est.attack_name}; exclude it from the average")
    d = _truth(truth)[:, i] - est.est[:, i]
    return float(d @ d)


@dataclass(frozen=True)
class MseReport:
    per_user: np.ndarray
    average: float
    excluded_users: frozenset
    n_defined: int


def mse_summary(truth, est: EstimatedProfiles) -> MseReport:
    """Per-user errors averaged over the users that have an estimate.

    Excluded users shrink the denominator; they are not scored as zero.
    """
    defined = est.defined_users
    if not defined:
        raise EmptyReportError(f"{est.attack_name}: no user has a defined estimate")
    per_user = np.full(est.est.shape[1], np.nan)
    d = _truth(truth)[:, defined] - est.est[:, defined]
    per_user[defined] = (d * d).sum(axis=0)
    return MseReport(per_user, float(per_user[defined].mean()), est.undefined_users, len(defined))


@dataclass(frozen=True)
class BoxStats:
    mean: float
    p25: float
    p75: float
    min: float
    max: float

    def as_dict(self):
        return {"mean": self.mean, "p25": self.p25, "p75": self.p75, "min": self.min, "max": self.max}


def box_stats(samples) -> BoxStats:
    """Box centred on the mean, edges at the 25th/75th percentiles.

    Percentiles interpolate linearly between order statistics (position
    ``q (n - 1)`` in the sorted sample).
    """
    a = np.asarray(samples, dtype=np.float64).ravel()
    if a.size == 0:
        raise ValueError("box_stats needs at least one sample")
    p25, p75 = np.percentile(a, [25, 75], method="linear")
    lo, hi = float(a.min()), float(a.max())
    # the float mean can land a few ulps outside [min, max]
    mean = min(max(float(a.mean()), lo), hi)
    return BoxStats(mean, float(p25), float(p75), lo, hi)
