"""Asymptotic error predictors for LSDA and SDA2.

These functions take ground truth (frequencies and profiles), never
observations.  They are meant for experiment design and for overlaying
expected values on measured errors.

The predictions rest on one approximation: for many rounds, ``X^T X`` is
replaced by its expectation ``rho * R`` where ``R`` is the per-round input
autocorrelation of a multinomial with ``t`` trials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import SenderFrequencies, SenderProfiles


class UndefinedPrediction(ArithmeticError):
    pass


def _freq(freqs):
    return np.asarray(getattr(freqs, "freq", freqs), dtype=np.float64)


def _probs(profiles):
    return np.asarray(getattr(profiles, "probs", profiles), dtype=np.float64)


def falling_factorial(t: int, n: int) -> int:
    """``t (t-1) ... (t-n+1)``; zero whenever ``n > t``."""
    return math.perm(t, n) if n <= t else 0


@dataclass(frozen=True)
class TheoryIntermediates:
    binomial_variances: np.ndarray
    eta: float
    falling_factorials: dict

    @classmethod
    def for_recipient(cls, profiles, freqs, t: int, j: int) -> TheoryIntermediates:
        p = _probs(profiles)[j]
        s = p * (1.0 - p)
        return cls(s, float(_freq(freqs) @ s), {n: falling_factorial(t, n) for n in (1, 2, 3)})


def uniformity(profile_column) -> float:
    """``1 - sum_j p_j^2``: 0 for a single contact, (N-1)/N for uniform."""
    p = np.asarray(profile_column, dtype=np.float64)
    return float(1.0 - p @ p)


def uniformities(profiles) -> np.ndarray:
    p = _probs(profiles)
    return 1.0 - (p * p).sum(axis=0)


def background_profile(profiles, freqs, i: int) -> np.ndarray:
    """Frequency-weighted mixture of every profile except sender ``i``'s."""
    f, p = _freq(freqs), _probs(profiles)
    if not f[i] < 1.0:
        raise UndefinedPrediction(f"user {i} sends every message; no background exists")
    w = f.copy()
    w[i] = 0.0
    return p @ w / (1.0 - f[i])


def background_uniformities(profiles, freqs) -> np.ndarray:
    f = _freq(freqs)
    return np.array([uniformity(background_profile(profiles, f, i)) for i in range(f.shape[0])])


def autocorrelation(freqs, t: int) -> np.ndarray:
    """Per-round ``E{x x^T}`` for multinomial senders: ``t[F + (t-1) f f^T]``."""
    f = _freq(freqs)
    return t * (np.diag(f) + (t - 1) * np.outer(f, f))


def autocorrelation_inverse(freqs, t: int) -> np.ndarray:
    """Closed-form inverse via the diagonal-plus-rank-one structure.

    ``R^-1 = (1/t) [F^-1 - (1 - 1/t) 1 1^T]``; the rank-one correction
    collapses to a constant because ``sum f = 1``.
    """
    f = _freq(freqs)
    if (f <= 0).any():
        zero = np.flatnonzero(f <= 0).tolist()
        raise UndefinedPrediction(f"autocorrelation is singular: users {zero} never send")
    n = f.shape[0]
    return (np.diag(1.0 / f) - (1.0 - 1.0 / t) * np.ones((n, n))) / t


def covariance_middle_term(profiles, freqs, t: int, rho: int, j: int) -> np.ndarray:
    """Closed form of ``E{X^T Sigma_{y_j|X} X}`` for recipient ``j``.

    ``Sigma_{y_j|X}`` is diagonal with entries ``sum_k x_k^r s_k``, where
    ``s_k = p_{j,k}(1 - p_{j,k})``.  The expectation expands into the
    multinomial third moments.
    """
    f = _freq(freqs)
    n = f.shape[0]
    mid = TheoryIntermediates.for_recipient(profiles, f, t, j)
    s, eta = mid.binomial_variances, mid.eta
    t1, t2, t3 = (mid.falling_factorials[k] for k in (1, 2, 3))
    F = np.diag(f)
    S = np.diag(s)
    ones = np.ones((n, n))
    rank_part = F @ (eta * t3 * ones + t2 * S @ ones + t2 * ones @ S) @ F
    diag_part = (eta * t2 * np.eye(n) + t1 * S) @ F
    return rho * (rank_part + diag_part)


def lsda_covariance(profiles, freqs, t: int, rho: int, j: int) -> np.ndarray:
    """Asymptotic covariance of the LSDA estimate of column ``j`` (sender axis).

    Diagnostic: ``(rho R)^-1 E{X^T Sigma X} (rho R)^-1``.  Its diagonal summed
    over recipients reproduces :func:`mse_lsda_theory`.
    """
    r_inv = autocorrelation_inverse(freqs, t)
    return r_inv @ covariance_middle_term(profiles, freqs, t, rho, j) @ r_inv / rho**2


def _mse(f_i, t, rho, avg_uniformity, u_i):
    if not f_i > 0:
        raise UndefinedPrediction("a user with zero sending frequency cannot be profiled")
    if rho < 1:
        raise ValueError(f"rho must be >= 1, got {rho}")
    return ((1.0 / f_i - 1.0) * (1.0 - 1.0 / t) * avg_uniformity + u_i / (f_i * t)) / rho


def mse_lsda_theory(profiles, freqs, t: int, rho: int, i: int) -> float:
    """Predicted LSDA error for sender ``i`` after ``rho`` rounds."""
    f = _freq(freqs)
    u = uniformities(profiles)
    return _mse(f[i], t, rho, float(f @ u), u[i])


def sda2_average_uniformity(profiles, freqs, i: int) -> float:
    """Average uniformity of the two-party system {user i, its background}."""
    f = _freq(freqs)
    u_i = uniformity(_probs(profiles)[:, i])
    if f[i] == 1.0:
        return u_i
    return f[i] * u_i + (1.0 - f[i]) * uniformity(background_profile(profiles, f, i))


def mse_sda2_theory(profiles, freqs, t: int, rho: int, i: int) -> float:
    """Predicted SDA2 error for sender ``i``.

    Same shape as the LSDA prediction, with the population average
    uniformity replaced by that of user ``i`` plus its aggregated background.
    Never below the LSDA value.
    """
    f = _freq(freqs)
    u_i = uniformity(_probs(profiles)[:, i])
    return _mse(f[i], t, rho, sda2_average_uniformity(profiles, f, i), u_i)


@dataclass(frozen=True)
class TheoryReport:
    per_user_mse_lsda: np.ndarray
    per_user_mse_sda2: np.ndarray
    avg_uniformity_lsda: float
    avg_uniformity_sda2_per_user: np.ndarray
    uniformities: np.ndarray
    background_uniformities: np.ndarray
    threshold: int
    rounds: int

    def average(self, which: str) -> float:
        """Mean predicted error over users with a finite prediction."""
        v = {"lsda": self.per_user_mse_lsda, "sda2": self.per_user_mse_sda2}[which]
        return float(np.nanmean(v))

    def to_dict(self) -> dict:
        def clean(a):
            return [None if not np.isfinite(v) else float(v) for v in np.asarray(a)]

        return {
            "threshold": self.threshold,
            "rounds": self.rounds,
            "avg_uniformity_lsda": self.avg_uniformity_lsda,
            "average_mse_lsda": self.average("lsda"),
            "average_mse_sda2": self.average("sda2"),
            "per_user_mse_lsda": clean(self.per_user_mse_lsda),
            "per_user_mse_sda2": clean(self.per_user_mse_sda2),
            "avg_uniformity_sda2_per_user": clean(self.avg_uniformity_sda2_per_user),
            "uniformities": clean(self.uniformities),
            "background_uniformities": clean(self.background_uniformities),
        }


def theory_report(profiles: SenderProfiles, freqs: SenderFrequencies, t: int, rho: int) -> TheoryReport:
    """Predictions for every user; users with zero frequency get NaN."""
    f = _freq(freqs)
    n = f.shape[0]
    u = uniformities(profiles)
    u_b = np.full(n, np.nan)
    u_sda2 = np.full(n, np.nan)
    lsda = np.full(n, np.nan)
    sda2 = np.full(n, np.nan)
    avg = float(f @ u)
    for i in range(n):
        if f[i] < 1.0:
            u_b[i] = uniformity(background_profile(profiles, f, i))
        u_sda2[i] = sda2_average_uniformity(profiles, f, i)
        if f[i] > 0:
            lsda[i] = _mse(f[i], t, rho, avg, u[i])
            sda2[i] = _mse(f[i], t, rho, u_sda2[i], u[i])
    return TheoryReport(lsda, sda2, avg, u_sda2, u, u_b, t, rho)
