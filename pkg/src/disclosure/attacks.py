"""The statistical disclosure attack family.

Every estimator maps an :class:`ObservationPair` to raw estimates of the
sender profiles.  None of them sees the true profiles.  Per-user attacks
(SDA, SDA0, SDA1, SDA2) raise :class:`UndefinedEstimate` when the data
cannot support an estimate for a user; :func:`run_attack` turns that into an
entry in ``undefined_users``.  LSDA estimates all users jointly.
"""

from __future__ import annotations

import enum
import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .core import EstimatedProfiles, ObservationPair, background_vector, binary_indicator

log = logging.getLogger(__name__)

CONDITION_WARN = 1e8


class AttackKind(enum.Enum):
    SDA = "sda"
    SDA0 = "sda0"
    SDA1 = "sda1"
    SDA2 = "sda2"
    LSDA = "lsda"

    @classmethod
    def parse(cls, name: str) -> AttackKind:
        try:
            return cls(name.strip().lower())
        except ValueError:
            choices = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown attack {name!r}; choose from {choices}") from None


class UndefinedEstimate(ArithmeticError):
    """The observations carry no usable information for this user."""

    def __init__(self, user, reason):
        self.user = user
        self.reason = reason
        super().__init__(f"user {user}: {reason}")


class SingularSystemError(np.linalg.LinAlgError):
    def __init__(self, rank, size):
        self.rank = rank
        self.size = size
        super().__init__(
            f"X^T X is singular: rank {rank} < {size}; some users are not separable "
            "from the observations (observe more rounds or enable min_norm)"
        )


@dataclass(frozen=True)
class BackgroundEstimate:
    value: np.ndarray | None
    rounds_used: int

    @property
    def defined(self) -> bool:
        return self.rounds_used > 0


@dataclass(frozen=True)
class LsdaResult:
    profiles: EstimatedProfiles
    condition_number: float
    rank: int


def _check_user(obs, i):
    if not 0 <= i < obs.n_users:
        raise IndexError(f"user index {i} out of range for {obs.n_users} users")


def estimate_background(obs: ObservationPair, i: int, t: int) -> BackgroundEstimate:
    """Average output in the rounds where ``i`` sent nothing, divided by ``t``.

    ``value`` is ``None`` when ``i`` took part in every round.
    """
    _check_user(obs, i)
    idle = binary_indicator(obs.x[:, i]) == 0
    used = int(idle.sum())
    if used == 0:
        return BackgroundEstimate(None, 0)
    return BackgroundEstimate(obs.y[idle].sum(axis=0) / (t * used), used)


def sda(obs: ObservationPair, i: int, t: int, n_users: int) -> np.ndarray:
    """Original SDA: mean output over i's rounds minus a uniform background."""
    _check_user(obs, i)
    sel = binary_indicator(obs.x[:, i])
    active = int(sel.sum())
    if active == 0:
        raise UndefinedEstimate(i, "never sends")
    return (sel @ obs.y) / active - (t - 1) / n_users


def _weighted_sda(obs, i, t, weights):
    x_i = obs.x[:, i]
    denom = int(weights @ x_i)
    if denom == 0:
        raise UndefinedEstimate(i, "never sends")
    bg = estimate_background(obs, i, t)
    if not bg.defined:
        raise UndefinedEstimate(i, "sends in every round; background cannot be estimated")
    x_b = background_vector(obs.x, i, t)
    return (weights @ obs.y) / denom - (int(weights @ x_b) / denom) * bg.value


def sda0(obs: ObservationPair, i: int, t: int) -> np.ndarray:
    _check_user(obs, i)
    return _weighted_sda(obs, i, t, binary_indicator(obs.x[:, i]))


def sda1(obs: ObservationPair, i: int, t: int) -> np.ndarray:
    """SDA0 with each round weighted by how many messages ``i`` sent in it."""
    _check_user(obs, i)
    return _weighted_sda(obs, i, t, obs.x[:, i])


def sda2(obs: ObservationPair, i: int, t: int, with_background: bool = False):
    """Joint least-squares fit of user ``i`` and its aggregate background.

    Regresses each recipient's output on ``(x_i, x_b)`` over all rounds.  The
    2x2 Gram matrix is integer-valued, so singularity is decided exactly.
    Returns the profile estimate, or ``(profile, background)`` when
    ``with_background`` is set.
    """
    _check_user(obs, i)
    u = np.column_stack([obs.x[:, i], background_vector(obs.x, i, t)])
    gram = u.T @ u
    det = int(gram[0, 0]) * int(gram[1, 1]) - int(gram[0, 1]) ** 2
    if det == 0:
        raise UndefinedEstimate(i, "own traffic is proportional to its background")
    z = np.linalg.solve(gram.astype(np.float64), (u.T @ obs.y).astype(np.float64))
    return (z[0], z[1]) if with_background else z[0]


def lsda(obs: ObservationPair, min_norm: bool = False) -> LsdaResult:
    """Least Squares Disclosure Attack over all users at once.

    Solves ``X^T X P = X^T Y`` for every recipient with one Cholesky factor
    of ``X^T X``.  A rank-deficient system raises
    :class:`SingularSystemError` unless ``min_norm`` selects the
    minimum-norm least-squares solution instead.
    """
    x = obs.x.astype(np.float64)
    gram = x.T @ x
    rhs = x.T @ obs.y.astype(np.float64)
    n = obs.n_users
    eig = np.linalg.eigvalsh(gram)
    tol = eig[-1] * n * np.finfo(np.float64).eps
    rank = int((eig > tol).sum())
    cond = float(eig[-1] / eig[0]) if eig[0] > tol else np.inf
    if rank < n:
        if not min_norm:
            raise SingularSystemError(rank, n)
        sol = np.linalg.lstsq(x, obs.y.astype(np.float64), rcond=None)[0]
    else:
        if cond > CONDITION_WARN:
            warnings.warn(f"X^T X is ill-conditioned (condition number {cond:.3g})", stacklevel=2)
        sol = scipy.linalg.cho_solve(scipy.linalg.cho_factor(gram), rhs)
    # sol[k, j] estimates p_{j,k}
    return LsdaResult(EstimatedProfiles(sol.T, AttackKind.LSDA.value), cond, rank)


_PER_USER = {
    AttackKind.SDA: lambda obs, i, t: sda(obs, i, t, obs.n_users),
    AttackKind.SDA0: sda0,
    AttackKind.SDA1: sda1,
    AttackKind.SDA2: sda2,
}


def run_attack(kind, obs: ObservationPair, config=None, min_norm: bool = False) -> EstimatedProfiles:
    """Run one attack over every user.

    ``config`` (a :class:`MixConfig`) is optional; when given it must agree
    with the observations.  Per-user failures become ``undefined_users``;
    an LSDA singularity propagates as :class:`SingularSystemError`.
    """
    if isinstance(kind, str):
        kind = AttackKind.parse(kind)
    t = obs.threshold
    if config is not None and (config.threshold != t or config.n_users != obs.n_users):
        raise ValueError(
            f"config (N={config.n_users}, t={config.threshold}) does not match "
            f"observations (N={obs.n_users}, t={t})"
        )
    if kind is AttackKind.LSDA:
        return lsda(obs, min_norm=min_norm).profiles
    estimator = _PER_USER[kind]
    n = obs.n_users
    est = np.full((n, n), np.nan)
    undefined = []
    for i in range(n):
        try:
            est[:, i] = estimator(obs, i, t)
        except UndefinedEstimate as exc:
            log.debug("%s: %s", kind.value, exc)
            undefined.append(i)
    return EstimatedProfiles(est, kind.value, undefined)
