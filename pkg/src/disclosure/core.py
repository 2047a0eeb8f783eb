"""Domain types shared by the simulator, the attacks and the predictors.

Layout conventions used everywhere in the package:

* observations are ``(round, user)`` integer matrices, so ``x[r, i]`` is the
  number of messages user ``i`` sent in round ``r``;
* profiles are ``(recipient, sender)`` matrices, so ``probs[j, i]`` is the
  probability that sender ``i`` addresses recipient ``j`` and every column is
  a distribution.

Users are 0-indexed internally.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

STOCHASTIC_TOL = 1e-12
ESTIMATE_SUM_TOL = 1e-9

SEED_MAX = 2**64 - 1


class ValidationError(ValueError):
    """Raised when inputs break a model invariant."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MixConfig:
    n_users: int
    threshold: int
    rounds: int
    seed: int = 0

    def __post_init__(self):
        problems = _config_violations(self)
        if problems:
            raise ValidationError(problems)


@dataclass(frozen=True, eq=False)
class SenderFrequencies:
    """Probability that a message entering the mix comes from each user."""

    freq: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "freq", _frozen(self.freq, np.float64))
        problems = _freq_violations(self.freq)
        if problems:
            raise ValidationError(problems)

    @property
    def n_users(self) -> int:
        return self.freq.shape[0]

    @classmethod
    def uniform(cls, n_users: int) -> SenderFrequencies:
        return cls(np.full(n_users, 1.0 / n_users))


@dataclass(frozen=True, eq=False)
class SenderProfiles:
    """Column ``i`` is the recipient distribution of sender ``i``."""

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", _frozen(self.probs, np.float64))
        problems = _profile_violations(self.probs)
        if problems:
            raise ValidationError(problems)

    @property
    def n_users(self) -> int:
        return self.probs.shape[0]

    def column(self, i: int) -> np.ndarray:
        return self.probs[:, i]

    def recipient_view(self, j: int) -> np.ndarray:
        """Probabilities with which each sender addresses recipient ``j``."""
        return self.probs[j, :]


@dataclass(frozen=True, eq=False)
class ObservationPair:
    """What a global passive observer of the mix records over ``rounds`` rounds."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _frozen(self.x, np.int64))
        object.__setattr__(self, "y", _frozen(self.y, np.int64))
        problems = _observation_violations(self.x, self.y)
        if problems:
            raise ValidationError(problems)

    @property
    def rounds(self) -> int:
        return self.x.shape[0]

    @property
    def n_users(self) -> int:
        return self.x.shape[1]

    @property
    def threshold(self) -> int:
        return int(self.x[0].sum())

    def __eq__(self, other):
        if not isinstance(other, ObservationPair):
            return NotImplemented
        return np.array_equal(self.x, other.x) and np.array_equal(self.y, other.y)


@dataclass(frozen=True, eq=False)
class EstimatedProfiles:
    """Raw estimates ``est[j, i]`` of ``p_{j,i}``; undefined columns hold NaN.

    The estimators are unconstrained, so entries may fall outside [0, 1].
    """

    est: np.ndarray
    attack_name: str
    undefined_users: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "est", _frozen(self.est, np.float64))
        object.__setattr__(self, "undefined_users", frozenset(int(i) for i in self.undefined_users))

    @property
    def n_users(self) -> int:
        return self.est.shape[0]

    @property
    def defined_users(self) -> list[int]:
        return [i for i in range(self.est.shape[1]) if i not in self.undefined_users]

    def column_sum_violations(self, tol: float = ESTIMATE_SUM_TOL) -> list[int]:
        sums = self.est.sum(axis=0)
        return [i for i in self.defined_users if not abs(sums[i] - 1.0) <= tol]


def clamp_and_normalize(est: EstimatedProfiles) -> EstimatedProfiles:
    """Project each defined column onto [0, 1] and rescale it to sum to one.

    Off the default path: the error analysis is for the raw estimator.
    """
    clipped = np.clip(est.est, 0.0, 1.0)
    sums = clipped.sum(axis=0)
    out = clipped.copy()
    for i in est.defined_users:
        out[:, i] = clipped[:, i] / sums[i] if sums[i] > 0 else 1.0 / est.n_users
    return EstimatedProfiles(out, est.attack_name + "+clamped", est.undefined_users)


def binary_indicator(x) -> np.ndarray:
    """1 where a user sent at least one message in a round, else 0."""
    return (np.asarray(x) >= 1).astype(np.int64)


def background_vector(x, i: int, t: int) -> np.ndarray:
    """Per-round message count of every user except ``i``: ``t - x[:, i]``."""
    x = np.asarray(x)
    if not 0 <= i < x.shape[1]:
        raise IndexError(f"user index {i} out of range for {x.shape[1]} users")
    return t - x[:, i].astype(np.int64)


def _config_violations(config) -> list[str]:
    out = []
    if config.n_users < 2:
        out.append(f"n_users must be >= 2, got {config.n_users}")
    if config.threshold < 1:
        out.append(f"threshold must be >= 1, got {config.threshold}")
    if config.rounds < 1:
        out.append(f"rounds must be >= 1, got {config.rounds}")
    if not 0 <= config.seed <= SEED_MAX:
        out.append(f"seed must fit in 64 unsigned bits, got {config.seed}")
    return out


def _freq_violations(freq) -> list[str]:
    freq = np.asarray(freq, dtype=np.float64)
    if freq.ndim != 1:
        return [f"frequencies must be a vector, got shape {freq.shape}"]
    out = [f"frequency of user {i} is negative ({v})" for i, v in enumerate(freq) if not v >= 0]
    total = freq.sum()
    if not abs(total - 1.0) <= STOCHASTIC_TOL:
        out.append(f"frequencies sum to {total!r}, expected 1")
    return out


def _profile_violations(probs) -> list[str]:
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[0] != probs.shape[1]:
        return [f"profiles must be a square matrix, got shape {probs.shape}"]
    out = []
    bad = np.argwhere(~((probs >= 0) & (probs <= 1)))
    for j, i in bad:
        out.append(f"profile entry (recipient {j}, sender {i}) = {probs[j, i]} outside [0, 1]")
    sums = probs.sum(axis=0)
    for i, s in enumerate(sums):
        if not abs(s - 1.0) <= STOCHASTIC_TOL:
            out.append(f"profile of sender {i} sums to {s!r}, expected 1")
    return out


def _observation_violations(x, y) -> list[str]:
    if x.ndim != 2 or x.shape != y.shape:
        return [f"x and y must be matching 2-d arrays, got {x.shape} and {y.shape}"]
    if x.shape[0] == 0:
        return ["observations need at least one round"]
    out = []
    if (x < 0).any() or (y < 0).any():
        out.append("observation counts must be nonnegative")
    t = x[0].sum()
    for name, m in (("x", x), ("y", y)):
        bad = np.flatnonzero(m.sum(axis=1) != t)
        if bad.size:
            out.append(f"rows of {name} must all sum to {t}; first offending round {bad[0]}")
    return out


def validate(config=None, freqs=None, profiles=None) -> list[str]:
    """Check the model invariants of whichever inputs are given.

    Returns every violation found (empty list when everything is fine); never
    raises.  Accepts either the typed objects or raw arrays.
    """
    out = []
    if config is not None:
        out += _config_violations(config)
    f = getattr(freqs, "freq", freqs)
    p = getattr(profiles, "probs", profiles)
    if f is not None:
        out += _freq_violations(f)
    if p is not None:
        out += _profile_violations(p)
    sizes = {
        "config": getattr(config, "n_users", None),
        "frequencies": None if f is None else np.shape(f)[0],
        "profiles": None if p is None else np.shape(p)[0],
    }
    known = {k: v for k, v in sizes.items() if v is not None}
    if len(set(known.values())) > 1:
        out.append("population size disagrees: " + ", ".join(f"{k}={v}" for k, v in known.items()))
    return out
