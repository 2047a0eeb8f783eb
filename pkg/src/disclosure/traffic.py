"""Synthetic threshold-mix traffic.

Each round, the ``t`` senders are a multinomial draw over the sender
frequencies; every message then picks its recipient independently from its
sender's profile.  The output counts are what leaves the mix that round.
"""

from dataclasses import dataclass

import numpy as np

from .core import MixConfig, ObservationPair, SenderFrequencies, SenderProfiles, ValidationError, validate


@dataclass(frozen=True)
class RngStream:
    """A reproducible, independent random stream.

    ``(seed, stream_id)`` feeds a numpy ``SeedSequence`` spawn key, so distinct
    stream ids give statistically independent PCG64 generators regardless of
    which worker draws them or in what order.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))


def _draw_rounds(freq, probs, t, n_rounds, rng):
    n = freq.shape[0]
    x = rng.multinomial(t, freq, size=n_rounds).astype(np.int64)
    y = np.zeros(n_rounds * n, dtype=np.int64)
    rounds = np.arange(n_rounds)
    for i in range(n):
        sent = x[:, i]
        total = int(sent.sum())
        if total == 0:
            continue
        recipients = rng.choice(n, size=total, p=probs[:, i])
        y += np.bincount(np.repeat(rounds, sent) * n + recipients, minlength=n_rounds * n)
    return x, y.reshape(n_rounds, n)


def _generator(rng):
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


def sample_round(freqs: SenderFrequencies, profiles: SenderProfiles, t: int, rng):
    """Draw one round; returns ``(x_row, y_row)``, both summing to ``t``.

    ``rng`` may be an :class:`RngStream` (fresh generator each call) or a live
    numpy ``Generator`` (advanced in place).
    """
    x, y = _draw_rounds(freqs.freq, profiles.probs, t, 1, _generator(rng))
    return x[0], y[0]


def simulate(config: MixConfig, freqs: SenderFrequencies, profiles: SenderProfiles,
             stream_id: int = 0) -> ObservationPair:
    """Observe ``config.rounds`` independent rounds of the mix.

    Pure in ``(config, freqs, profiles, stream_id)``.
    """
    problems = validate(config, freqs, profiles)
    if problems:
        raise ValidationError(problems)
    rng = RngStream(config.seed, stream_id).generator()
    x, y = _draw_rounds(freqs.freq, profiles.probs, config.threshold, config.rounds, rng)
    return ObservationPair(x, y)


def ring_profiles(n_users: int, n_friends: int, self_send: bool = True) -> SenderProfiles:
    """Each sender spreads messages evenly over ``n_friends`` neighbours on a ring.

    Sender ``i`` addresses ``(i + k) mod N`` for ``k = 0..M-1``, so the first
    friend is the sender itself.  With ``self_send=False`` the offsets become
    ``k = 1..M``, which requires ``M < N``.
    """
    top = n_users if self_send else n_users - 1
    if not 1 <= n_friends <= top:
        raise ValueError(f"n_friends must be in [1, {top}] for N={n_users}, got {n_friends}")
    start = 0 if self_send else 1
    probs = np.zeros((n_users, n_users))
    senders = np.arange(n_users)
    for k in range(start, start + n_friends):
        probs[(senders + k) % n_users, senders] = 1.0 / n_friends
    return SenderProfiles(probs)


def skewed_frequencies(n_users: int, skew: float) -> SenderFrequencies:
    """Geometric family ``f_i ∝ exp(-skew * i / (N - 1))``; ``skew=0`` is uniform.

    ``skew`` is the log-ratio between the most and least active user.
    """
    if n_users < 2:
        raise ValueError(f"n_users must be >= 2, got {n_users}")
    if skew < 0:
        raise ValueError(f"skew must be >= 0, got {skew}")
    w = np.exp(-skew * np.arange(n_users) / (n_users - 1))
    return SenderFrequencies(w / w.sum())
