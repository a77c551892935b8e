"""Seeded synthetic typing corpora: per-user timing profiles over a shared phrase pool.

All users type from the same pool, so typed content carries no user signal;
only the timing does. That is the point: models must read the rhythm.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import KeystrokeEvent, KeystrokeSample

SALT_SYNTH = 0x57A7

HOLD_RANGE = (60.0, 200.0)
FLIGHT_RANGE = (20.0, 180.0)
JITTER_RANGE = (5.0, 25.0)
MIN_TIME_MS = 1.0


@dataclass(frozen=True)
class TypingProfile:
    """Latent per-user timing: a mean hold/flight per character plus jitter."""

    hold_means: dict[str, float]
    flight_means: dict[str, float]
    jitter_ms: float

    @classmethod
    def constant(cls, alphabet, hold_ms: float, flight_ms: float, jitter_ms: float) -> "TypingProfile":
        return cls({c: hold_ms for c in alphabet}, {c: flight_ms for c in alphabet}, jitter_ms)


@dataclass
class SynthConfig:
    num_users: int = 8
    samples_per_user: int = 20
    phrase_pool: list[str] = field(default_factory=list)
    seed: int = 0
    hold_range: tuple[float, float] = HOLD_RANGE
    flight_range: tuple[float, float] = FLIGHT_RANGE
    jitter_range: tuple[float, float] = JITTER_RANGE


def sample_profile(rng: np.random.Generator, alphabet, hold_range=HOLD_RANGE,
                   flight_range=FLIGHT_RANGE, jitter_range=JITTER_RANGE) -> TypingProfile:
    holds = {c: float(rng.uniform(*hold_range)) for c in alphabet}
    flights = {c: float(rng.uniform(*flight_range)) for c in alphabet}
    return TypingProfile(holds, flights, float(rng.uniform(*jitter_range)))


def synth_generate(num_users: int, samples_per_user: int, phrase_pool: list[str], seed: int,
                   profiles: list[TypingProfile] | None = None,
                   hold_range=HOLD_RANGE, flight_range=FLIGHT_RANGE,
                   jitter_range=JITTER_RANGE) -> list[KeystrokeSample]:
    """Generate per-user sessions with Gaussian timing around each user's profile,
    clamped at 1 ms. Bit-identical for a given seed."""
    if num_users < 2:
        raise ValueError(f"need at least 2 users, got {num_users}")
    if not phrase_pool:
        raise ValueError("empty phrase pool")
    alphabet = sorted({c for phrase in phrase_pool for c in phrase})
    rng = np.random.default_rng([seed, SALT_SYNTH])
    if profiles is None:
        profiles = [sample_profile(rng, alphabet, hold_range, flight_range, jitter_range)
                    for _ in range(num_users)]
    elif len(profiles) != num_users:
        raise ValueError(f"got {len(profiles)} profiles for {num_users} users")

    samples = []
    for u in range(num_users):
        user_id = f"u{u:02d}"
        profile = profiles[u]
        for s in range(samples_per_user):
            phrase = phrase_pool[int(rng.integers(len(phrase_pool)))]
            events = []
            press = 0.0
            release = 0.0
            holds: list[float] = []
            flights: list[float] = []
            for j, c in enumerate(phrase):
                hold = max(MIN_TIME_MS, float(rng.normal(profile.hold_means[c], profile.jitter_ms)))
                if j == 0:
                    flight = 0.0
                else:
                    flight = max(MIN_TIME_MS,
                                 float(rng.normal(profile.flight_means[c], profile.jitter_ms)))
                press = 0.0 if j == 0 else release + flight
                release = press + hold
                events.append(KeystrokeEvent(ord(c), c, press, release))
                holds.append(hold)
                flights.append(flight)
            samples.append(KeystrokeSample(user_id, events, holds, flights, f"s{s:03d}"))
    return samples


def generate_from_config(cfg: SynthConfig) -> list[KeystrokeSample]:
    return synth_generate(cfg.num_users, cfg.samples_per_user, cfg.phrase_pool, cfg.seed,
                          hold_range=tuple(cfg.hold_range), flight_range=tuple(cfg.flight_range),
                          jitter_range=tuple(cfg.jitter_range))
