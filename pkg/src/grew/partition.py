"""Keyed, step-dependent green/red partition of the item space.

A secret 64-bit key fixes a Gaussian projection direction; every item
embedding is collapsed onto that direction to a scalar coordinate. For each
recommendation step a 32-bit seed is derived from the key and the user's
recent history, and an item is green when ``|sin((c + seed) * omega)|`` is at
most ``gamma``. Nearby coordinates get nearby hash values, so semantically
close items tend to share a colour.
"""
from dataclasses import dataclass
import math

import numpy as np

from grew import kernels

MASK64 = (1 << 64) - 1
MASK32 = (1 << 32) - 1
TWO32 = float(1 << 32)
KNUTH_A = 2654435761
# smallest positive (subnormal) double; stands in for a zero uniform
_TINY = math.ldexp(1.0, -1074)


@dataclass(frozen=True)
class SecretKey:
    value: int

    def __post_init__(self):
        if not 0 <= int(self.value) <= MASK64:
            raise ValueError("secret key must fit in an unsigned 64-bit integer")
        object.__setattr__(self, "value", int(self.value))

    def __repr__(self):
        # keep the credential out of logs and tracebacks
        return "SecretKey(<redacted>)"


@dataclass(frozen=True)
class PartitionConfig:
    gamma: float = 0.5
    omega: float = 2.0 * math.pi
    hash_constant: int = KNUTH_A
    context_width: int = 1

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not self.omega > 0.0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if not 0 <= self.hash_constant <= MASK32:
            raise ValueError("hash_constant must be an unsigned 32-bit integer")
        if self.context_width < 1:
            raise ValueError("context_width must be >= 1")


@dataclass(frozen=True)
class StepSeed:
    raw: int
    normalized: float
    context_id: int


@dataclass(frozen=True)
class GreenMask:
    bits: np.ndarray
    step_seed: StepSeed


# ------------------------------------------------------------------ PRNG


class SplitMix64:
    """SplitMix64 generator on Python ints (exact 64-bit wrap-around)."""

    GOLDEN = 0x9E3779B97F4A7C15

    def __init__(self, seed):
        self.state = int(seed) & MASK64

    def next_u64(self):
        self.state = (self.state + self.GOLDEN) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def next_double(self):
        """Uniform on [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * 2.0**-53


def box_muller(u1, u2):
    if u1 == 0.0:
        u1 = _TINY
    r = math.sqrt(-2.0 * math.log(u1))
    theta = 2.0 * math.pi * u2
    return r * math.cos(theta), r * math.sin(theta)


def derive_projection(key, d):
    """Key-derived standard-normal projection vector of length ``d``.

    Uniform pairs from SplitMix64 seeded with the key feed Box-Muller; both
    normals of each pair are used, and the last one is dropped for odd ``d``.
    """
    if int(d) < 1:
        raise ValueError(f"projection dimension must be >= 1, got {d}")
    rng = SplitMix64(key.value)
    out = []
    while len(out) < d:
        out.extend(box_muller(rng.next_double(), rng.next_double()))
    return np.array(out[:d], dtype=np.float64)


# ------------------------------------------------------------ partition


def semantic_coordinates(embeddings, projection):
    E = np.asarray(embeddings, dtype=np.float64)
    v = np.asarray(projection, dtype=np.float64)
    if E.ndim != 2 or v.ndim != 1 or E.shape[1] != v.shape[0]:
        raise ValueError(
            f"embedding width {E.shape[-1]} does not match projection length {v.shape[0]}")
    return (E @ v) / math.sqrt(E.shape[1])


def context_id(history, cfg=PartitionConfig()):
    if len(history) == 0:
        return 0
    if cfg.context_width == 1:
        return int(history[-1]) & MASK32
    r = 0
    for item in history[-cfg.context_width:]:
        r = (r * cfg.hash_constant + int(item)) & MASK32
    return r


def step_seed(key, history, cfg=PartitionConfig()):
    ctx = context_id(history, cfg)
    raw = (cfg.hash_constant * ctx + key.value) & MASK32
    return StepSeed(raw=raw, normalized=raw / TWO32, context_id=ctx)


def step_seeds(key, histories, cfg=PartitionConfig()):
    """Normalized seeds for a batch of histories, as a float64 array."""
    return np.array([step_seed(key, h, cfg).normalized for h in histories],
                    dtype=np.float64)


def continuous_hash(c, seed_norm, omega=2.0 * math.pi):
    if not omega > 0.0:
        raise ValueError("omega must be positive")
    return np.abs(np.sin((np.asarray(c, dtype=np.float64) + seed_norm) * omega))


def green_mask(coords, seed, cfg=PartitionConfig()):
    coords = np.asarray(coords, dtype=np.float64)
    bits = kernels.green_rows(coords, np.array([seed.normalized]), float(cfg.omega),
                              float(cfg.gamma))[0]
    return GreenMask(bits=bits, step_seed=seed)


def green_matrix(coords, seeds, cfg=PartitionConfig()):
    """Green bits for many steps at once: one row per normalized seed."""
    return kernels.green_rows(np.asarray(coords, dtype=np.float64),
                              np.asarray(seeds, dtype=np.float64),
                              float(cfg.omega), float(cfg.gamma))


# ------------------------------------------------------- effective density


def _is_pi_multiple(omega):
    k = round(omega / math.pi)
    return k >= 1 and abs(omega - k * math.pi) <= 1e-12 * omega


def effective_density_mc(gamma, omega, coords=None, n_samples=1_000_000, rng_seed=0):
    """Monte Carlo green rate over uniform seeds; returns ``(estimate, stderr)``.

    Without ``coords`` the rate is for an item at coordinate 0; with coords,
    each sample picks one of them uniformly.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    rng = np.random.default_rng(rng_seed)
    s = rng.random(n_samples)
    if coords is None:
        c = 0.0
    else:
        coords = np.asarray(coords, dtype=np.float64)
        c = coords[rng.integers(0, coords.shape[0], n_samples)]
    hits = np.abs(np.sin((c + s) * omega)) <= gamma
    p = hits.mean()
    return float(p), float(math.sqrt(p * (1.0 - p) / n_samples))


def effective_density(gamma, omega=2.0 * math.pi, coords=None, n_samples=1_000_000):
    """Item-marginal probability of being green under a uniform seed.

    Exact ``(2/pi) * arcsin(gamma)`` when omega is a whole multiple of pi (the
    phase then sweeps full periods of ``|sin|``); Monte Carlo otherwise.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    if gamma == 0.0:
        return 0.0
    if gamma == 1.0:
        return 1.0
    if _is_pi_multiple(omega):
        return 2.0 / math.pi * math.asin(gamma)
    return effective_density_mc(gamma, omega, coords=coords, n_samples=n_samples)[0]
