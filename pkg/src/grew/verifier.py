"""Black-box ownership verification with a one-proportion Z-test."""
from dataclasses import asdict, dataclass
import math

import numpy as np

from grew import kernels
from grew.partition import PartitionConfig, effective_density, step_seed


@dataclass(frozen=True)
class RecommendationList:
    user_id: int
    history: tuple
    items: tuple

    def __post_init__(self):
        object.__setattr__(self, "history", tuple(int(i) for i in self.history))
        object.__setattr__(self, "items", tuple(int(i) for i in self.items))
        if len(set(self.items)) != len(self.items):
            raise ValueError(f"user {self.user_id}: recommended items are not distinct")

    def to_record(self):
        return {"user_id": int(self.user_id), "history": list(self.history),
                "items": list(self.items)}


@dataclass(frozen=True)
class VerificationReport:
    green_count: int
    total: int
    empirical_rate: float
    null_rate: float
    z_score: float
    p_value: float
    owned: bool
    threshold: float = 4.0

    def to_dict(self):
        return asdict(self)


def _flatten(lists, key, pcfg, n_items):
    ids, seeds = [], []
    for rec in lists:
        if not rec.items:
            continue
        s = step_seed(key, rec.history, pcfg).normalized
        ids.extend(rec.items)
        seeds.extend([s] * len(rec.items))
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= n_items):
        raise ValueError(f"recommended item id out of range [0, {n_items})")
    return ids, np.asarray(seeds, dtype=np.float64)


def count_green(lists, key, coords, pcfg=PartitionConfig()):
    """Return ``(green_count, total)`` over every recommended item."""
    coords = np.asarray(coords, dtype=np.float64)
    ids, seeds = _flatten(lists, key, pcfg, coords.shape[0])
    if ids.size == 0:
        return 0, 0
    g = kernels.count_green_flat(ids, seeds, coords, float(pcfg.omega), float(pcfg.gamma))
    return int(g), int(ids.size)


def z_score(green_count, total, null_rate):
    if total < 1:
        raise ValueError("total must be >= 1")
    if not 0.0 < null_rate < 1.0:
        raise ValueError(f"null rate must lie in (0, 1), got {null_rate}")
    p_hat = green_count / total
    return (p_hat - null_rate) / math.sqrt(null_rate * (1.0 - null_rate) / total)


def p_value(z):
    """One-sided upper tail ``1 - Phi(z)`` via erfc (no cancellation for large z)."""
    if not math.isfinite(z):
        raise ValueError(f"z must be finite, got {z}")
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def verify(lists, key, coords, pcfg=PartitionConfig(), threshold=4.0, null_rate=None):
    """Count green items, test against the null rate, decide ownership.

    ``null_rate`` defaults to the effective green density of ``pcfg``; pass an
    empirically measured clean-model rate to override it.
    """
    lists = list(lists)
    green, total = count_green(lists, key, coords, pcfg)
    if null_rate is None:
        null_rate = effective_density(pcfg.gamma, pcfg.omega, coords=coords)
    z = z_score(green, total, null_rate)
    return VerificationReport(
        green_count=green, total=total, empirical_rate=green / total,
        null_rate=float(null_rate), z_score=float(z), p_value=p_value(z),
        owned=bool(z > threshold), threshold=float(threshold))
