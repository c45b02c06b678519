"""Logit-level watermark injection.

Only items that are both green and at or above the ``k_cand``-th logit get a
bonus. The bonus is ``alpha_global * alpha_local``: a feedback-controlled
global strength times the normalized entropy of the top-K softmax.
"""
from dataclasses import dataclass, fields, replace
import json
import math

import numpy as np

from grew import kernels
from grew.partition import PartitionConfig, green_mask, green_matrix, step_seed, step_seeds


@dataclass(frozen=True)
class InjectorConfig:
    k_cand: int = 100
    top_k: int = 20
    beta: float = 1.0
    delta_base: float = 0.1
    delta_min: float = 0.01
    delta_max: float = 5.0

    def __post_init__(self):
        if self.k_cand < 1 or self.top_k < 1:
            raise ValueError("k_cand and top_k must be positive")
        if self.k_cand < self.top_k:
            raise ValueError(f"k_cand ({self.k_cand}) must be >= top_k ({self.top_k})")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if not self.delta_base > 0:
            raise ValueError("delta_base must be > 0")
        if not 0 <= self.delta_min <= self.delta_max:
            raise ValueError("need 0 <= delta_min <= delta_max")


@dataclass(frozen=True)
class GlobalController:
    alpha_global: float = 0.1
    running_rate: float = 0.0
    eta: float = 0.05
    tau: float = 0.65
    momentum: float = 0.9
    delta_min: float = 0.01
    delta_max: float = 5.0

    @classmethod
    def from_config(cls, icfg, eta=0.05, tau=0.65, momentum=0.9, running_rate=0.0):
        alpha = min(max(icfg.delta_base, icfg.delta_min), icfg.delta_max)
        return cls(alpha_global=alpha, running_rate=running_rate, eta=eta, tau=tau,
                   momentum=momentum, delta_min=icfg.delta_min, delta_max=icfg.delta_max)


@dataclass(frozen=True)
class InjectionMask:
    bits: np.ndarray
    boundary_bits: np.ndarray
    threshold: float


# JSON document accepted by load_injector_config; every key is optional
INJECTOR_KEYS = ("gamma", "omega", "hash_constant", "context_width", "k_cand", "top_k",
                 "beta", "delta_base", "delta_min", "delta_max", "eta", "tau", "momentum")


def injector_config_from_dict(doc):
    """Split a flat injector JSON document into (PartitionConfig, InjectorConfig, controller)."""
    unknown = set(doc) - set(INJECTOR_KEYS)
    if unknown:
        raise ValueError(f"unknown injector config keys: {sorted(unknown)}")
    pkeys = {f.name for f in fields(PartitionConfig)}
    ikeys = {f.name for f in fields(InjectorConfig)}
    pcfg = PartitionConfig(**{k: v for k, v in doc.items() if k in pkeys})
    icfg = InjectorConfig(**{k: v for k, v in doc.items() if k in ikeys})
    ctrl = GlobalController.from_config(
        icfg, **{k: doc[k] for k in ("eta", "tau", "momentum") if k in doc})
    return pcfg, icfg, ctrl


def load_injector_config(path):
    with open(path, encoding="utf-8") as fh:
        return injector_config_from_dict(json.load(fh))


# ------------------------------------------------------------- operations


def boundary_mask(z, k_cand):
    z = np.asarray(z, dtype=np.float64)
    finite = z[np.isfinite(z)]
    if k_cand < 1 or finite.size < k_cand:
        raise ValueError(f"need at least k_cand={k_cand} finite logits, got {finite.size}")
    thresh = float(np.partition(finite, finite.size - k_cand)[finite.size - k_cand])
    return z >= thresh, thresh


def injection_mask(boundary, green):
    boundary = np.asarray(boundary, dtype=bool)
    gbits = np.asarray(getattr(green, "bits", green), dtype=bool)
    if boundary.shape != gbits.shape:
        raise ValueError(f"mask length mismatch: {boundary.shape} vs {gbits.shape}")
    return boundary & gbits


def local_scale(z, top_k, beta=1.0):
    """Normalized top-K softmax entropy raised to ``beta``; 0 when ``top_k == 1``."""
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    z = np.asarray(z, dtype=np.float64)
    finite = z[np.isfinite(z)]
    if finite.size < top_k:
        raise ValueError(f"need at least top_k={top_k} finite logits, got {finite.size}")
    if top_k == 1:
        return 0.0
    top = np.sort(finite)[::-1][:top_k]
    w = np.exp(top - top[0])
    p = w / w.sum()
    p = p[p > 0]
    h = float(-(p * np.log(p)).sum()) / math.log(top_k)
    return min(max(h, 0.0), 1.0) ** beta


def inject(z, mask, alpha_global, alpha_local):
    z = np.asarray(z, dtype=np.float64)
    bits = np.asarray(getattr(mask, "bits", mask), dtype=bool)
    if z.shape != bits.shape:
        raise ValueError(f"logit/mask length mismatch: {z.shape} vs {bits.shape}")
    if not (alpha_global >= 0 and alpha_local >= 0):
        raise ValueError("alpha values must be >= 0")
    out = z.copy()
    out[bits] += alpha_global * alpha_local
    return out


def update_controller(ctrl, r_curr):
    if not 0.0 <= r_curr <= 1.0:
        raise ValueError(f"hit rate must lie in [0, 1], got {r_curr}")
    m = ctrl.momentum
    rbar = m * ctrl.running_rate + (1.0 - m) * r_curr
    alpha = ctrl.alpha_global + ctrl.eta * (ctrl.tau - rbar)
    alpha = min(max(alpha, ctrl.delta_min), ctrl.delta_max)
    return replace(ctrl, alpha_global=alpha, running_rate=rbar)


def top_k_items(z, k):
    """Indices of the k largest scores, ties broken by ascending item id."""
    return np.argsort(-np.asarray(z, dtype=np.float64), kind="stable")[:k]


def watermark_step(z, history, key, coords, pcfg, icfg, ctrl, calibrating=False):
    """Watermark one logit vector. Returns ``(z_prime, controller)``."""
    seed = step_seed(key, history, pcfg)
    gmask = green_mask(coords, seed, pcfg)
    bound, thresh = boundary_mask(z, icfg.k_cand)
    mask = InjectionMask(bits=injection_mask(bound, gmask), boundary_bits=bound,
                         threshold=thresh)
    a_local = local_scale(z, icfg.top_k, icfg.beta)
    z_prime = inject(z, mask, ctrl.alpha_global, a_local)
    if calibrating:
        top = top_k_items(z_prime, icfg.top_k)
        ctrl = update_controller(ctrl, float(gmask.bits[top].mean()))
    return z_prime, ctrl


def watermark_batch(Z, histories, key, coords, pcfg, icfg, alpha_global, green=None):
    """Row-wise injection for a (users x items) logit matrix.

    Same arithmetic as ``watermark_step`` with a frozen controller. Returns
    ``(Z_prime, green)`` so callers can reuse the green bits.
    """
    Z = np.ascontiguousarray(Z, dtype=np.float64)
    if green is None:
        green = green_matrix(coords, step_seeds(key, histories, pcfg), pcfg)
    Zp, _, _ = kernels.watermark_rows(Z, green, int(icfg.k_cand), int(icfg.top_k),
                                      float(icfg.beta), float(alpha_global))
    return Zp, green
