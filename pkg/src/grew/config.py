"""Flat run configuration shared by every CLI command."""
from dataclasses import asdict, dataclass, fields, replace
import json
import math

from grew.injector import InjectorConfig
from grew.partition import KNUTH_A, PartitionConfig


ATTACK_MODES = ("synthetic", "replay")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    # partition
    gamma: float = 0.5
    omega: float = 2.0 * math.pi
    hash_constant: int = KNUTH_A
    context_width: int = 1
    # injector and controller
    k_cand: int = 100
    top_k: int = 20
    beta: float = 1.0
    delta_base: float = 0.1
    delta_min: float = 0.01
    delta_max: float = 5.0
    eta: float = 0.05
    tau: float = 0.65
    momentum: float = 0.9
    calibrate: bool = True
    calib_batches: int = 500
    calib_batch_size: int = 100
    # sandbox data
    n_items: int = 2000
    d: int = 32
    n_clusters: int = 8
    spread: float = 1.0
    center_scale: float = 1.0
    popularity_sigma: float = 1.0
    n_users: int = 2000
    seq_len: int = 20
    p_stay: float = 0.8
    walk_sharpness: float = 1.0
    # teacher
    rho: float = 0.8
    lambda_pop: float = 0.1
    # evaluation, verification, attack
    eval_k: int = 10
    threshold: float = 4.0
    student_smoothing: float = 1.0
    attack_mode: str = "synthetic"
    attack_sequences: int = 2000
    attack_length: int = 20

    def __post_init__(self):
        self.partition()
        self.injector()
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.attack_mode not in ATTACK_MODES:
            raise ValueError(f"attack_mode must be one of {ATTACK_MODES}")
        if self.attack_sequences < 1 or self.attack_length < 2:
            raise ValueError("attack needs >= 1 sequence of length >= 2")

    def partition(self):
        return PartitionConfig(gamma=self.gamma, omega=self.omega,
                               hash_constant=self.hash_constant,
                               context_width=self.context_width)

    def injector(self):
        return InjectorConfig(k_cand=self.k_cand, top_k=self.top_k, beta=self.beta,
                              delta_base=self.delta_base, delta_min=self.delta_min,
                              delta_max=self.delta_max)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, doc):
        known = {f.name: f for f in fields(cls)}
        unknown = set(doc) - set(known)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        coerced = {}
        for k, v in doc.items():
            typ = known[k].type
            if typ in (int, "int"):
                if isinstance(v, bool) or int(v) != v:
                    raise ValueError(f"config key {k!r} must be an integer")
                v = int(v)
            elif typ in (float, "float"):
                v = float(v)
            elif typ in (bool, "bool") and not isinstance(v, bool):
                raise ValueError(f"config key {k!r} must be a boolean")
            elif typ in (str, "str") and not isinstance(v, str):
                raise ValueError(f"config key {k!r} must be a string")
            coerced[k] = v
        return cls(**coerced)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def with_(self, **kw):
        return replace(self, **kw)


SWEEP_PARAMS = ("k_cand", "delta_base", "gamma", "omega", "tau")
