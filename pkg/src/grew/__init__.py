"""Keyed logit watermarks for next-item recommenders, with black-box ownership checks."""
from grew.injector import (GlobalController, InjectionMask, InjectorConfig, boundary_mask,
                           inject, injection_mask, local_scale, update_controller,
                           watermark_step)
from grew.partition import (GreenMask, PartitionConfig, SecretKey, StepSeed, continuous_hash,
                            derive_projection, effective_density, green_mask,
                            semantic_coordinates, step_seed)
from grew.verifier import (RecommendationList, VerificationReport, count_green, p_value,
                           verify, z_score)

__all__ = ["GlobalController", "InjectionMask", "InjectorConfig", "boundary_mask", "inject",
           "injection_mask", "local_scale", "update_controller", "watermark_step", "GreenMask",
           "PartitionConfig", "SecretKey", "StepSeed", "continuous_hash", "derive_projection",
           "effective_density", "green_mask", "semantic_coordinates", "step_seed",
           "RecommendationList", "VerificationReport", "count_green", "p_value", "verify",
           "z_score"]
__version__ = "0.1.0"
