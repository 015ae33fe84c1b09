"""Configurable simulator of GPU-style floating-point units."""

from .pipeline import PREV, Step, pipeline_eval, special_result, step
from .profile import (
    PRESET_NAMES,
    Routing,
    ShaderProfile,
    canonical_profile,
    dumps_profile,
    load_profile,
    preset,
    profile_from_dict,
    profile_to_dict,
    random_profile,
    save_profile,
)
from .units import (
    AdderConfig,
    DenormalPolicy,
    InfinityPolicy,
    MadConfig,
    MultiplierConfig,
    NanPolicy,
    TransferPolicy,
    sim_add,
    sim_mad,
    sim_mul,
    sim_mul_batch,
    sim_transfer,
    truncated_product,
)
