"""Black-box probes that characterize a floating-point backend."""

from .adder import (
    probe_exponent_gap_property,
    probe_fp16_internal,
    probe_guard_bits_chained,
    probe_guard_bits_single,
)
from .characterize import (
    PROBES,
    Characterization,
    RunOptions,
    fit_profile,
    reinterpret,
    replay,
    resolve_probes,
    run_all,
)
from .common import Confidence, ProbeResult, Status
from .multiplier import (
    probe_mad_extended,
    probe_mul_bias,
    probe_mul_sign,
    probe_mul_truncation_column,
)
from .storage import probe_exponent_range, probe_mantissa_width, probe_transfer
