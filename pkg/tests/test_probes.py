import numpy as np
import pytest

from bitoracles import chop_window_add
from fpchar.backends import HostBackend, ReferenceBackend, SimulatedBackend
from fpchar.formats import FP16, FP32, FP64, FloatFormat
from fpchar.probes import (
    PROBES,
    RunOptions,
    Status,
    probe_exponent_gap_property,
    probe_exponent_range,
    probe_fp16_internal,
    probe_guard_bits_single,
    probe_mad_extended,
    probe_mantissa_width,
    probe_mul_sign,
    probe_mul_truncation_column,
    reinterpret,
    resolve_probes,
    run_all,
)
from fpchar.probes.common import unhex, value_of
from fpchar.softfp import (
    AdderConfig,
    MadConfig,
    MultiplierConfig,
    ShaderProfile,
    TransferPolicy,
    canonical_profile,
    preset,
    random_profile,
)

QUICK = RunOptions(trials=400, sweep_size=1 << 10)


def _sim(**kw):
    return SimulatedBackend(ShaderProfile(**kw))


def _uniform(mad: MadConfig, **kw):
    return _sim(pixel_stage1=mad, pixel_stage2=mad, vertex_mad=mad, **kw)


@pytest.fixture(scope="module")
def nvidia():
    return run_all(SimulatedBackend(preset("nvidia7800-like")), QUICK).by_name()


@pytest.fixture(scope="module")
def ati():
    return run_all(SimulatedBackend(preset("ati-rx1800-like")), QUICK).by_name()


def test_nvidia_like_findings(nvidia):
    assert nvidia["transfer"].interpretation["denormal"] == "flush-to-zero"
    assert nvidia["mul-truncation-column"].interpretation["truncation_column"] == 6
    assert nvidia["mul-bias"].interpretation["bias_constant"] == 32
    assert nvidia["mul-sign"].interpretation["sign_magnitude"]
    assert nvidia["guard-bits-single"].interpretation["threshold"] == 26
    assert nvidia["fp16-internal"].interpretation["internal_width"] == 26
    assert not nvidia["exponent-gap"].interpretation["property_holds"]


def test_ati_like_findings(ati):
    chained = ati["guard-bits-chained"].interpretation
    assert (chained["stage1_threshold"], chained["stage2_threshold"]) == (25, 26)
    assert chained["lone_routing"] == "stage2"
    assert ati["mul-truncation-column"].interpretation["truncation_column"] == 9
    assert ati["mul-bias"].interpretation["bias_constant"] == 256


def test_ieee_reference_findings():
    res = run_all(ReferenceBackend(), QUICK).by_name()
    assert res["mantissa-width"].interpretation["width"] == 24
    assert res["mul-truncation-column"].interpretation["rounding"] == "nearest-even"
    assert res["guard-bits-single"].interpretation["rounding"] == "nearest-even"
    assert res["exponent-gap"].interpretation["property_holds"] is False
    assert not res["exponent-range"].interpretation["extended_exponent"]
    assert res["guard-bits-chained"].status is Status.NOT_APPLICABLE


def test_fp64_width():
    assert probe_mantissa_width(ReferenceBackend(FP64)).interpretation["width"] == 53
    assert probe_mantissa_width(HostBackend(FP64)).interpretation["width"] == 53


def test_extended_exponent_is_detected():
    be = _sim(register_format=FloatFormat(10, 23, True, "wide"))
    assert probe_exponent_range(be).interpretation["extended_exponent"]
    assert probe_exponent_range(_sim(saturate_overflow=True)).interpretation["overflow"] == "saturate"


def test_wider_registers_are_detected():
    be = _sim(register_format=FloatFormat(8, 30, True, "wide"))
    assert probe_mantissa_width(be).interpretation["width"] == 31


def test_fused_mad_is_detected():
    fused = MadConfig(MultiplierConfig(0, 0, "nearest-even"), AdderConfig(3, True, "nearest-even"), 48)
    r = probe_mad_extended(_uniform(fused), trials=500)
    assert r.interpretation["extended_product"]
    assert not probe_mad_extended(ReferenceBackend(), trials=500).interpretation["extended_product"]


def test_non_sign_magnitude_multiplier():
    mad = MadConfig(MultiplierConfig(6, 32, "toward-zero", sign_magnitude=False), AdderConfig(2))
    r = probe_mul_sign(_uniform(mad), trials=2000)
    assert r.interpretation["sign_magnitude"] is False
    assert r.interpretation["failed_identities"]


def test_native_fp16_width():
    ieee_half = MadConfig(MultiplierConfig(0, 0), AdderConfig(0))
    r = probe_fp16_internal(_uniform(ieee_half, fp16_internal_bits=11))
    assert r.interpretation["internal_width"] == 11
    ref = probe_fp16_internal(ReferenceBackend())
    assert ref.interpretation["rounding"] == "nearest-even"


def test_unpadded_chop_adder_keeps_gap_property():
    r = probe_exponent_gap_property(_uniform(MadConfig(adder=AdderConfig(0))), trials=2000)
    assert r.interpretation["property_holds"]


@pytest.mark.parametrize("adder", [AdderConfig(2), AdderConfig(3, True, "nearest-even")])
def test_gap_property_violations_have_a_witness(adder):
    r = probe_exponent_gap_property(_uniform(MadConfig(adder=adder)), trials=2000)
    w = r.interpretation["witness"]
    assert not r.interpretation["property_holds"]
    x, y, got = (unhex(w[k]) for k in ("x", "y", "result"))
    assert got != x
    if not adder.sticky_enabled:
        # the chop window model reproduces the observed sum before the final cut
        exact = chop_window_add(value_of(FP32, x), value_of(FP32, y), 24, adder.guard_bits)
        assert value_of(FP32, got) <= exact < value_of(FP32, x)


@pytest.mark.parametrize("scale", [-40, -3, 0, 5, 60])
def test_guard_probe_is_scale_invariant(scale):
    be = SimulatedBackend(preset("ati-rx1800-like"))
    assert probe_guard_bits_single(be, scale=scale).interpretation["threshold"] == 26


def test_column_one_is_visible_with_subnormals():
    mad = MadConfig(MultiplierConfig(1, 0), AdderConfig(2))
    r = probe_mul_truncation_column(_uniform(mad))
    assert r.interpretation["truncation_column"] == 1
    flushed = probe_mul_truncation_column(_uniform(mad, transfer=TransferPolicy("flush-to-zero")))
    assert flushed.interpretation["consistent_columns"] == [0, 1]


def test_probes_are_deterministic():
    be = SimulatedBackend(preset("ati-rx1800-like"))
    a = run_all(be, QUICK, probes="exponent-gap,mul-sign,mad-extended").to_dict()
    b = run_all(be, QUICK, probes="exponent-gap,mul-sign,mad-extended").to_dict()
    assert a == b


def test_reinterpret_uses_observations_only(nvidia):
    for r in nvidia.values():
        assert reinterpret(r) == r


def test_resolve_probes():
    assert resolve_probes("all") == list(PROBES)
    assert resolve_probes("mul-bias, transfer") == ["transfer", "mul-bias"]
    with pytest.raises(ValueError):
        resolve_probes("transfer,warp-drive")


def test_fp16_backend_runs_every_probe():
    char = run_all(ReferenceBackend(FP16), QUICK)
    assert not char.inconclusive
    assert char.by_name()["mantissa-width"].interpretation["width"] == 11
    assert char.replay["ok"]


@pytest.mark.parametrize("seed", range(4))
def test_random_profiles_are_recovered(seed):
    truth = random_profile(np.random.default_rng(1000 + seed))
    char = run_all(SimulatedBackend(truth), RunOptions(trials=1000, seed=seed))
    assert not char.inconclusive
    assert char.replay["ok"], char.replay
    assert canonical_profile(char.profile) == canonical_profile(truth)
