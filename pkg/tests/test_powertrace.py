"""Power-trace parsing, trapezoidal integration, and synthetic traces."""
import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cnnergy.errors import (
    ChannelCountMismatchError,
    EmptyRegionError,
    InsufficientSamplesError,
    NonMonotoneTimeError,
    TraceFormatError,
)
from cnnergy.powertrace import (
    DEFAULT_CHANNEL_LABELS,
    PowerTrace,
    Region,
    SegmentSpec,
    default_labels,
    generate_synthetic_trace,
    integrate,
    parse_regions,
    parse_trace,
    region_results_csv,
    scale_energy,
    trace_csv,
)

from oracles import trapezoid_segment_energy


def flat_trace(watts=100.0, t_end=2.0, channels=2, n=5):
    times = np.linspace(0.0, t_end, n)
    w = np.full((n, channels), watts / channels)
    return PowerTrace.build([f"ch{i}" for i in range(channels)], times, w)


# ---------------------------------------------------------------------------
# Trace construction and validation
# ---------------------------------------------------------------------------

def test_build_validates_shapes():
    with pytest.raises(TraceFormatError):
        PowerTrace.build(["a"], [[0.0]], [[1.0]])  # times not 1-D
    with pytest.raises(TraceFormatError):
        PowerTrace.build(["a"], [], np.empty((0, 1)))


def test_build_rejects_channel_count_mismatch():
    with pytest.raises(ChannelCountMismatchError):
        PowerTrace.build(["a", "b"], [0.0, 1.0], [[1.0], [1.0]])


def test_build_rejects_negative_and_non_finite():
    with pytest.raises(TraceFormatError):
        PowerTrace.build(["a"], [0.0, 1.0], [[1.0], [-0.5]])
    with pytest.raises(TraceFormatError):
        PowerTrace.build(["a"], [0.0, float("nan")], [[1.0], [1.0]])


def test_build_rejects_decreasing_time():
    with pytest.raises(NonMonotoneTimeError):
        PowerTrace.build(["a"], [0.0, 2.0, 1.0], [[1.0]] * 3)


def test_build_collapses_equal_timestamps_to_mean():
    trace = PowerTrace.build(["a", "b"], [0.0, 1.0, 1.0, 2.0],
                             [[1.0, 10.0], [2.0, 20.0], [4.0, 40.0], [8.0, 80.0]])
    assert trace.n_samples == 3
    assert trace.times.tolist() == [0.0, 1.0, 2.0]
    assert trace.watts[1].tolist() == [3.0, 30.0]


def test_trace_arrays_are_immutable():
    trace = flat_trace()
    with pytest.raises(ValueError):
        trace.times[0] = -1.0
    with pytest.raises(ValueError):
        trace.watts[0, 0] = 0.0


def test_region_validation():
    Region("r", "forward", 0.0, 1.0)
    with pytest.raises(ValueError):
        Region("r", "inference", 0.0, 1.0)  # not a known label
    with pytest.raises(ValueError):
        Region("r", "forward", 1.0, 1.0)


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------

def test_integrate_constant_power_exact():
    trace = flat_trace(watts=100.0, t_end=2.0)
    result = integrate(trace, Region("r", "forward", 0.5, 1.5))
    assert result.joules_total == pytest.approx(100.0, rel=1e-12)
    assert result.duration == pytest.approx(1.0)
    assert result.mean_watts == pytest.approx(100.0, rel=1e-12)
    assert sum(result.joules_per_channel) == pytest.approx(result.joules_total)


def test_integrate_linear_ramp_exact():
    # one channel ramping 0 -> 100 W over 2 s, sampled sparsely
    trace = PowerTrace.build(["a"], [0.0, 0.5, 2.0], [[0.0], [25.0], [100.0]])
    full = integrate(trace, Region("r", "forward", 0.0, 2.0))
    assert full.joules_total == pytest.approx(
        trapezoid_segment_energy(0.0, 100.0, 2.0), rel=1e-12)
    # an interior window needs interpolated boundary samples: 50->75 W over 0.5 s
    inner = integrate(trace, Region("r", "forward", 1.0, 1.5))
    assert inner.joules_total == pytest.approx(
        trapezoid_segment_energy(50.0, 75.0, 0.5), rel=1e-12)


def test_integrate_clips_region_to_trace_span():
    trace = flat_trace(watts=100.0, t_end=2.0)
    result = integrate(trace, Region("r", "load", -5.0, 10.0))
    assert result.joules_total == pytest.approx(200.0, rel=1e-12)
    assert result.duration == pytest.approx(2.0)


def test_integrate_empty_region():
    trace = flat_trace(t_end=2.0)
    with pytest.raises(EmptyRegionError):
        integrate(trace, Region("r", "other", 3.0, 4.0))
    with pytest.raises(EmptyRegionError):
        integrate(trace, Region("r", "other", -2.0, -1.0))


def test_integrate_needs_two_samples():
    trace = PowerTrace.build(["a"], [1.0], [[5.0]])
    with pytest.raises(InsufficientSamplesError):
        integrate(trace, Region("r", "forward", 0.0, 2.0))


def test_integrate_additivity_on_split():
    trace = flat_trace(watts=123.0, t_end=3.0, n=17)
    whole = integrate(trace, Region("r", "forward", 0.2, 2.8)).joules_total
    left = integrate(trace, Region("r", "forward", 0.2, 1.3)).joules_total
    right = integrate(trace, Region("r", "forward", 1.3, 2.8)).joules_total
    assert left + right == pytest.approx(whole, rel=1e-12)


# ---------------------------------------------------------------------------
# CSV round trips
# ---------------------------------------------------------------------------

def test_trace_csv_round_trip():
    trace = generate_synthetic_trace(
        [SegmentSpec(0.01, 80.0), SegmentSpec(0.01, 80.0, 160.0)],
        sample_rate=500.0, channels=3)
    again = parse_trace(io.StringIO(trace_csv(trace)))
    assert again.channel_labels == trace.channel_labels
    np.testing.assert_allclose(again.times, trace.times, rtol=1e-8)
    np.testing.assert_allclose(again.watts, trace.watts, rtol=1e-5)


def test_parse_trace_validates_header_and_rows():
    with pytest.raises(TraceFormatError):
        parse_trace(io.StringIO("time,ch1_w\n0,1\n"))  # wrong time column
    with pytest.raises(TraceFormatError):
        parse_trace(io.StringIO("t_s,ch1\n0,1\n"))  # missing _w suffix
    with pytest.raises(TraceFormatError):
        parse_trace(io.StringIO("t_s,ch1_w\n0,abc\n"))
    with pytest.raises(ChannelCountMismatchError):
        parse_trace(io.StringIO("t_s,ch1_w\n0,1,2\n"))  # extra cell


def test_parse_trace_strips_watt_suffix():
    trace = parse_trace(io.StringIO("t_s,pcie_12v_w,ext12v_1_w\n0,1,2\n1,3,4\n"))
    assert trace.channel_labels == ("pcie_12v", "ext12v_1")


def test_parse_regions():
    regions = parse_regions(io.StringIO(
        "id,label,t_start_s,t_end_s\nf0,forward,0.0,0.5\nb0,backward,0.5,1.5\n"))
    assert [r.id for r in regions] == ["f0", "b0"]
    assert regions[1].label == "backward"
    with pytest.raises(TraceFormatError):
        parse_regions(io.StringIO("id,label\nf0,forward\n"))
    with pytest.raises(TraceFormatError):
        parse_regions(io.StringIO(
            "id,label,t_start_s,t_end_s\nf0,warmup,0.0,0.5\n"))


def test_region_results_csv_reports_failures_in_place():
    trace = flat_trace(watts=100.0, t_end=2.0)
    regions = [Region("ok", "forward", 0.0, 1.0),
               Region("late", "other", 5.0, 6.0)]
    lines = region_results_csv(trace, regions).strip().splitlines()
    header = lines[0].split(",")
    assert header[:5] == ["id", "label", "duration_s", "joules_total", "mean_watts"]
    assert header[-1] == "error"
    ok, late = lines[1].split(","), lines[2].split(",")
    assert len(ok) == len(late) == len(header)
    assert float(ok[3]) == pytest.approx(100.0)
    assert ok[-1] == ""
    assert late[-1] == "EmptyRegionError"
    assert late[3] == ""


# ---------------------------------------------------------------------------
# Energy scaling across GPU sets
# ---------------------------------------------------------------------------

def test_scale_energy_homogeneous():
    trace = flat_trace(watts=100.0, t_end=2.0)
    e = integrate(trace, Region("r", "forward", 0.0, 2.0))
    doubled = scale_energy(e, gpu_count=2)
    assert doubled.joules_total == pytest.approx(2 * e.joules_total)
    assert doubled.duration == e.duration
    assert doubled.joules_per_channel[0] == pytest.approx(2 * e.joules_per_channel[0])


def test_scale_energy_heterogeneous_weighted_sum():
    trace_a = flat_trace(watts=100.0, t_end=1.0)
    trace_b = flat_trace(watts=60.0, t_end=2.0)
    e_a = integrate(trace_a, Region("r", "forward", 0.0, 1.0))   # 100 J
    e_b = integrate(trace_b, Region("r", "forward", 0.0, 2.0))   # 120 J
    combined = scale_energy(heterogeneous_pairs=[(2, e_a), (2, e_b)])
    assert combined.joules_total == pytest.approx(2 * 100 + 2 * 120)
    assert combined.duration == pytest.approx(2.0)  # slowest group's span


def test_scale_energy_channel_mismatch():
    e1 = integrate(flat_trace(channels=2), Region("r", "forward", 0.0, 2.0))
    e3 = integrate(flat_trace(channels=3), Region("r", "forward", 0.0, 2.0))
    with pytest.raises(ChannelCountMismatchError):
        scale_energy(heterogeneous_pairs=[(1, e1), (1, e3)])


def test_scale_energy_argument_validation():
    e = integrate(flat_trace(), Region("r", "forward", 0.0, 2.0))
    with pytest.raises(ValueError):
        scale_energy()
    with pytest.raises(ValueError):
        scale_energy(e, heterogeneous_pairs=[(1, e)])
    with pytest.raises(ValueError):
        scale_energy(e, gpu_count=0)


# ---------------------------------------------------------------------------
# Synthetic trace generation
# ---------------------------------------------------------------------------

def test_synthetic_step_profile_integrates_exactly():
    trace = generate_synthetic_trace(
        [SegmentSpec(1.0, 100.0), SegmentSpec(1.0, 200.0)], sample_rate=100.0)
    total = integrate(trace, Region("r", "forward", 0.0, 2.0)).joules_total
    assert total == pytest.approx(300.0, rel=1e-12)


def test_synthetic_ramp_profile_integrates_exactly():
    trace = generate_synthetic_trace([SegmentSpec(1.0, 100.0, 200.0)],
                                     sample_rate=250.0)
    total = integrate(trace, Region("r", "forward", 0.0, 1.0)).joules_total
    assert total == pytest.approx(trapezoid_segment_energy(100, 200, 1.0),
                                  rel=1e-12)


def test_synthetic_channels_split_evenly():
    trace = generate_synthetic_trace([SegmentSpec(0.1, 80.0)], channels=4,
                                     sample_rate=100.0)
    assert trace.n_channels == 4
    np.testing.assert_allclose(trace.watts, 20.0)


def test_synthetic_default_labels():
    trace = generate_synthetic_trace([SegmentSpec(0.01, 8.0)], channels=8)
    assert trace.channel_labels == DEFAULT_CHANNEL_LABELS
    assert default_labels(2) == ("ch1", "ch2")


def test_synthetic_noise_is_seeded_and_nonnegative():
    segments = [SegmentSpec(0.05, 1.0)]  # tiny power so noise wants to go negative
    a = generate_synthetic_trace(segments, noise_sigma=5.0, seed=7)
    b = generate_synthetic_trace(segments, noise_sigma=5.0, seed=7)
    c = generate_synthetic_trace(segments, noise_sigma=5.0, seed=8)
    np.testing.assert_array_equal(a.watts, b.watts)
    assert not np.array_equal(a.watts, c.watts)
    assert (a.watts >= 0).all()


def test_synthetic_rejects_bad_segments():
    with pytest.raises(ValueError):
        SegmentSpec(0.0, 100.0)
    with pytest.raises(ValueError):
        SegmentSpec(1.0, -1.0)
    with pytest.raises(ValueError):
        generate_synthetic_trace([])


@given(st.integers(min_value=0, max_value=10_000))
@settings(max_examples=60, deadline=None)
def test_random_trace_split_additivity(seed):
    rng = np.random.default_rng(seed)
    segments = [
        SegmentSpec(float(rng.uniform(0.05, 0.3)), float(rng.uniform(0, 300)),
                    float(rng.uniform(0, 300)) if rng.random() < 0.5 else None)
        for _ in range(rng.integers(1, 4))
    ]
    trace = generate_synthetic_trace(segments, sample_rate=200.0,
                                     noise_sigma=2.0, seed=seed)
    t0, t1 = trace.t_start, trace.t_end
    mid = t0 + float(rng.uniform(0.25, 0.75)) * (t1 - t0)
    whole = integrate(trace, Region("w", "forward", t0, t1)).joules_total
    left = integrate(trace, Region("l", "forward", t0, mid)).joules_total
    right = integrate(trace, Region("r", "forward", mid, t1)).joules_total
    assert left + right == pytest.approx(whole, rel=1e-9)
