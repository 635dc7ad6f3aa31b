"""Multi-channel power traces: parsing, region bookkeeping, integration.

A trace is a time-ordered series of per-channel wattage samples (one channel
per sensed supply rail). Regions are labeled [t_start, t_end) intervals from
a sidecar file; integrating a region yields joules per channel and in total,
via the trapezoidal rule with linear interpolation at region boundaries —
exact for constant and piecewise-linear signals.

A synthetic generator builds traces from piecewise power profiles so the
whole pipeline is testable without sensor hardware. At a power discontinuity
it emits one junction sample at the midpoint of the two levels, which keeps
the trapezoidal integral of a step profile exact.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import (
    ChannelCountMismatchError,
    EmptyRegionError,
    InsufficientSamplesError,
    NonMonotoneTimeError,
    TraceFormatError,
)

REGION_LABELS = frozenset({"forward", "backward", "update", "load", "other"})

#: Channel names of the default 8-rail sensing layout: the two PCIe slot
#: rails plus six external 12 V supply pins.
DEFAULT_CHANNEL_LABELS = (
    "pcie_12v", "pcie_3v3",
    "ext12v_1", "ext12v_2", "ext12v_3", "ext12v_4", "ext12v_5", "ext12v_6",
)


@dataclass(frozen=True)
class PowerTrace:
    """Immutable sampled power series.

    ``times`` has shape (n,), strictly increasing; ``watts`` has shape
    (n, n_channels). Build instances through :meth:`build`, which validates
    and collapses duplicate timestamps to their mean sample.
    """

    channel_labels: tuple[str, ...]
    times: np.ndarray
    watts: np.ndarray

    @classmethod
    def build(cls, channel_labels, times, watts) -> "PowerTrace":
        """Validate raw arrays and return an immutable trace.

        Raises:
            ChannelCountMismatchError: watts row width != len(channel_labels).
            NonMonotoneTimeError: a timestamp decreases.
            TraceFormatError: non-finite or negative readings, or no samples.
        """
        labels = tuple(str(l) for l in channel_labels)
        t = np.asarray(times, dtype=float)
        w = np.asarray(watts, dtype=float)
        if t.ndim != 1 or w.ndim != 2 or w.shape[0] != t.shape[0]:
            raise TraceFormatError(
                f"times {t.shape} and watts {w.shape} must be (n,) and (n, channels)"
            )
        if t.shape[0] == 0:
            raise TraceFormatError("trace has no samples")
        if w.shape[1] != len(labels):
            raise ChannelCountMismatchError(
                f"{w.shape[1]} watt columns but {len(labels)} channel labels"
            )
        if not (np.isfinite(t).all() and np.isfinite(w).all()):
            raise TraceFormatError("timestamps and watts must be finite")
        if (w < 0).any():
            raise TraceFormatError("watts must be >= 0")
        dt = np.diff(t)
        if (dt < 0).any():
            i = int(np.argmax(dt < 0)) + 1
            raise NonMonotoneTimeError(f"timestamp decreases at sample {i}: {t[i]} < {t[i-1]}")
        if (dt == 0).any():
            # Collapse runs of equal timestamps to one mean sample each.
            uniq, inverse = np.unique(t, return_inverse=True)
            merged = np.zeros((uniq.shape[0], w.shape[1]))
            counts = np.bincount(inverse, minlength=uniq.shape[0]).astype(float)
            for ch in range(w.shape[1]):
                merged[:, ch] = np.bincount(inverse, weights=w[:, ch],
                                            minlength=uniq.shape[0]) / counts
            t, w = uniq, merged
        t.flags.writeable = False
        w.flags.writeable = False
        return cls(labels, t, w)

    @property
    def n_samples(self) -> int:
        return self.times.shape[0]

    @property
    def n_channels(self) -> int:
        return len(self.channel_labels)

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])


@dataclass(frozen=True)
class Region:
    """A labeled time interval to integrate over."""

    id: str
    label: str
    t_start: float
    t_end: float

    def __post_init__(self):
        if self.label not in REGION_LABELS:
            raise ValueError(
                f"region label must be one of {sorted(REGION_LABELS)}, got {self.label!r}"
            )
        if not (self.t_start < self.t_end):
            raise ValueError(f"region {self.id!r}: t_start must be < t_end")


@dataclass(frozen=True)
class EnergyResult:
    """Integrated energy over one region (channel sum plus breakdown)."""

    joules_total: float
    joules_per_channel: tuple[float, ...]
    duration: float
    mean_watts: float


def parse_trace(source) -> PowerTrace:
    """Parse trace CSV (header ``t_s,<label>_w,...``) from text or a stream.

    Raises:
        TraceFormatError / NonMonotoneTimeError / ChannelCountMismatchError
    """
    text = source.read() if hasattr(source, "read") else source
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise TraceFormatError("empty trace file")
    header = [c.strip() for c in lines[0].split(",")]
    if len(header) < 2 or header[0] != "t_s" or not all(c.endswith("_w") for c in header[1:]):
        raise TraceFormatError(f"trace header must be t_s,<label>_w,...; got {lines[0]!r}")
    labels = tuple(c[:-2] for c in header[1:])
    n_cols = len(header)
    times, watts = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != n_cols:
            raise ChannelCountMismatchError(
                f"line {lineno}: expected {n_cols} columns, got {len(cells)}"
            )
        try:
            row = [float(c) for c in cells]
        except ValueError:
            raise TraceFormatError(f"line {lineno}: non-numeric cell in {line!r}") from None
        times.append(row[0])
        watts.append(row[1:])
    return PowerTrace.build(labels, times, watts)


def load_trace(path) -> PowerTrace:
    with open(path, encoding="utf-8") as fh:
        return parse_trace(fh)


def parse_regions(source) -> list[Region]:
    """Parse region CSV (header ``id,label,t_start_s,t_end_s``)."""
    text = source.read() if hasattr(source, "read") else source
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or [c.strip() for c in lines[0].split(",")] != ["id", "label", "t_start_s", "t_end_s"]:
        raise TraceFormatError("region header must be id,label,t_start_s,t_end_s")
    regions = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != 4:
            raise TraceFormatError(f"line {lineno}: expected 4 columns, got {len(cells)}")
        try:
            regions.append(Region(cells[0], cells[1], float(cells[2]), float(cells[3])))
        except ValueError as exc:
            raise TraceFormatError(f"line {lineno}: {exc}") from None
    return regions


def load_regions(path) -> list[Region]:
    with open(path, encoding="utf-8") as fh:
        return parse_regions(fh)


def integrate(trace: PowerTrace, region: Region) -> EnergyResult:
    """Trapezoidal energy over ``region``, clipped to the trace's span.

    Channel readings at the (clipped) region boundaries are linearly
    interpolated; joules_total is the per-channel sum and mean_watts is
    joules_total over the clipped duration.

    Raises:
        InsufficientSamplesError: trace has fewer than 2 samples.
        EmptyRegionError: region does not overlap the trace span.
    """
    if trace.n_samples < 2:
        raise InsufficientSamplesError("need at least 2 samples to integrate")
    lo = max(region.t_start, trace.t_start)
    hi = min(region.t_end, trace.t_end)
    if not (lo < hi):
        raise EmptyRegionError(
            f"region {region.id!r} [{region.t_start}, {region.t_end}] does not overlap "
            f"trace span [{trace.t_start}, {trace.t_end}]"
        )
    t = trace.times
    inner = (t > lo) & (t < hi)
    grid = np.concatenate(([lo], t[inner], [hi]))
    joules = []
    for ch in range(trace.n_channels):
        w = np.interp(grid, t, trace.watts[:, ch])
        joules.append(float(np.trapezoid(w, grid)))
    total = float(sum(joules))
    duration = hi - lo
    return EnergyResult(total, tuple(joules), duration, total / duration)


def scale_energy(e: EnergyResult | None = None, gpu_count: int = 1,
                 heterogeneous_pairs=None) -> EnergyResult:
    """Scale measured energy from one GPU to a whole device set.

    Homogeneous case: joules multiply by ``gpu_count`` (duration unchanged).
    Heterogeneous case: pass ``heterogeneous_pairs`` as (count, EnergyResult)
    pairs; joules are count-weighted sums across the groups and the duration
    is the slowest group's (the set advances at the pace of its slowest
    member).
    """
    if heterogeneous_pairs is not None:
        pairs = list(heterogeneous_pairs)
        if e is not None or not pairs:
            raise ValueError("pass either one EnergyResult or heterogeneous_pairs, not both")
        n_ch = len(pairs[0][1].joules_per_channel)
        if any(len(r.joules_per_channel) != n_ch for _, r in pairs):
            raise ChannelCountMismatchError("heterogeneous results have differing channel counts")
        per_channel = tuple(
            float(sum(count * r.joules_per_channel[ch] for count, r in pairs))
            for ch in range(n_ch)
        )
        total = float(sum(per_channel))
        duration = max(r.duration for _, r in pairs)
        return EnergyResult(total, per_channel, duration, total / duration)
    if e is None:
        raise ValueError("an EnergyResult is required")
    if gpu_count < 1:
        raise ValueError(f"gpu_count must be >= 1, got {gpu_count}")
    per_channel = tuple(j * gpu_count for j in e.joules_per_channel)
    total = e.joules_total * gpu_count
    return EnergyResult(total, per_channel, e.duration, total / e.duration)


# ---------------------------------------------------------------------------
# Synthetic traces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SegmentSpec:
    """One piece of a piecewise-linear total-power profile.

    Constant at ``start_watts`` when ``end_watts`` is None, otherwise a
    linear ramp from ``start_watts`` to ``end_watts`` across the segment.
    """

    duration_s: float
    start_watts: float
    end_watts: float | None = None

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValueError("segment duration must be > 0")
        if self.start_watts < 0 or (self.end_watts is not None and self.end_watts < 0):
            raise ValueError("segment watts must be >= 0")

    @property
    def final_watts(self) -> float:
        return self.start_watts if self.end_watts is None else self.end_watts

    def value_at(self, offset: float) -> float:
        if self.end_watts is None:
            return self.start_watts
        return self.start_watts + (self.end_watts - self.start_watts) * (offset / self.duration_s)


def default_labels(channels: int) -> tuple[str, ...]:
    if channels == len(DEFAULT_CHANNEL_LABELS):
        return DEFAULT_CHANNEL_LABELS
    return tuple(f"ch{i}" for i in range(1, channels + 1))


def generate_synthetic_trace(segments, sample_rate: float = 1000.0, channels: int = 8,
                             labels=None, noise_sigma: float = 0.0,
                             seed: int | None = None) -> PowerTrace:
    """Sample a piecewise profile into a trace (deterministic given ``seed``).

    Total power is split evenly across ``channels``. Sampling runs at
    ``sample_rate`` Hz from t=0; at each discontinuous segment junction a
    single sample carries the midpoint of the adjacent power levels, so step
    profiles integrate exactly under the trapezoidal rule. Gaussian noise of
    ``noise_sigma`` watts (per channel, clamped at 0) is added when nonzero.
    """
    segs = list(segments)
    if not segs:
        raise ValueError("at least one segment is required")
    if sample_rate <= 0:
        raise ValueError("sample_rate must be > 0")
    if channels < 1:
        raise ValueError("channels must be >= 1")
    chan_labels = tuple(labels) if labels is not None else default_labels(channels)
    if len(chan_labels) != channels:
        raise ChannelCountMismatchError(
            f"{len(chan_labels)} labels for {channels} channels"
        )
    dt = 1.0 / sample_rate
    times: list[float] = []
    totals: list[float] = []
    t0 = 0.0
    for i, seg in enumerate(segs):
        # Junction sample at the segment start: midpoint across an abrupt
        # power step, the shared value otherwise.
        prev_end = segs[i - 1].final_watts if i > 0 else seg.start_watts
        times.append(t0)
        totals.append((prev_end + seg.start_watts) / 2.0)
        k = 1
        while k * dt < seg.duration_s - 1e-12:
            times.append(t0 + k * dt)
            totals.append(seg.value_at(k * dt))
            k += 1
        t0 += seg.duration_s
    times.append(t0)
    totals.append(segs[-1].final_watts)
    t_arr = np.asarray(times)
    per_channel = np.asarray(totals)[:, None] / channels
    watts = np.repeat(per_channel, channels, axis=1)
    if noise_sigma > 0.0:
        rng = np.random.default_rng(seed)
        watts = np.clip(watts + rng.normal(0.0, noise_sigma, watts.shape), 0.0, None)
    return PowerTrace.build(chan_labels, t_arr, watts)


# ---------------------------------------------------------------------------
# CSV emission
# ---------------------------------------------------------------------------

def trace_csv(trace: PowerTrace) -> str:
    """Serialize a trace (timestamps keep 9 significant digits, watts 6)."""
    out = io.StringIO()
    out.write("t_s," + ",".join(f"{l}_w" for l in trace.channel_labels) + "\n")
    for i in range(trace.n_samples):
        row = ",".join(f"{w:.6g}" for w in trace.watts[i])
        out.write(f"{trace.times[i]:.9g},{row}\n")
    return out.getvalue()


def region_results_csv(trace: PowerTrace, regions) -> str:
    """One output row per region; failed regions keep their row with the
    numeric cells empty and the error named in the trailing column."""
    out = io.StringIO()
    per_channel = ",".join(f"{l}_j" for l in trace.channel_labels)
    out.write(f"id,label,duration_s,joules_total,mean_watts,{per_channel},error\n")
    blank = "," * (trace.n_channels + 2)
    for region in regions:
        try:
            r = integrate(trace, region)
        except (EmptyRegionError, InsufficientSamplesError) as exc:
            out.write(f"{region.id},{region.label},{blank},{type(exc).__name__}\n")
            continue
        channel_cells = ",".join(f"{j:.6g}" for j in r.joules_per_channel)
        out.write(f"{region.id},{region.label},{r.duration:.6g},{r.joules_total:.6g},"
                  f"{r.mean_watts:.6g},{channel_cells},\n")
    return out.getvalue()
