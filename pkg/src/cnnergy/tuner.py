"""Score, rank, and recommend training configurations.

A configuration is (network, batch, GPU set, training plan). Scoring checks
memory feasibility first, then builds whole-training seconds and joules from
per-batch measurements (or calibrated predictions) times the plan's
iteration count, and the energy-delay product (EDP = joules x seconds) from
those totals. Per-batch time across a set is gated by its slowest device;
per-batch energy is the count-weighted device sum. The update step is
excluded from totals by default (it is small next to forward+backward); an
optional percentage adjustment covers it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

from .arch import ShapedNetwork, builtin_network, infer_shapes
from .costmodel import network_output_elems, network_weight_elems
from .energymodel import (
    DeviceProfile,
    MeasurementRecord,
    TrainingPlan,
    find_model,
    predict,
)
from .errors import (
    DataFormatError,
    InsufficientDataError,
    NoDataForConfigError,
    NothingFeasibleError,
)
from .multigpu import GpuSet, set_energy, split_batch

RANK_METRICS = ("time", "energy", "edp")

#: Host-side fixed overhead reserved on each GPU (context, workspace), bytes.
DEFAULT_FIXED_OVERHEAD_BYTES = 2 ** 30

#: The mixed 4-GPU testbed the bundled 4-GPU measurements come from.
HETERO_TESTBED = GpuSet((("pascal", 2), ("maxwell", 2)))


def edp(total_seconds: float, total_joules: float) -> float:
    """Energy-delay product in joule-seconds (exact float product)."""
    if total_seconds < 0 or total_joules < 0:
        raise ValueError("totals must be >= 0")
    return total_joules * total_seconds


def edp_mj_ks(total_seconds: float, total_joules: float) -> float:
    """EDP in megajoule-kiloseconds (the unit used for large trainings)."""
    return edp(total_seconds, total_joules) / 1e9


# ---------------------------------------------------------------------------
# Memory feasibility
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MemoryEstimate:
    feasible: bool
    estimate_bytes: int
    dram_bytes: int
    reason: str


def memory_feasible(shaped: ShapedNetwork, batch: int, device: DeviceProfile,
                    element_bytes: int = 4,
                    overhead_bytes: int = DEFAULT_FIXED_OVERHEAD_BYTES) -> MemoryEstimate:
    """Estimate whether one GPU can hold a training step at ``batch``.

    estimate = element_bytes x (activations x batch x 2 + weights +
    gradients) + fixed overhead; activations are stored twice because
    forward tensors are retained for the backward pass.
    """
    if batch < 1:
        raise ValueError("batch must be >= 1")
    activations = network_output_elems(shaped)
    weights = network_weight_elems(shaped)
    estimate = element_bytes * (activations * batch * 2 + 2 * weights) + overhead_bytes
    feasible = estimate <= device.dram_bytes
    gib = estimate / 2 ** 30
    cap = device.dram_bytes / 2 ** 30
    reason = (f"{gib:.2f} GiB needed of {cap:.2f} GiB" if feasible
              else f"needs {gib:.2f} GiB but device has {cap:.2f} GiB")
    return MemoryEstimate(feasible, estimate, device.dram_bytes, reason)


# ---------------------------------------------------------------------------
# Configurations and reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainingConfig:
    """One point of the tuning grid."""

    network: str
    batch: int
    gpu_set: GpuSet
    plan: TrainingPlan

    def __post_init__(self):
        split_batch(self.batch, self.gpu_set.total_gpus)  # raises IndivisibleBatch
        if self.plan.network != self.network or self.plan.batch != self.batch:
            raise ValueError(
                f"plan {self.plan.network}@{self.plan.batch} does not match "
                f"config {self.network}@{self.batch}"
            )


@dataclass
class ConfigReport:
    """Scored configuration. Totals are None when infeasible; ``ranks`` is
    filled in by :func:`rank` (metric name -> 1-based position)."""

    config: TrainingConfig
    feasible: bool
    reason: str = ""
    total_seconds: float | None = None
    total_joules: float | None = None
    edp_joule_seconds: float | None = None
    warnings: tuple[str, ...] = ()
    ranks: dict[str, int] = field(default_factory=dict)

    @property
    def edp_mj_ks(self) -> float | None:
        if self.edp_joule_seconds is None:
            return None
        return self.edp_joule_seconds / 1e9

    @property
    def kiloseconds(self) -> float | None:
        return None if self.total_seconds is None else self.total_seconds / 1e3

    @property
    def megajoules(self) -> float | None:
        return None if self.total_joules is None else self.total_joules / 1e6


def _per_batch_values(config: TrainingConfig, device: str, step: str,
                      records_index, models) -> tuple[float, float, list[str]]:
    """(seconds, joules) per batch for one member device, from records when
    available, else from calibrated models."""
    key = (device, config.network, step, config.gpu_set.total_gpus, config.batch)
    rec = records_index.get(key) if records_index else None
    if rec is not None:
        return rec.seconds_per_batch, rec.joules_per_batch, []
    if models is None:
        raise NoDataForConfigError(f"no measurement for {key} and no models supplied")
    out = []
    warnings = []
    for quantity in ("seconds", "joules"):
        try:
            model = find_model(models, device, config.network, step,
                               config.gpu_set.total_gpus, quantity)
        except InsufficientDataError:
            raise NoDataForConfigError(
                f"no measurement for {key} and no calibrated model either"
            ) from None
        pred = predict(model, config.batch)
        if pred.extrapolation_warning:
            warnings.append(
                f"{quantity} for {device}/{step} predicted outside the fitted "
                f"batch range [{model.batch_min}, {model.batch_max}]"
            )
        out.append(pred.value)
    return out[0], out[1], warnings


def score(config: TrainingConfig, records, profiles, shaped: ShapedNetwork | None = None,
          models=None, element_bytes: int = 4,
          update_overhead_pct: float = 0.0) -> ConfigReport:
    """Score one configuration into a ConfigReport.

    ``records`` is a list or a (device, network, step, gpus, batch)-keyed
    dict of MeasurementRecord; ``profiles`` maps device name ->
    DeviceProfile. Feasibility is decided first (per-GPU sub-batch against
    each member device's memory); infeasible configs get no totals. Totals
    are per-batch values x plan iterations, where per-batch time is the
    slowest member's forward+backward and per-batch energy is the
    count-weighted member sum.

    Raises:
        NoDataForConfigError: neither records nor models cover the config.
    """
    if records and not hasattr(records, "get"):
        from .energymodel import records_by_key
        records = records_by_key(records)
    if shaped is None:
        shaped = infer_shapes(builtin_network(config.network))
    sub_batch = split_batch(config.batch, config.gpu_set.total_gpus)
    for name in config.gpu_set.device_names:
        estimate = memory_feasible(shaped, sub_batch, profiles[name], element_bytes)
        if not estimate.feasible:
            return ConfigReport(config, feasible=False,
                                reason=f"{name}: {estimate.reason}")
    step_seconds = 0.0
    per_device_joules = {}
    warnings: list[str] = []
    for name in config.gpu_set.device_names:
        fwd_s, fwd_j, w1 = _per_batch_values(config, name, "forward", records, models)
        bwd_s, bwd_j, w2 = _per_batch_values(config, name, "backward", records, models)
        step_seconds = max(step_seconds, fwd_s + bwd_s)
        per_device_joules[name] = fwd_j + bwd_j
        warnings += w1 + w2
    batch_joules = set_energy(per_device_joules, config.gpu_set)
    factor = 1.0 + update_overhead_pct / 100.0
    total_seconds = step_seconds * factor * config.plan.iterations
    total_joules = batch_joules * factor * config.plan.iterations
    return ConfigReport(
        config, feasible=True, reason="fits device memory",
        total_seconds=total_seconds, total_joules=total_joules,
        edp_joule_seconds=edp(total_seconds, total_joules),
        warnings=tuple(warnings),
    )


_METRIC_VALUE = {
    "time": lambda r: r.total_seconds,
    "energy": lambda r: r.total_joules,
    "edp": lambda r: r.edp_joule_seconds,
}


def rank(reports, metric: str = "edp") -> list[ConfigReport]:
    """Feasible reports sorted ascending by ``metric``.

    Ties break toward smaller batch, then fewer GPUs, then network name, so
    the order is deterministic regardless of input order. Each returned
    report gets its 1-based position recorded in ``ranks[metric]``.

    Raises:
        NothingFeasibleError: no feasible scored report to rank.
    """
    if metric not in RANK_METRICS:
        raise ValueError(f"metric must be one of {RANK_METRICS}, got {metric!r}")
    value = _METRIC_VALUE[metric]
    feasible = [r for r in reports if r.feasible and value(r) is not None]
    if not feasible:
        raise NothingFeasibleError("no feasible configuration to rank")
    ordered = sorted(feasible, key=lambda r: (
        value(r), r.config.batch, r.config.gpu_set.total_gpus, r.config.network,
    ))
    for position, report in enumerate(ordered, start=1):
        report.ranks[metric] = position
    return ordered


# ---------------------------------------------------------------------------
# Accuracy records and recommendations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AccuracyRecord:
    network: str
    batch: int
    metric: str
    value: float

    def __post_init__(self):
        if not 0.0 <= self.value <= 100.0:
            raise ValueError(f"accuracy must be in [0, 100], got {self.value}")


_ACCURACY_HEADER = "network,batch,metric,value"


def parse_accuracy(text: str) -> list[AccuracyRecord]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or [c.strip() for c in lines[0].split(",")] != _ACCURACY_HEADER.split(","):
        raise DataFormatError(f"accuracy header must be {_ACCURACY_HEADER}")
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != 4:
            raise DataFormatError(f"line {lineno}: expected 4 columns, got {len(cells)}")
        try:
            records.append(AccuracyRecord(cells[0], int(cells[1]), cells[2], float(cells[3])))
        except ValueError as exc:
            raise DataFormatError(f"line {lineno}: {exc}") from None
    return records


def load_accuracy(path) -> list[AccuracyRecord]:
    with open(path, encoding="utf-8") as fh:
        return parse_accuracy(fh.read())


def bundled_accuracy(dataset: str) -> list[AccuracyRecord]:
    """Bundled accuracy tables: dataset "tumgaid" or "imagenet"."""
    if dataset not in ("tumgaid", "imagenet"):
        raise ValueError('dataset must be "tumgaid" or "imagenet"')
    text = resources.files("cnnergy").joinpath(f"data/accuracy_{dataset}.csv") \
        .read_text(encoding="utf-8")
    return parse_accuracy(text)


#: (dataset_class, net_family) -> bundled network name.
FAMILY_NETWORKS = {
    ("small", "plain_conv"): "two_d_cnn",
    ("small", "residual"): "resnet_gait",
    ("large", "plain_conv"): "caffenet",
    ("large", "residual"): "resnet_im",
}

#: Headline accuracy metric per dataset class.
PRIMARY_METRIC = {"small": "weighted-average", "large": "top-1"}

MULTI_GPU_ADVISORY = ("sets larger than a GPU pair scale unevenly across "
                      "networks; validate them case by case before committing")


@dataclass(frozen=True)
class Recommendation:
    dataset_class: str
    net_family: str
    network: str
    batch: int
    qualifying_batches: tuple[int, ...]
    rationale: str


def recommend(dataset_class: str, net_family: str, accuracy=None,
              tolerance_pct: float = 5.0, reports=None,
              metric: str | None = None) -> Recommendation:
    """Suggest a batch size for a (dataset size, network family) pair.

    Without accuracy data the defaults apply: large datasets take the
    largest feasible batch; small datasets take it too for plain
    convolutional stacks, but residual networks on small datasets keep the
    smallest batch because their accuracy degrades as the batch grows (at a
    stated time/energy cost). With ``accuracy`` records, batches within
    ``tolerance_pct`` percent of the best accuracy qualify, and the
    qualifier with the lowest EDP wins (EDP taken from ``reports`` when
    given, otherwise the largest qualifier is suggested).
    """
    if dataset_class not in ("small", "large"):
        raise ValueError('dataset_class must be "small" or "large"')
    if net_family not in ("plain_conv", "residual"):
        raise ValueError('net_family must be "plain_conv" or "residual"')
    network = FAMILY_NETWORKS[(dataset_class, net_family)]
    metric = metric or PRIMARY_METRIC[dataset_class]

    if accuracy is not None:
        by_batch: dict[int, float] = {}
        for rec in accuracy:
            if rec.network == network and rec.metric == metric:
                by_batch[rec.batch] = rec.value
        if not by_batch:
            raise DataFormatError(
                f"no accuracy records for network {network!r} with metric {metric!r}"
            )
        best = max(by_batch.values())
        floor = best * (1.0 - tolerance_pct / 100.0)
        qualifying = tuple(sorted(b for b, v in by_batch.items() if v >= floor))
        if reports is not None:
            candidates = [r for r in reports
                          if r.feasible and r.config.network == network
                          and r.config.batch in qualifying
                          and r.edp_joule_seconds is not None]
            if candidates:
                winner = min(candidates, key=lambda r: (
                    r.edp_joule_seconds, r.config.batch, r.config.gpu_set.total_gpus))
                return Recommendation(
                    dataset_class, net_family, network, winner.config.batch, qualifying,
                    f"batches {list(qualifying)} sit within {tolerance_pct:g}% of the best "
                    f"{metric} accuracy ({best:g}%); "
                    f"batch {winner.config.batch} has the lowest EDP among them; "
                    f"{MULTI_GPU_ADVISORY}",
                )
        suggested = qualifying[-1]
        return Recommendation(
            dataset_class, net_family, network, suggested, qualifying,
            f"batches {list(qualifying)} sit within {tolerance_pct:g}% of the best "
            f"{metric} accuracy ({best:g}%); the largest of them saves the most "
            f"time and energy; {MULTI_GPU_ADVISORY}",
        )

    if dataset_class == "large":
        return Recommendation(
            dataset_class, net_family, network, 256, (64, 128, 256),
            "on a large dataset the largest feasible batch is fastest and "
            f"cheapest without hurting accuracy; {MULTI_GPU_ADVISORY}",
        )
    if net_family == "plain_conv":
        return Recommendation(
            dataset_class, net_family, network, 256, (64, 128, 256),
            "plain convolutional stacks on small datasets tolerate large "
            f"batches, which save time and energy; {MULTI_GPU_ADVISORY}",
        )
    return Recommendation(
        dataset_class, net_family, network, 64, (64,),
        "residual networks on small datasets lose accuracy as the batch "
        "grows; keep the smallest batch and accept the longer, more "
        f"energy-hungry run; {MULTI_GPU_ADVISORY}",
    )


# ---------------------------------------------------------------------------
# Bundled grid helpers
# ---------------------------------------------------------------------------

def bundled_grid(device: str, plans, networks=None, batches=(64, 128, 256),
                 gpu_counts=(1, 2, 4)) -> list[TrainingConfig]:
    """The measurement grid for one device: homogeneous 1/2-GPU sets of
    ``device`` plus the mixed 4-GPU testbed, for every (network, batch)
    with a bundled plan."""
    networks = tuple(networks) if networks else \
        ("resnet_gait", "two_d_cnn", "caffenet", "resnet_im")
    configs = []
    for network in networks:
        for n_gpus in gpu_counts:
            gpu_set = HETERO_TESTBED if n_gpus == 4 else GpuSet.homogeneous(device, n_gpus)
            for batch in batches:
                plan = plans.get((network, batch))
                if plan is None or batch % gpu_set.total_gpus != 0:
                    continue
                configs.append(TrainingConfig(network, batch, gpu_set, plan))
    return configs
