"""Operation counts and data volumes for shaped networks.

Each layer kind maps to a closed-form count of its dominant arithmetic
(multiply-accumulates, comparisons, adds/divides, ...) and to the tensor
elements it reads and writes. Two read/write conventions are supported:

* **literal** — weights of a windowed layer count as ``k_w*k_h*ch_in``
  elements and every layer touches each activation once. This is the
  convention the per-layer report uses by default.
* **physical** — weights count at full size (``k_w*k_h*(ch_in/groups)*
  ch_out`` for conv, ``in_elems*units`` for fc) and multi-pass layers
  touch activations once per pass (batch_norm reads and writes twice,
  softmax three times, residual_sum reads its two addends). This models
  real memory traffic and is the default for whole-network summaries.

All counts are exact integers per sample; :func:`batch_cost` scales them
exactly by the batch size.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

from .arch import LayerSpec, ShapedNetwork, TensorShape, conv_output_size
from .errors import NonPositiveOutputError, ShapeMismatchError


@dataclass(frozen=True)
class OpCount:
    """Per-kind operation tally for one layer (or a sum of layers)."""

    macc: int = 0
    max_ops: int = 0
    add_div: int = 0
    exp_add_div: int = 0
    mul01: int = 0
    bias_add: int = 0

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if value < 0:
                raise ValueError(f"OpCount.{name} must be >= 0, got {value}")

    def total(self) -> int:
        """All operations summed; one macc counts as one operation."""
        return (self.macc + self.max_ops + self.add_div + self.exp_add_div
                + self.mul01 + self.bias_add)

    def __add__(self, other: "OpCount") -> "OpCount":
        return OpCount(
            self.macc + other.macc,
            self.max_ops + other.max_ops,
            self.add_div + other.add_div,
            self.exp_add_div + other.exp_add_div,
            self.mul01 + other.mul01,
            self.bias_add + other.bias_add,
        )


@dataclass(frozen=True)
class DataVolume:
    """Tensor elements read and written by one layer (or a sum of layers)."""

    read_elems: int
    written_elems: int
    element_bytes: int = 4

    def __post_init__(self):
        if self.read_elems < 0 or self.written_elems < 0:
            raise ValueError("element counts must be >= 0")
        if self.element_bytes < 1:
            raise ValueError("element_bytes must be >= 1")

    @property
    def read_bytes(self) -> int:
        return self.read_elems * self.element_bytes

    @property
    def written_bytes(self) -> int:
        return self.written_elems * self.element_bytes

    def __add__(self, other: "DataVolume") -> "DataVolume":
        if self.element_bytes != other.element_bytes:
            raise ValueError("cannot add DataVolumes with different element_bytes")
        return DataVolume(self.read_elems + other.read_elems,
                          self.written_elems + other.written_elems,
                          self.element_bytes)


@dataclass(frozen=True)
class LayerCost:
    name: str
    kind: str
    ops: OpCount
    data: DataVolume


@dataclass(frozen=True)
class CostSummary:
    """Whole-network per-sample cost: per-layer rows plus exact totals.

    ``ctc`` is the compute-to-traffic ratio total_ops / total_read_elems
    (operations per tensor element read); ``None`` for an empty network.
    """

    per_layer: tuple[LayerCost, ...]
    total_ops: int
    total_read_elems: int
    total_written_elems: int
    element_bytes: int
    ctc: float | None

    @property
    def total_read_bytes(self) -> int:
        return self.total_read_elems * self.element_bytes

    @property
    def total_written_bytes(self) -> int:
        return self.total_written_elems * self.element_bytes


@dataclass(frozen=True)
class BatchCost:
    """A per-sample summary scaled exactly by a batch size."""

    batch_size: int
    ops: int
    read_elems: int
    written_elems: int
    element_bytes: int = 4

    @property
    def read_bytes(self) -> int:
        return self.read_elems * self.element_bytes

    @property
    def written_bytes(self) -> int:
        return self.written_elems * self.element_bytes


def _expected_output(layer: LayerSpec, inp: TensorShape) -> TensorShape:
    if layer.kind == "conv":
        if inp.channels % layer.groups != 0 or layer.out_channels % layer.groups != 0:
            raise ShapeMismatchError(
                f"layer {layer.name!r}: groups={layer.groups} does not divide "
                f"channels {inp.channels}->{layer.out_channels}"
            )
        return TensorShape(
            conv_output_size(inp.width, layer.kernel_w, layer.stride, layer.padding),
            conv_output_size(inp.height, layer.kernel_h, layer.stride, layer.padding),
            layer.out_channels,
        )
    if layer.kind == "pool":
        return TensorShape(
            conv_output_size(inp.width, layer.kernel_w, layer.stride, layer.padding),
            conv_output_size(inp.height, layer.kernel_h, layer.stride, layer.padding),
            inp.channels,
        )
    if layer.kind == "fully_connected":
        return TensorShape(1, 1, layer.units)
    return inp


def _check_shapes(layer: LayerSpec, inp: TensorShape, out: TensorShape) -> None:
    try:
        expected = _expected_output(layer, inp)
    except NonPositiveOutputError as exc:
        raise ShapeMismatchError(f"layer {layer.name!r}: {exc}") from None
    if out != expected:
        raise ShapeMismatchError(
            f"layer {layer.name!r} ({layer.kind}): output {out} inconsistent with "
            f"input {inp}; expected {expected}"
        )


def layer_ops(layer: LayerSpec, inp: TensorShape, out: TensorShape) -> OpCount:
    """Operation counts of one layer applied to one sample.

    Raises:
        ShapeMismatchError: ``out`` is not what ``layer`` produces from ``inp``.
    """
    _check_shapes(layer, inp, out)
    kind = layer.kind
    if kind == "conv":
        window = layer.kernel_w * layer.kernel_h * out.width * out.height
        macc = window * (inp.channels // layer.groups) * out.channels
        bias = out.channels if layer.has_bias else 0
        return OpCount(macc=macc, bias_add=bias)
    if kind == "fully_connected":
        return OpCount(macc=inp.elements * layer.units)
    if kind == "pool":
        window = layer.kernel_w * layer.kernel_h * out.width * out.height * inp.channels
        if layer.pool_kind == "average":
            return OpCount(add_div=window)
        return OpCount(max_ops=window)
    if kind == "relu":
        return OpCount(max_ops=out.elements)
    if kind == "dropout":
        return OpCount(mul01=out.elements)
    if kind == "batch_norm":
        return OpCount(add_div=2 * out.elements)
    if kind == "softmax":
        return OpCount(exp_add_div=3 * out.elements)
    if kind == "residual_sum":
        return OpCount(add_div=out.elements)
    # local_response_norm: one add/div per window cell, like average pooling.
    window = layer.kernel_w * layer.kernel_h * out.width * out.height * out.channels
    return OpCount(add_div=window)


#: (reads of the input tensor, writes of the output tensor) per pass, for
#: kinds that touch an activation more than once in the physical convention.
_PHYSICAL_PASSES = {
    "batch_norm": (2, 2),    # mean/var pass, then normalize pass
    "softmax": (3, 3),       # max, exp-sum, divide
    "residual_sum": (2, 1),  # two addends in, one sum out
}


def layer_weight_elems(layer: LayerSpec, inp: TensorShape) -> int:
    """Parameter count of one layer (conv/fc kernels plus conv bias)."""
    if layer.kind == "conv":
        n = layer.kernel_w * layer.kernel_h * (inp.channels // layer.groups) * layer.out_channels
        return n + (layer.out_channels if layer.has_bias else 0)
    if layer.kind == "fully_connected":
        return inp.elements * layer.units
    return 0


def layer_data(layer: LayerSpec, inp: TensorShape, out: TensorShape,
               element_bytes: int = 4, physical: bool = False) -> DataVolume:
    """Elements read and written by one layer on one sample.

    With ``physical=False`` (default) the literal convention applies: read =
    input activations plus a ``k_w*k_h*ch_in`` weight term for conv/pool,
    written = output activations. With ``physical=True`` weights count at
    full size and multi-pass layers multiply their activation traffic (see
    module docstring).

    Raises:
        ShapeMismatchError: ``out`` is not what ``layer`` produces from ``inp``.
    """
    _check_shapes(layer, inp, out)
    if not physical:
        read = inp.elements
        if layer.kind in ("conv", "pool"):
            read += layer.kernel_w * layer.kernel_h * inp.channels
        return DataVolume(read, out.elements, element_bytes)
    read_mult, write_mult = _PHYSICAL_PASSES.get(layer.kind, (1, 1))
    read = inp.elements * read_mult + layer_weight_elems(layer, inp)
    return DataVolume(read, out.elements * write_mult, element_bytes)


def network_cost(shaped: ShapedNetwork, element_bytes: int = 4,
                 physical: bool = True) -> CostSummary:
    """Per-sample cost of a whole network.

    Data volumes default to the physical convention (real traffic); pass
    ``physical=False`` for the literal per-layer convention. An input-only
    network yields all-zero totals and ``ctc=None``.
    """
    rows = []
    ops_total = OpCount()
    data_total = DataVolume(0, 0, element_bytes)
    for sl in shaped.per_layer:
        ops = layer_ops(sl.spec, sl.input, sl.output)
        data = layer_data(sl.spec, sl.input, sl.output, element_bytes, physical=physical)
        rows.append(LayerCost(sl.spec.name, sl.spec.kind, ops, data))
        ops_total = ops_total + ops
        data_total = data_total + data
    ctc = None
    if data_total.read_elems > 0:
        ctc = ops_total.total() / data_total.read_elems
    return CostSummary(
        per_layer=tuple(rows),
        total_ops=ops_total.total(),
        total_read_elems=data_total.read_elems,
        total_written_elems=data_total.written_elems,
        element_bytes=element_bytes,
        ctc=ctc,
    )


def batch_cost(summary: CostSummary, batch_size: int) -> BatchCost:
    """Scale a per-sample summary by ``batch_size`` (exact integers)."""
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    return BatchCost(
        batch_size=batch_size,
        ops=summary.total_ops * batch_size,
        read_elems=summary.total_read_elems * batch_size,
        written_elems=summary.total_written_elems * batch_size,
        element_bytes=summary.element_bytes,
    )


def network_weight_elems(shaped: ShapedNetwork) -> int:
    """Total parameter count of the network."""
    return sum(layer_weight_elems(sl.spec, sl.input) for sl in shaped.per_layer)


def network_output_elems(shaped: ShapedNetwork) -> int:
    """Sum of every layer's output elements (per-sample activation footprint)."""
    return sum(sl.output.elements for sl in shaped.per_layer)


def cost_csv(summary: CostSummary) -> str:
    """Per-layer cost report as CSV with a trailing totals row."""
    out = io.StringIO()
    out.write("layer,kind,macc,max_ops,add_div,exp_add_div,mul01,bias_add,"
              "read_bytes,written_bytes\n")
    total = OpCount()
    for row in summary.per_layer:
        o = row.ops
        out.write(f"{row.name},{row.kind},{o.macc},{o.max_ops},{o.add_div},"
                  f"{o.exp_add_div},{o.mul01},{o.bias_add},"
                  f"{row.data.read_bytes},{row.data.written_bytes}\n")
        total = total + o
    out.write(f"total,,{total.macc},{total.max_ops},{total.add_div},"
              f"{total.exp_add_div},{total.mul01},{total.bias_add},"
              f"{summary.total_read_bytes},{summary.total_written_bytes}\n")
    return out.getvalue()
