"""CNN architectures as ordered layer lists, plus tensor-shape inference.

Networks are purely structural: no weights are stored and no tensor math is
performed. A :class:`NetworkSpec` holds an input shape and an ordered list of
:class:`LayerSpec`; :func:`infer_shapes` propagates the input shape through
the layer list, producing the per-layer input/output geometry every other
module consumes.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import (
    ArchSemanticError,
    ArchSyntaxError,
    GroupMismatchError,
    NonPositiveOutputError,
    ShapeConflictError,
    UnknownNetworkError,
)

LAYER_KINDS = frozenset({
    "conv",
    "fully_connected",
    "pool",
    "relu",
    "dropout",
    "batch_norm",
    "softmax",
    "residual_sum",
    "local_response_norm",
})

#: Kinds that carry a kernel window. conv and pool use it for geometry;
#: local_response_norm keeps its window purely for op accounting.
KERNEL_KINDS = frozenset({"conv", "pool", "local_response_norm"})

#: Kinds whose output shape equals their input shape.
SHAPE_PRESERVING_KINDS = frozenset({
    "relu", "dropout", "batch_norm", "softmax", "residual_sum",
    "local_response_norm",
})

BUILTIN_NETWORK_NAMES = ("two_d_cnn", "resnet_gait", "caffenet", "resnet_im")

GAIT_CLASSES = 155
IMAGE_CLASSES = 1000


@dataclass(frozen=True)
class TensorShape:
    """Spatial width/height plus channel count of one activation tensor."""

    width: int
    height: int
    channels: int

    def __post_init__(self):
        for name in ("width", "height", "channels"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"TensorShape.{name} must be a positive int, got {value!r}")

    @property
    def elements(self) -> int:
        return self.width * self.height * self.channels

    def __str__(self) -> str:
        return f"{self.width}x{self.height}x{self.channels}"


@dataclass(frozen=True)
class LayerSpec:
    """One layer of a network: a kind plus the geometry that kind needs.

    Field usage by kind:

    * ``conv`` — kernel_w/h, stride, padding, out_channels, groups, has_bias
    * ``pool`` — kernel_w/h, stride, padding, pool_kind ("max"/"average")
    * ``local_response_norm`` — kernel_w/h (window used for op accounting only)
    * ``fully_connected`` — units
    * ``softmax`` — units optional; when given it must equal the input
      channel count (softmax rescales its input, it never reshapes it)
    * ``residual_sum`` — skip: name of the earlier layer whose output is the
      second addend
    * ``relu``/``dropout``/``batch_norm`` — no extra fields
    """

    name: str
    kind: str
    kernel_w: int | None = None
    kernel_h: int | None = None
    stride: int = 1
    padding: int = 0
    out_channels: int | None = None
    units: int | None = None
    groups: int = 1
    has_bias: bool = False
    pool_kind: str | None = None
    skip: str | None = None

    def __post_init__(self):
        if not self.name:
            raise ValueError("layer name must be non-empty")
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.kind in KERNEL_KINDS:
            if self.kernel_w is None or self.kernel_h is None:
                raise ValueError(f"{self.kind} layer {self.name!r} needs a kernel size")
            if self.kernel_w < 1 or self.kernel_h < 1:
                raise ValueError(f"kernel of layer {self.name!r} must be >= 1")
        elif self.kernel_w is not None or self.kernel_h is not None:
            raise ValueError(f"{self.kind} layer {self.name!r} must not have a kernel")
        if self.stride < 1:
            raise ValueError(f"stride of layer {self.name!r} must be >= 1")
        if self.padding < 0:
            raise ValueError(f"padding of layer {self.name!r} must be >= 0")
        if self.groups < 1:
            raise ValueError(f"groups of layer {self.name!r} must be >= 1")
        if self.groups != 1 and self.kind != "conv":
            raise ValueError(f"groups only applies to conv layers, not {self.kind}")
        if self.has_bias and self.kind != "conv":
            raise ValueError(f"bias only applies to conv layers, not {self.kind}")
        if self.kind == "conv":
            if self.out_channels is None or self.out_channels < 1:
                raise ValueError(f"conv layer {self.name!r} needs filters >= 1")
        elif self.out_channels is not None:
            raise ValueError(f"{self.kind} layer {self.name!r} must not set out_channels")
        if self.kind == "fully_connected":
            if self.units is None or self.units < 1:
                raise ValueError(f"fully_connected layer {self.name!r} needs units >= 1")
        elif self.kind == "softmax":
            if self.units is not None and self.units < 1:
                raise ValueError(f"softmax layer {self.name!r} units must be >= 1")
        elif self.units is not None:
            raise ValueError(f"{self.kind} layer {self.name!r} must not set units")
        if self.kind == "pool":
            if self.pool_kind not in ("max", "average"):
                raise ValueError(f"pool layer {self.name!r} needs type=max or type=average")
        elif self.pool_kind is not None:
            raise ValueError(f"{self.kind} layer {self.name!r} must not set pool_kind")
        if self.skip is not None and self.kind != "residual_sum":
            raise ValueError(f"skip= only applies to residual_sum, not {self.kind}")


@dataclass(frozen=True)
class NetworkSpec:
    """Named network: an input shape plus an ordered layer list."""

    name: str
    input: TensorShape
    layers: tuple[LayerSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        seen: set[str] = set()
        for layer in self.layers:
            if layer.name in seen:
                raise ValueError(f"duplicate layer name {layer.name!r}")
            seen.add(layer.name)
        softmax_positions = [i for i, l in enumerate(self.layers) if l.kind == "softmax"]
        if len(softmax_positions) > 1:
            raise ValueError("at most one softmax layer is allowed")
        if softmax_positions and softmax_positions[0] != len(self.layers) - 1:
            raise ValueError("softmax must be the last layer")


@dataclass(frozen=True)
class ShapedLayer:
    """A layer together with its inferred input and output shapes."""

    spec: LayerSpec
    input: TensorShape
    output: TensorShape


@dataclass(frozen=True)
class ShapedNetwork:
    """A network whose per-layer tensor geometry has been resolved."""

    spec: NetworkSpec
    per_layer: tuple[ShapedLayer, ...]

    @property
    def output(self) -> TensorShape:
        return self.per_layer[-1].output if self.per_layer else self.spec.input


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    """Output length of a conv/pool along one axis.

    Counts the positions at which a window of ``kernel`` fits into the padded
    input when slid in steps of ``stride``: floor((size - kernel + 2*padding)
    / stride) + 1.

    Raises:
        NonPositiveOutputError: the kernel does not fit even once.
    """
    span = size - kernel + 2 * padding
    if span < 0:
        raise NonPositiveOutputError(
            f"kernel {kernel} does not fit input of size {size} with padding {padding}"
        )
    return span // stride + 1


def infer_shapes(net: NetworkSpec) -> ShapedNetwork:
    """Propagate the input shape through every layer of ``net``.

    Returns a :class:`ShapedNetwork` whose ``per_layer[i].output`` equals
    ``per_layer[i+1].input``. residual_sum layers take the running tensor
    plus the output of the layer named by their ``skip`` field; both must
    have the same shape.

    Raises:
        NonPositiveOutputError: a kernel is larger than its padded input.
        GroupMismatchError: conv groups do not divide both channel counts.
        ShapeConflictError: residual_sum inputs differ (or a softmax
            ``units`` does not match its input channels).
    """
    current = net.input
    outputs: dict[str, TensorShape] = {}
    shaped: list[ShapedLayer] = []
    for layer in net.layers:
        inp = current
        if layer.kind == "conv":
            if inp.channels % layer.groups != 0 or layer.out_channels % layer.groups != 0:
                raise GroupMismatchError(
                    f"layer {layer.name!r}: groups={layer.groups} does not divide "
                    f"channels {inp.channels}->{layer.out_channels}"
                )
            out = TensorShape(
                conv_output_size(inp.width, layer.kernel_w, layer.stride, layer.padding),
                conv_output_size(inp.height, layer.kernel_h, layer.stride, layer.padding),
                layer.out_channels,
            )
        elif layer.kind == "pool":
            out = TensorShape(
                conv_output_size(inp.width, layer.kernel_w, layer.stride, layer.padding),
                conv_output_size(inp.height, layer.kernel_h, layer.stride, layer.padding),
                inp.channels,
            )
        elif layer.kind == "fully_connected":
            out = TensorShape(1, 1, layer.units)
        elif layer.kind == "softmax":
            if layer.units is not None and layer.units != inp.channels:
                raise ShapeConflictError(
                    f"softmax {layer.name!r} has units={layer.units} but its input "
                    f"carries {inp.channels} channels"
                )
            out = inp
        elif layer.kind == "residual_sum":
            if layer.skip is None:
                raise ShapeConflictError(
                    f"residual_sum {layer.name!r} needs skip=<layer> to name its second input"
                )
            if layer.skip not in outputs:
                raise ShapeConflictError(
                    f"residual_sum {layer.name!r}: skip target {layer.skip!r} is not an "
                    "earlier layer"
                )
            other = outputs[layer.skip]
            if other != inp:
                raise ShapeConflictError(
                    f"residual_sum {layer.name!r}: inputs {inp} and {other} (from "
                    f"{layer.skip!r}) differ"
                )
            out = inp
        else:  # relu, dropout, batch_norm, local_response_norm
            out = inp
        shaped.append(ShapedLayer(layer, inp, out))
        outputs[layer.name] = out
        current = out
    return ShapedNetwork(net, tuple(shaped))


# ---------------------------------------------------------------------------
# Built-in networks
# ---------------------------------------------------------------------------

def _conv(name, filters, k, stride=1, pad=0, groups=1):
    return LayerSpec(name, "conv", kernel_w=k, kernel_h=k, stride=stride,
                     padding=pad, out_channels=filters, groups=groups)


def _pool(name, k, stride, kind="max", pad=0):
    return LayerSpec(name, "pool", kernel_w=k, kernel_h=k, stride=stride,
                     padding=pad, pool_kind=kind)


def _fc(name, units):
    return LayerSpec(name, "fully_connected", units=units)


def _plain(name, kind):
    return LayerSpec(name, kind)


def _lrn(name, k):
    return LayerSpec(name, "local_response_norm", kernel_w=k, kernel_h=k)


def _residual_block(prefix: str, channels: int, skip_from: str, convs: int = 2) -> list[LayerSpec]:
    """Expand one residual block into explicit layers.

    ``convs=2`` gives the classic expansion conv-bn-relu-conv-bn-sum-relu;
    ``convs=1`` gives the lighter conv-bn-relu-sum-relu variant. The sum's
    second input is the output of ``skip_from`` (the block's input), so the
    caller must keep channel counts aligned across the block.
    """
    layers: list[LayerSpec] = []
    if convs == 2:
        layers += [
            _conv(f"{prefix}_conv1", channels, 3, stride=1, pad=1),
            _plain(f"{prefix}_bn1", "batch_norm"),
            _plain(f"{prefix}_relu1", "relu"),
            _conv(f"{prefix}_conv2", channels, 3, stride=1, pad=1),
            _plain(f"{prefix}_bn2", "batch_norm"),
        ]
    elif convs == 1:
        layers += [
            _conv(f"{prefix}_conv", channels, 3, stride=1, pad=1),
            _plain(f"{prefix}_bn", "batch_norm"),
            _plain(f"{prefix}_relu", "relu"),
        ]
    else:
        raise ValueError("residual blocks support convs=1 or convs=2")
    layers.append(LayerSpec(f"{prefix}_sum", "residual_sum", skip=skip_from))
    layers.append(_plain(f"{prefix}_relu_out", "relu"))
    return layers


def _residual_trunk(block_counts, channels, convs, stem: list[LayerSpec],
                    stem_out: str) -> tuple[list[LayerSpec], str]:
    """Append block groups (with 1x1 stride-2 adapters between groups)."""
    layers = stem
    prev = stem_out
    for group_idx, (count, ch) in enumerate(zip(block_counts, channels), start=1):
        if group_idx > 1:
            # Adapter: halve the spatial size and move to the new channel width
            # before the first block of the group.
            a = f"adapt{group_idx}"
            layers += [
                _conv(f"{a}_conv", ch, 1, stride=2, pad=0),
                _plain(f"{a}_bn", "batch_norm"),
                _plain(f"{a}_relu", "relu"),
            ]
            prev = f"{a}_relu"
        for block_idx in range(1, count + 1):
            prefix = f"g{group_idx}b{block_idx}"
            layers += _residual_block(prefix, ch, skip_from=prev, convs=convs)
            prev = f"{prefix}_relu_out"
    return layers, prev


def _build_two_d_cnn(classes: int) -> NetworkSpec:
    # Plain feed-forward net for 60x60 optical-flow stacks. The 2x2x4096 conv
    # reduces its 2x2x512 input to 1x1x4096, i.e. it already is the first
    # fully-connected stage.
    layers = [
        _conv("conv1", 96, 7, stride=1), _pool("pool1", 2, 2), _plain("relu1", "relu"),
        _conv("conv2", 192, 5, stride=2), _pool("pool2", 2, 2), _plain("relu2", "relu"),
        _conv("conv3", 512, 3, stride=1), _pool("pool3", 2, 2), _plain("relu3", "relu"),
        _conv("conv4", 4096, 2, stride=1), _plain("relu4", "relu"), _plain("drop4", "dropout"),
        _fc("fc5", 2048), _plain("drop5", "dropout"),
        _fc("fc6", classes),
        LayerSpec("softmax", "softmax", units=classes),
    ]
    return NetworkSpec("two_d_cnn", TensorShape(60, 60, 50), tuple(layers))


def _build_caffenet(classes: int) -> NetworkSpec:
    layers = [
        _conv("conv1", 96, 11, stride=4), _plain("relu1", "relu"),
        _pool("pool1", 3, 2), _lrn("norm1", 5),
        _conv("conv2", 256, 5, stride=1, pad=2, groups=2), _plain("relu2", "relu"),
        _pool("pool2", 3, 2), _lrn("norm2", 5),
        _conv("conv3", 384, 3, stride=1, pad=1), _plain("relu3", "relu"),
        _conv("conv4", 384, 3, stride=1, pad=1, groups=2), _plain("relu4", "relu"),
        _conv("conv5", 256, 3, stride=1, pad=1, groups=2), _plain("relu5", "relu"),
        _pool("pool5", 3, 2),
        _fc("fc6", 4096), _plain("relu6", "relu"), _plain("drop6", "dropout"),
        _fc("fc7", 4096), _plain("relu7", "relu"), _plain("drop7", "dropout"),
        _fc("fc8", classes),
        LayerSpec("softmax", "softmax", units=classes),
    ]
    return NetworkSpec("caffenet", TensorShape(227, 227, 3), tuple(layers))


def _build_resnet_gait(classes: int) -> NetworkSpec:
    stem = [
        _conv("conv1", 64, 7, stride=2), _plain("bn1", "batch_norm"),
        _plain("relu1", "relu"), _pool("pool1", 3, 2),
    ]
    # 60 -> conv1/s2 -> 27 -> pool/s2 -> 13, then 13/7/4/2 across the groups.
    layers, _ = _residual_trunk(
        block_counts=(4, 6, 7, 2), channels=(64, 128, 256, 512), convs=2,
        stem=stem, stem_out="pool1",
    )
    layers += [
        _pool("gap", 2, 1, kind="average"),
        _fc("fc", classes),
        LayerSpec("softmax", "softmax", units=classes),
    ]
    return NetworkSpec("resnet_gait", TensorShape(60, 60, 50), tuple(layers))


def _build_resnet_im(classes: int) -> NetworkSpec:
    stem = [
        _conv("conv1", 64, 7, stride=2, pad=3), _plain("bn1", "batch_norm"),
        _plain("relu1", "relu"), _pool("pool1", 3, 2, pad=1),
    ]
    # 224 -> conv1/s2 -> 112 -> pool/s2 -> 56, then 56/28/14/7. The image
    # variant uses the single-conv block form; see the shipped measurement
    # tables, which this net reproduces within tolerance only in that form.
    layers, _ = _residual_trunk(
        block_counts=(3, 4, 6, 3), channels=(64, 128, 256, 512), convs=1,
        stem=stem, stem_out="pool1",
    )
    layers += [
        _pool("gap", 7, 1, kind="average"),
        _fc("fc", classes),
        LayerSpec("softmax", "softmax", units=classes),
    ]
    return NetworkSpec("resnet_im", TensorShape(224, 224, 3), tuple(layers))


_BUILDERS = {
    "two_d_cnn": (_build_two_d_cnn, GAIT_CLASSES),
    "resnet_gait": (_build_resnet_gait, GAIT_CLASSES),
    "caffenet": (_build_caffenet, IMAGE_CLASSES),
    "resnet_im": (_build_resnet_im, IMAGE_CLASSES),
}


def builtin_network(name: str, classes: int | None = None) -> NetworkSpec:
    """Return one of the four bundled architectures by name.

    ``classes`` overrides the classifier width (defaults: 155 for the gait
    networks, 1000 for the image networks).

    Raises:
        UnknownNetworkError: ``name`` is not a bundled architecture.
    """
    try:
        builder, default_classes = _BUILDERS[name]
    except KeyError:
        raise UnknownNetworkError(
            f"unknown builtin {name!r}; choose from {', '.join(BUILTIN_NETWORK_NAMES)}"
        ) from None
    return builder(classes if classes is not None else default_classes)


# ---------------------------------------------------------------------------
# Line-oriented architecture files
# ---------------------------------------------------------------------------

_KIND_ALIASES = {
    "conv": "conv",
    "fc": "fully_connected",
    "fully_connected": "fully_connected",
    "pool": "pool",
    "relu": "relu",
    "dropout": "dropout",
    "batch_norm": "batch_norm",
    "bn": "batch_norm",
    "softmax": "softmax",
    "sum": "residual_sum",
    "residual_sum": "residual_sum",
    "lrn": "local_response_norm",
    "local_response_norm": "local_response_norm",
}

_EMIT_KIND = {
    "conv": "conv",
    "fully_connected": "fc",
    "pool": "pool",
    "relu": "relu",
    "dropout": "dropout",
    "batch_norm": "batch_norm",
    "softmax": "softmax",
    "residual_sum": "sum",
    "local_response_norm": "lrn",
}

_INT_KEYS = {"filters", "units", "k", "kw", "kh", "stride", "pad", "groups", "count", "convs"}


def _parse_kv(tokens: list[str], lineno: int) -> dict[str, object]:
    kv: dict[str, object] = {}
    for token in tokens:
        if "=" not in token:
            raise ArchSyntaxError(f"expected key=value, got {token!r}", lineno)
        key, _, raw = token.partition("=")
        if key in kv:
            raise ArchSyntaxError(f"duplicate key {key!r}", lineno)
        if key in _INT_KEYS:
            try:
                kv[key] = int(raw)
            except ValueError:
                raise ArchSyntaxError(f"key {key} needs an integer, got {raw!r}", lineno) from None
        elif key == "bias":
            if raw not in ("true", "false"):
                raise ArchSyntaxError(f"bias must be true or false, got {raw!r}", lineno)
            kv[key] = raw == "true"
        elif key in ("type", "skip"):
            kv[key] = raw
        else:
            raise ArchSyntaxError(f"unknown key {key!r}", lineno)
    return kv


def _layer_from_kv(kind: str, name: str, kv: dict[str, object], lineno: int) -> LayerSpec:
    kernel_w = kv.pop("kw", None)
    kernel_h = kv.pop("kh", None)
    k = kv.pop("k", None)
    if k is not None:
        if kernel_w is not None or kernel_h is not None:
            raise ArchSyntaxError("give either k= or kw=/kh=, not both", lineno)
        kernel_w = kernel_h = k
    fields = dict(
        kernel_w=kernel_w,
        kernel_h=kernel_h,
        stride=kv.pop("stride", 1),
        padding=kv.pop("pad", 0),
        out_channels=kv.pop("filters", None),
        units=kv.pop("units", None),
        groups=kv.pop("groups", 1),
        has_bias=kv.pop("bias", False),
        pool_kind=kv.pop("type", "max" if kind == "pool" else None),
        skip=kv.pop("skip", None),
    )
    if kv:
        raise ArchSyntaxError(f"unexpected keys for {kind}: {sorted(kv)}", lineno)
    try:
        return LayerSpec(name, kind, **fields)
    except ValueError as exc:
        raise ArchSemanticError(str(exc), lineno) from None


def parse_network(text: str, name: str | None = None) -> NetworkSpec:
    """Parse the line-oriented architecture format.

    Grammar: ``#`` starts a comment; the first non-comment line is
    ``input <w> <h> <ch>``; each following line is ``<kind> <name>
    key=value ...`` with keys ``filters,units,k,kw,kh,stride,pad,groups,
    bias,type,skip``. ``resblock <name> filters=<n> count=<m> [convs=1|2]``
    expands to that many residual blocks wired to the running tensor.
    A ``# network: <name>`` comment names the network.

    Raises:
        ArchSyntaxError: malformed line (with its line number).
        ArchSemanticError: well-formed line violating a layer/network
            invariant.
    """
    input_shape: TensorShape | None = None
    layers: list[LayerSpec] = []
    file_name = None
    prev_layer_name: str | None = None
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        comment = raw_line.split("#", 1)[1].strip() if "#" in raw_line else ""
        if comment.startswith("network:"):
            file_name = comment.split(":", 1)[1].strip()
        if not line:
            continue
        tokens = line.split()
        if input_shape is None:
            if tokens[0] != "input" or len(tokens) != 4:
                raise ArchSyntaxError("first line must be: input <w> <h> <ch>", lineno)
            try:
                w, h, ch = (int(t) for t in tokens[1:])
                input_shape = TensorShape(w, h, ch)
            except ValueError as exc:
                raise ArchSemanticError(str(exc), lineno) from None
            continue
        kind_token, *rest = tokens
        if kind_token == "input":
            raise ArchSyntaxError("duplicate input line", lineno)
        if not rest:
            raise ArchSyntaxError(f"layer line needs a name: {line!r}", lineno)
        layer_name, *kv_tokens = rest
        kv = _parse_kv(kv_tokens, lineno)
        if kind_token == "resblock":
            filters = kv.pop("filters", None)
            count = kv.pop("count", None)
            convs = kv.pop("convs", 2)
            if kv:
                raise ArchSyntaxError(f"unexpected keys for resblock: {sorted(kv)}", lineno)
            if filters is None or count is None or count < 1:
                raise ArchSyntaxError("resblock needs filters=<n> count=<m>", lineno)
            if prev_layer_name is None:
                raise ArchSemanticError("resblock cannot be the first layer", lineno)
            prev = prev_layer_name
            try:
                for i in range(1, count + 1):
                    block = _residual_block(f"{layer_name}_{i}", filters, skip_from=prev,
                                            convs=convs)
                    layers += block
                    prev = block[-1].name
            except ValueError as exc:
                raise ArchSemanticError(str(exc), lineno) from None
            prev_layer_name = prev
            continue
        kind = _KIND_ALIASES.get(kind_token)
        if kind is None:
            raise ArchSyntaxError(f"unknown layer kind {kind_token!r}", lineno)
        layers.append(_layer_from_kv(kind, layer_name, kv, lineno))
        prev_layer_name = layer_name
    if input_shape is None:
        raise ArchSyntaxError("missing input line")
    net_name = file_name or name or "network"
    try:
        return NetworkSpec(net_name, input_shape, tuple(layers))
    except ValueError as exc:
        raise ArchSemanticError(str(exc)) from None


def emit_network(net: NetworkSpec) -> str:
    """Serialize ``net`` to the canonical file form (parse round-trips it)."""
    lines = [f"# network: {net.name}",
             f"input {net.input.width} {net.input.height} {net.input.channels}"]
    for layer in net.layers:
        parts = [_EMIT_KIND[layer.kind], layer.name]
        if layer.kind in KERNEL_KINDS:
            if layer.kernel_w == layer.kernel_h:
                parts.append(f"k={layer.kernel_w}")
            else:
                parts.append(f"kw={layer.kernel_w}")
                parts.append(f"kh={layer.kernel_h}")
        if layer.kind == "conv":
            parts.append(f"filters={layer.out_channels}")
        if layer.kind in ("conv", "pool"):
            parts.append(f"stride={layer.stride}")
            parts.append(f"pad={layer.padding}")
        if layer.kind == "conv" and layer.groups != 1:
            parts.append(f"groups={layer.groups}")
        if layer.kind == "conv" and layer.has_bias:
            parts.append("bias=true")
        if layer.kind == "pool":
            parts.append(f"type={layer.pool_kind}")
        if layer.kind == "fully_connected" or (layer.kind == "softmax" and layer.units is not None):
            parts.append(f"units={layer.units}")
        if layer.kind == "residual_sum":
            parts.append(f"skip={layer.skip}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"
