"""Architecture description, shape inference, and the parser/emitter."""
import pytest

from cnnergy.arch import (
    BUILTIN_NETWORK_NAMES,
    GAIT_CLASSES,
    IMAGE_CLASSES,
    LayerSpec,
    NetworkSpec,
    TensorShape,
    builtin_network,
    conv_output_size,
    emit_network,
    infer_shapes,
    parse_network,
)
from cnnergy.errors import (
    ArchSemanticError,
    ArchSyntaxError,
    GroupMismatchError,
    NonPositiveOutputError,
    ShapeConflictError,
    UnknownNetworkError,
)

from oracles import slide_positions


def conv(name, k, co, stride=1, pad=0, groups=1, bias=False):
    return LayerSpec(name, "conv", kernel_w=k, kernel_h=k, stride=stride,
                     padding=pad, out_channels=co, groups=groups, has_bias=bias)


def pool(name, k, stride, pad=0, kind="max"):
    return LayerSpec(name, "pool", kernel_w=k, kernel_h=k, stride=stride,
                     padding=pad, pool_kind=kind)


# ---------------------------------------------------------------------------
# TensorShape / output-size arithmetic
# ---------------------------------------------------------------------------

def test_tensor_shape_elements_and_str():
    shape = TensorShape(54, 54, 96)
    assert shape.elements == 54 * 54 * 96
    assert str(shape) == "54x54x96"


def test_tensor_shape_rejects_nonpositive_dims():
    with pytest.raises(ValueError):
        TensorShape(0, 5, 5)
    with pytest.raises(ValueError):
        TensorShape(5, 5, -1)


@pytest.mark.parametrize("size,k,s,p,expected", [
    (60, 7, 1, 0, 54),
    (227, 11, 4, 0, 55),
    (55, 3, 2, 0, 27),
    (224, 7, 2, 3, 112),
    (13, 3, 1, 1, 13),   # same-padding conv
    (5, 5, 1, 0, 1),     # kernel exactly covers the input
])
def test_conv_output_size_known_cases(size, k, s, p, expected):
    assert conv_output_size(size, k, s, p) == expected


def test_conv_output_size_matches_sliding_oracle():
    for size in range(1, 9):
        for k in range(1, 9):
            for s in (1, 2, 3):
                for p in (0, 1, 2):
                    expected = slide_positions(size, k, s, p)
                    if expected == 0:
                        with pytest.raises(NonPositiveOutputError):
                            conv_output_size(size, k, s, p)
                    else:
                        assert conv_output_size(size, k, s, p) == expected


def test_conv_output_size_kernel_too_large():
    with pytest.raises(NonPositiveOutputError):
        conv_output_size(4, 7, 1, 0)


# ---------------------------------------------------------------------------
# LayerSpec validation
# ---------------------------------------------------------------------------

def test_layer_spec_requires_kernel_only_for_windowed_kinds():
    with pytest.raises(ValueError):
        LayerSpec("r", "relu", kernel_w=3, kernel_h=3)
    with pytest.raises(ValueError):
        LayerSpec("c", "conv", out_channels=8)  # no kernel


def test_layer_spec_rejects_unknown_kind():
    with pytest.raises(ValueError):
        LayerSpec("x", "deconv", kernel_w=3, kernel_h=3)


def test_layer_spec_conv_needs_out_channels():
    with pytest.raises(ValueError):
        LayerSpec("c", "conv", kernel_w=3, kernel_h=3)


def test_layer_spec_pool_needs_pool_kind():
    with pytest.raises(ValueError):
        LayerSpec("p", "pool", kernel_w=2, kernel_h=2, stride=2)
    with pytest.raises(ValueError):
        LayerSpec("p", "pool", kernel_w=2, kernel_h=2, stride=2, pool_kind="median")


def test_layer_spec_groups_and_bias_are_conv_only():
    with pytest.raises(ValueError):
        LayerSpec("p", "pool", kernel_w=2, kernel_h=2, stride=2,
                  pool_kind="max", groups=2)
    with pytest.raises(ValueError):
        LayerSpec("f", "fully_connected", units=10, has_bias=True)


def test_layer_spec_skip_only_on_residual_sum():
    with pytest.raises(ValueError):
        LayerSpec("r", "relu", skip="conv1")
    LayerSpec("s", "residual_sum", skip="conv1")  # fine


def test_layer_spec_fc_needs_units():
    with pytest.raises(ValueError):
        LayerSpec("f", "fully_connected")


def test_layer_spec_rejects_bad_stride_padding():
    with pytest.raises(ValueError):
        conv("c", 3, 8, stride=0)
    with pytest.raises(ValueError):
        conv("c", 3, 8, pad=-1)


# ---------------------------------------------------------------------------
# NetworkSpec validation
# ---------------------------------------------------------------------------

def test_network_spec_rejects_duplicate_layer_names():
    with pytest.raises(ValueError):
        NetworkSpec("n", TensorShape(8, 8, 3),
                    (conv("c", 3, 4), conv("c", 3, 4)))


def test_network_spec_softmax_must_be_last_and_unique():
    with pytest.raises(ValueError):
        NetworkSpec("n", TensorShape(8, 8, 3),
                    (LayerSpec("s", "softmax"), conv("c", 3, 4)))
    with pytest.raises(ValueError):
        NetworkSpec("n", TensorShape(8, 8, 3),
                    (LayerSpec("s1", "softmax"), LayerSpec("s2", "softmax")))


# ---------------------------------------------------------------------------
# Shape inference on the built-ins
# ---------------------------------------------------------------------------

def shapes_by_name(shaped):
    return {sl.spec.name: sl.output for sl in shaped.per_layer}


def test_two_d_cnn_shapes():
    shaped = infer_shapes(builtin_network("two_d_cnn"))
    out = shapes_by_name(shaped)
    assert out["conv1"] == TensorShape(54, 54, 96)
    assert out["pool1"] == TensorShape(27, 27, 96)
    assert out["conv2"] == TensorShape(12, 12, 192)
    assert out["conv3"] == TensorShape(4, 4, 512)
    assert out["conv4"] == TensorShape(1, 1, 4096)
    assert out["fc5"] == TensorShape(1, 1, 2048)
    assert shaped.output == TensorShape(1, 1, GAIT_CLASSES)


def test_caffenet_shapes():
    shaped = infer_shapes(builtin_network("caffenet"))
    out = shapes_by_name(shaped)
    assert out["conv1"] == TensorShape(55, 55, 96)
    assert out["pool1"] == TensorShape(27, 27, 96)
    assert out["conv2"] == TensorShape(27, 27, 256)
    assert out["pool2"] == TensorShape(13, 13, 256)
    assert out["conv3"] == TensorShape(13, 13, 384)
    assert out["conv5"] == TensorShape(13, 13, 256)
    assert out["pool5"] == TensorShape(6, 6, 256)
    assert shaped.output == TensorShape(1, 1, IMAGE_CLASSES)


def test_resnet_im_shapes():
    shaped = infer_shapes(builtin_network("resnet_im"))
    out = shapes_by_name(shaped)
    assert out["conv1"] == TensorShape(112, 112, 64)
    assert out["pool1"] == TensorShape(56, 56, 64)
    # each later stage halves the grid and doubles the channels
    assert out["adapt2_conv"] == TensorShape(28, 28, 128)
    assert out["adapt3_conv"] == TensorShape(14, 14, 256)
    assert out["adapt4_conv"] == TensorShape(7, 7, 512)
    assert out["gap"] == TensorShape(1, 1, 512)
    assert shaped.output == TensorShape(1, 1, IMAGE_CLASSES)


def test_resnet_gait_shapes():
    shaped = infer_shapes(builtin_network("resnet_gait"))
    out = shapes_by_name(shaped)
    assert out["conv1"] == TensorShape(27, 27, 64)
    assert out["pool1"] == TensorShape(13, 13, 64)
    assert out["adapt2_conv"] == TensorShape(7, 7, 128)
    assert out["adapt4_conv"] == TensorShape(2, 2, 512)
    assert out["gap"] == TensorShape(1, 1, 512)
    assert shaped.output == TensorShape(1, 1, GAIT_CLASSES)


def test_builtin_network_unknown_name():
    with pytest.raises(UnknownNetworkError):
        builtin_network("alexnet")


def test_builtin_network_names_constant():
    assert set(BUILTIN_NETWORK_NAMES) == {
        "two_d_cnn", "resnet_gait", "caffenet", "resnet_im"}


def test_builtin_classes_override():
    shaped = infer_shapes(builtin_network("caffenet", classes=100))
    assert shaped.output == TensorShape(1, 1, 100)


def test_shape_preserving_layers_keep_shape():
    net = NetworkSpec("n", TensorShape(6, 6, 4), (
        conv("c", 3, 8),
        LayerSpec("bn", "batch_norm"),
        LayerSpec("r", "relu"),
        LayerSpec("d", "dropout"),
    ))
    shaped = infer_shapes(net)
    for sl in shaped.per_layer[1:]:
        assert sl.input == sl.output == TensorShape(4, 4, 8)


def test_group_mismatch_raises():
    net = NetworkSpec("n", TensorShape(6, 6, 3), (conv("c", 3, 8, groups=2),))
    with pytest.raises(GroupMismatchError):
        infer_shapes(net)


def test_out_channels_must_divide_by_groups():
    net = NetworkSpec("n", TensorShape(6, 6, 4), (conv("c", 3, 9, groups=2),))
    with pytest.raises(GroupMismatchError):
        infer_shapes(net)


def test_residual_skip_shape_conflicts():
    base = TensorShape(8, 8, 4)
    # skip target does not exist
    net = NetworkSpec("n", base, (
        conv("c1", 3, 4, pad=1),
        LayerSpec("sum", "residual_sum", skip="ghost"),
    ))
    with pytest.raises(ShapeConflictError):
        infer_shapes(net)
    # skip target appears later than the sum
    net = NetworkSpec("n", base, (
        conv("c0", 3, 4, pad=1),
        LayerSpec("sum", "residual_sum", skip="c1"),
        conv("c1", 3, 4, pad=1),
    ))
    with pytest.raises(ShapeConflictError):
        infer_shapes(net)
    # shape mismatch between the running tensor and the skip source
    net = NetworkSpec("n", base, (
        conv("c1", 3, 4, pad=1),    # 8x8x4
        conv("c2", 3, 4),           # 6x6x4
        LayerSpec("sum", "residual_sum", skip="c1"),
    ))
    with pytest.raises(ShapeConflictError):
        infer_shapes(net)


def test_residual_sum_without_skip_rejected():
    net = NetworkSpec("n", TensorShape(8, 8, 4), (
        conv("c1", 3, 4, pad=1),
        LayerSpec("sum", "residual_sum"),
    ))
    with pytest.raises(ShapeConflictError):
        infer_shapes(net)


def test_residual_skip_matching_shapes():
    net = NetworkSpec("n", TensorShape(8, 8, 4), (
        conv("c1", 3, 4, pad=1),
        conv("c2", 3, 4, pad=1),
        LayerSpec("sum", "residual_sum", skip="c1"),
    ))
    assert infer_shapes(net).output == TensorShape(8, 8, 4)


def test_softmax_units_conflict():
    net = NetworkSpec("n", TensorShape(4, 4, 2), (
        LayerSpec("fc", "fully_connected", units=10),
        LayerSpec("soft", "softmax", units=11),
    ))
    with pytest.raises(ShapeConflictError):
        infer_shapes(net)


def test_kernel_larger_than_input_raises():
    net = NetworkSpec("n", TensorShape(4, 4, 2), (conv("c", 7, 8),))
    with pytest.raises(NonPositiveOutputError):
        infer_shapes(net)


# ---------------------------------------------------------------------------
# Parser and emitter
# ---------------------------------------------------------------------------

SMALL_ARCH = """\
# network: toy
input 8 8 3
conv c1 filters=4 k=3 stride=1 pad=1 bias=true
bn bn1
relu r1
pool p1 k=2 stride=2 type=max
fc f1 units=10
softmax out
"""


def test_parse_small_network():
    net = parse_network(SMALL_ARCH)
    assert net.name == "toy"
    assert net.input == TensorShape(8, 8, 3)
    kinds = [l.kind for l in net.layers]
    assert kinds == ["conv", "batch_norm", "relu", "pool",
                     "fully_connected", "softmax"]
    assert net.layers[0].has_bias
    assert infer_shapes(net).output == TensorShape(1, 1, 10)


def test_parse_name_argument_is_fallback():
    text = SMALL_ARCH.replace("# network: toy\n", "")
    assert parse_network(text, name="fallback").name == "fallback"
    assert parse_network(SMALL_ARCH, name="fallback").name == "toy"


def test_parse_rectangular_kernel_and_alias_kinds():
    net = parse_network("""\
input 9 7 2
conv c kw=3 kh=2 filters=4
lrn n k=3
sum s skip=n
""")
    assert net.layers[0].kernel_w == 3 and net.layers[0].kernel_h == 2
    assert net.layers[1].kind == "local_response_norm"
    assert net.layers[2].kind == "residual_sum"
    assert net.layers[2].skip == "n"


def test_parse_syntax_errors_carry_line_numbers():
    with pytest.raises(ArchSyntaxError) as err:
        parse_network("input 8 8 3\nconv c1 filters=four k=3\n")
    assert "line 2" in str(err.value)
    with pytest.raises(ArchSyntaxError) as err:
        parse_network("conv c1 filters=4 k=3\n")
    assert "line 1" in str(err.value)


def test_parse_k_and_kw_conflict():
    with pytest.raises(ArchSyntaxError):
        parse_network("input 8 8 3\nconv c1 filters=4 k=3 kw=2 kh=2\n")


def test_parse_unknown_kind_and_key():
    with pytest.raises(ArchSyntaxError):
        parse_network("input 8 8 3\ndeconv c1 filters=4 k=3\n")
    with pytest.raises(ArchSyntaxError):
        parse_network("input 8 8 3\nconv c1 filters=4 k=3 dilation=2\n")


def test_parse_semantic_error_for_bad_layer():
    with pytest.raises(ArchSemanticError) as err:
        parse_network("input 8 8 3\nconv c1 k=3\n")  # missing filters
    assert "line 2" in str(err.value)


def test_parse_pool_type_defaults_to_max():
    net = parse_network("input 8 8 3\npool p1 k=2 stride=2\n")
    assert net.layers[0].pool_kind == "max"


def test_parse_resblock_expands_and_wires_skip():
    net = parse_network("""\
input 10 10 4
conv stem filters=4 k=3 pad=1
resblock b filters=4 count=2
""")
    names = [l.name for l in net.layers]
    assert "b_1_sum" in names and "b_2_sum" in names
    sums = [l for l in net.layers if l.kind == "residual_sum"]
    assert sums[0].skip == "stem"
    assert sums[1].skip == "b_1_relu_out"
    shaped = infer_shapes(net)
    assert shaped.output == TensorShape(10, 10, 4)


def test_parse_resblock_single_conv_variant():
    net = parse_network("""\
input 8 8 4
conv stem filters=4 k=3 pad=1
resblock b filters=4 count=1 convs=1
""")
    kinds = [l.kind for l in net.layers[1:]]
    assert kinds == ["conv", "batch_norm", "relu", "residual_sum", "relu"]


def test_parse_resblock_cannot_lead():
    with pytest.raises(ArchSemanticError):
        parse_network("input 8 8 4\nresblock b filters=4 count=1\n")


@pytest.mark.parametrize("name", BUILTIN_NETWORK_NAMES)
def test_emit_parse_round_trip(name):
    net = builtin_network(name)
    text = emit_network(net)
    again = parse_network(text)
    assert again.name == net.name
    assert again.input == net.input
    assert again.layers == net.layers
    # and the round trip is a fixed point
    assert emit_network(again) == text
