"""Reference graphs and weight initializers.

``tcl-tiny`` follows the winning entry's published topology: bilinear
downscale of the 640x480 input to 160x128, a trimmed MobileNetV3-style
encoder that stops at 1/8 of that resolution, a decoder made only of
collapsible linear blocks with skip concatenation, a 64x48 head and a x10
nearest-neighbour upsample back to 640x480. Channel widths are our choice.
"""
from __future__ import annotations

import numpy as np

from ..rng import make_rng
from .graph import GraphSpec, required_params
from .weights import WeightStore

TCL_TINY_TRACE = {
    "image": (480, 640, 3),
    "down": (128, 160, 3),
    "stem": (64, 80, 16),
    "s2_pw": (32, 40, 24),
    "s3_pw": (16, 20, 48),
    "d3_resize": (48, 64, 8),
    "head": (48, 64, 1),
    "depth": (480, 640, 1),
}


class _Builder:
    def __init__(self):
        self.nodes = []
        self.shapes = {}

    def add(self, id, op, inputs=(), shape=None, **params):
        node = {"id": id, "op": op}
        if inputs:
            node["inputs"] = list(inputs)
        if params:
            node["params"] = params
        if shape is not None:
            node["shape"] = list(shape)
        self.nodes.append(node)
        return id


def aspp(b: _Builder, prefix: str, x: str, out_channels: int, rates=(1, 2, 4), shape=None):
    """Parallel dilated 3x3 convolutions at several rates, concatenated and fused by a 1x1 conv."""
    branches = []
    for r in rates:
        c = b.add(f"{prefix}_r{r}", "conv2d", [x], kernel_size=3, padding=r, dilation=r,
                  out_channels=out_channels)
        branches.append(b.add(f"{prefix}_r{r}_act", "relu", [c]))
    cat = b.add(f"{prefix}_cat", "concat", branches)
    return b.add(f"{prefix}_fuse", "conv2d", [cat], kernel_size=1, out_channels=out_channels,
                 shape=shape)


def tcl_tiny() -> GraphSpec:
    b = _Builder()
    t = TCL_TINY_TRACE
    b.nodes.append({"id": "image", "op": "input", "params": {"shape": list(t["image"])},
                    "shape": list(t["image"])})
    b.add("down", "resize_bilinear", ["image"], t["down"], size=[128, 160])
    b.add("stem", "conv2d", ["down"], t["stem"], kernel_size=3, stride=2, padding=1, out_channels=16)
    b.add("stem_act", "hard_swish", ["stem"])
    # stage 1: depthwise-separable block with squeeze-excite, residual
    b.add("s1_dw", "depthwise_conv2d", ["stem_act"], kernel_size=3, padding=1)
    b.add("s1_dw_act", "relu", ["s1_dw"])
    b.add("s1_se", "se_block", ["s1_dw_act"], reduced_channels=8)
    b.add("s1_pw", "conv2d", ["s1_se"], kernel_size=1, out_channels=16)
    b.add("s1_out", "add", ["stem_act", "s1_pw"], (64, 80, 16))
    # stage 2: inverted residual, stride 2
    b.add("s2_exp", "conv2d", ["s1_out"], kernel_size=1, out_channels=64)
    b.add("s2_exp_act", "hard_swish", ["s2_exp"])
    b.add("s2_dw", "depthwise_conv2d", ["s2_exp_act"], kernel_size=3, stride=2, padding=1)
    b.add("s2_dw_act", "hard_swish", ["s2_dw"])
    b.add("s2_pw", "conv2d", ["s2_dw_act"], t["s2_pw"], kernel_size=1, out_channels=24)
    # stage 3: inverted residual with SE, stride 2; the encoder stops here (1/8)
    b.add("s3_exp", "conv2d", ["s2_pw"], kernel_size=1, out_channels=96)
    b.add("s3_exp_act", "hard_swish", ["s3_exp"])
    b.add("s3_dw", "depthwise_conv2d", ["s3_exp_act"], kernel_size=5, stride=2, padding=2)
    b.add("s3_dw_act", "hard_swish", ["s3_dw"])
    b.add("s3_se", "se_block", ["s3_dw_act"], reduced_channels=24)
    b.add("s3_pw", "conv2d", ["s3_se"], t["s3_pw"], kernel_size=1, out_channels=48)
    # decoder: CLBs 48 -> 24 -> 16 -> 8 with skip concatenation
    b.add("d1", "clb", ["s3_pw"], (16, 20, 24), kernel_size=3, expand_channels=96, out_channels=24)
    b.add("d1_act", "relu", ["d1"])
    b.add("d1_up", "resize_nearest", ["d1_act"], (32, 40, 24), scale=2)
    b.add("d1_cat", "concat", ["d1_up", "s2_pw"], (32, 40, 48))
    b.add("d2", "clb", ["d1_cat"], (32, 40, 16), kernel_size=3, expand_channels=96, out_channels=16)
    b.add("d2_act", "relu", ["d2"])
    b.add("d2_up", "resize_nearest", ["d2_act"], (64, 80, 16), scale=2)
    b.add("d2_cat", "concat", ["d2_up", "s1_out"], (64, 80, 32))
    b.add("d3", "clb", ["d2_cat"], (64, 80, 8), kernel_size=3, expand_channels=64, out_channels=8)
    b.add("d3_act", "relu", ["d3"])
    b.add("d3_resize", "resize_bilinear", ["d3_act"], t["d3_resize"], size=[48, 64])
    b.add("head", "conv2d", ["d3_resize"], t["head"], kernel_size=3, padding=1, out_channels=1)
    b.add("head_act", "relu", ["head"])
    b.add("depth", "resize_nearest", ["head_act"], t["depth"], scale=10)
    return GraphSpec.from_dict({"schema": "depthbench.graph/1", "name": "tcl-tiny",
                                "inputs": ["image"], "outputs": ["depth"], "nodes": b.nodes})


BUILTIN_GRAPHS = {"tcl-tiny": tcl_tiny}


def _param_specs(graph: GraphSpec):
    shapes = graph.infer_shapes()
    for n in graph.nodes:
        req = required_params(n, shapes[n.inputs[0]] if n.inputs else None, shapes[n.id])
        if req:
            yield n, req


def zero_weights(graph: GraphSpec) -> WeightStore:
    return WeightStore({n.id: {k: np.zeros(s, np.float32) for k, s in req.items()}
                        for n, req in _param_specs(graph)})


def random_weights(graph: GraphSpec, seed: int = 0, head_bias: float = 2.0) -> WeightStore:
    """He-scaled normal kernels, small biases; the final conv gets a positive bias.

    Draw order follows the node list, then each node's parameters in the order
    listed by ``required_params``.
    """
    rng = make_rng(seed)
    ws = WeightStore()
    last_conv = [n.id for n in graph.nodes if n.op == "conv2d"][-1]
    for n, req in _param_specs(graph):
        params = {}
        for name, shape in req.items():
            if len(shape) == 1:
                a = rng.normal(0.0, 0.01, size=shape)
            else:
                fan_in = int(np.prod(shape[:-1])) if n.op != "depthwise_conv2d" else shape[0] * shape[1]
                a = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
            params[name] = a.astype(np.float32)
        if n.id == last_conv and "bias" in params:
            params["bias"] = params["bias"] + np.float32(head_bias)
        ws[n.id] = params
    return ws
