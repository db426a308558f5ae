"""Declarative inference graphs: validation, shape inference and execution.

A graph is a JSON document (see ``data/graph.schema.json``) holding an ordered
node list. Each node names its op, its input node ids and op parameters, and
may declare its output shape as ``[H, W, C]``. Inputs must be defined before
use, so the node list order is a valid topological order.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from ..errors import GraphError, ShapeError
from ..types import DepthMap, RgbImage, as_tensor
from . import kernels, ops
from .clb import ClbBlock, collapse_clb, run_expanded
from .shapes import conv_out_size, pair

GRAPH_SCHEMA = "depthbench.graph/1"
_SCHEMA = json.loads(resources.files("depthbench").joinpath("data/graph.schema.json").read_text())

_UNARY = {"relu", "hard_swish", "hard_sigmoid", "conv2d", "depthwise_conv2d", "se_block",
          "resize_nearest", "resize_bilinear", "clb"}


@dataclass(frozen=True)
class Node:
    id: str
    op: str
    inputs: tuple[str, ...] = ()
    params: dict = field(default_factory=dict)
    shape: tuple[int, int, int] | None = None


@dataclass(frozen=True)
class GraphSpec:
    nodes: tuple[Node, ...]
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    name: str = ""

    @classmethod
    def from_dict(cls, d: dict) -> "GraphSpec":
        try:
            jsonschema.validate(d, _SCHEMA)
        except jsonschema.ValidationError as exc:
            node_id = None
            path = list(exc.absolute_path)
            if len(path) >= 2 and path[0] == "nodes" and isinstance(path[1], int):
                node = d["nodes"][path[1]]
                node_id = node.get("id", f"#{path[1]}") if isinstance(node, dict) else f"#{path[1]}"
            raise GraphError(f"schema violation: {exc.message}", node_id) from None
        nodes = tuple(
            Node(n["id"], n["op"], tuple(n.get("inputs", ())), copy.deepcopy(n.get("params", {})),
                 tuple(n["shape"]) if "shape" in n else None)
            for n in d["nodes"]
        )
        g = cls(nodes, tuple(d["inputs"]), tuple(d["outputs"]), d.get("name", ""))
        g.infer_shapes()
        return g

    @classmethod
    def from_json(cls, text: str) -> "GraphSpec":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise GraphError(f"invalid JSON: {exc}") from None
        return cls.from_dict(d)

    @classmethod
    def load(cls, path) -> "GraphSpec":
        return cls.from_json(Path(path).read_text())

    def to_dict(self) -> dict:
        nodes = []
        for n in self.nodes:
            d = {"id": n.id, "op": n.op}
            if n.inputs:
                d["inputs"] = list(n.inputs)
            if n.params:
                d["params"] = copy.deepcopy(n.params)
            if n.shape is not None:
                d["shape"] = list(n.shape)
            nodes.append(d)
        return {"schema": GRAPH_SCHEMA, "name": self.name, "inputs": list(self.inputs),
                "outputs": list(self.outputs), "nodes": nodes}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    def node(self, node_id) -> Node:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def infer_shapes(self) -> dict[str, tuple[int, int, int]]:
        """Per-node (H, W, C); raises GraphError naming the first bad node."""
        shapes: dict[str, tuple[int, int, int]] = {}
        for n in self.nodes:
            if n.id in shapes:
                raise GraphError("duplicate node id", n.id)
            for i in n.inputs:
                if i not in shapes:
                    raise GraphError(f"input {i!r} is not defined before use", n.id)
            try:
                out = _infer(n, [shapes[i] for i in n.inputs])
            except (ShapeError, KeyError, TypeError, ValueError) as exc:
                if isinstance(exc, GraphError):
                    raise
                raise GraphError(str(exc) if not isinstance(exc, KeyError)
                                 else f"missing parameter {exc}", n.id) from None
            if n.shape is not None and tuple(n.shape) != out:
                raise GraphError(f"declared shape {list(n.shape)} != inferred {list(out)}", n.id)
            shapes[n.id] = out
        declared_inputs = [n.id for n in self.nodes if n.op == "input"]
        if sorted(declared_inputs) != sorted(self.inputs):
            raise GraphError(f"graph inputs {list(self.inputs)} != input nodes {declared_inputs}")
        for o in self.outputs:
            if o not in shapes:
                raise GraphError("output refers to an unknown node", o)
        return shapes


def _infer(n: Node, ins: list[tuple[int, int, int]]) -> tuple[int, int, int]:
    p = n.params
    if n.op == "input":
        if ins:
            raise ShapeError("input nodes take no inputs")
        h, w, c = p["shape"]
        return int(h), int(w), int(c)
    if n.op in _UNARY and len(ins) != 1:
        raise ShapeError(f"{n.op} takes exactly one input, got {len(ins)}")
    if n.op in ("concat", "add") and not ins:
        raise ShapeError(f"{n.op} needs at least one input")
    if n.op in ("relu", "hard_swish", "hard_sigmoid", "se_block"):
        if n.op == "se_block" and int(p["reduced_channels"]) < 1:
            raise ShapeError("reduced_channels must be >= 1")
        return ins[0]
    if n.op in ("conv2d", "depthwise_conv2d", "clb"):
        h, w, c = ins[0]
        k = pair(p["kernel_size"])
        if n.op == "clb":
            if k[0] != k[1] or k[0] % 2 == 0:
                raise ShapeError("clb kernel must be square and odd")
            s, pad, d = (1, 1), (k[0] // 2, k[0] // 2), (1, 1)
        else:
            s, pad, d = pair(p.get("stride", 1)), pair(p.get("padding", 0)), pair(p.get("dilation", 1))
        ho = conv_out_size(h, k[0], s[0], pad[0], d[0])
        wo = conv_out_size(w, k[1], s[1], pad[1], d[1])
        cout = c if n.op == "depthwise_conv2d" else int(p["out_channels"])
        if n.op == "clb" and p.get("residual") and cout != c:
            raise ShapeError("residual clb needs in == out channels")
        return ho, wo, cout
    if n.op == "resize_nearest":
        h, w, c = ins[0]
        if "scale" in p:
            s = p["scale"]
            if int(s) != s or s < 1:
                raise ShapeError("nearest scale must be a positive integer")
            return h * int(s), w * int(s), c
        oh, ow = p["size"]
        return int(oh), int(ow), c
    if n.op == "resize_bilinear":
        oh, ow = p["size"]
        return int(oh), int(ow), ins[0][2]
    if n.op == "concat":
        if p.get("axis", -1) not in (-1, 3):
            raise ShapeError("only channel concatenation is supported")
        if len({s[:2] for s in ins}) != 1:
            raise ShapeError(f"concat inputs differ spatially: {ins}")
        return ins[0][0], ins[0][1], sum(s[2] for s in ins)
    if n.op == "add":
        if len(set(ins)) != 1:
            raise ShapeError(f"add inputs differ in shape: {ins}")
        return ins[0]
    raise ShapeError(f"unknown op {n.op!r}")


def required_params(n: Node, in_shape, out_shape) -> dict[str, tuple[int, ...]]:
    """Weight tensors a node needs, with their expected shapes."""
    p = n.params
    if n.op == "conv2d":
        kh, kw = pair(p["kernel_size"])
        req = {"kernel": (kh, kw, in_shape[2], out_shape[2])}
        if p.get("bias", True):
            req["bias"] = (out_shape[2],)
        return req
    if n.op == "depthwise_conv2d":
        kh, kw = pair(p["kernel_size"])
        req = {"kernel": (kh, kw, in_shape[2])}
        if p.get("bias", True):
            req["bias"] = (in_shape[2],)
        return req
    if n.op == "se_block":
        c, r = in_shape[2], int(p["reduced_channels"])
        return {"w_reduce": (c, r), "b_reduce": (r,), "w_expand": (r, c), "b_expand": (c,)}
    if n.op == "clb":
        k = pair(p["kernel_size"])[0]
        m = int(p["expand_channels"])
        return {"expand_kernel": (k, k, in_shape[2], m), "expand_bias": (m,),
                "project_kernel": (1, 1, m, out_shape[2]), "project_bias": (out_shape[2],)}
    return {}


class Engine:
    """A validated (graph, weights) pair ready for repeated inference.

    ``backend`` selects the kernel implementation (``"auto"``, ``"numpy"``, ``"cython"``
    or ``"naive"`` for the loop oracles). With ``collapse=True`` each CLB
    is folded into one convolution at construction time.
    """

    def __init__(self, graph: GraphSpec, weights, backend=None, collapse=True):
        self.graph = graph
        self.backend = backend
        self.shapes = graph.infer_shapes()
        self.weights = {}
        for n in graph.nodes:
            req = required_params(n, self.shapes[n.inputs[0]] if n.inputs else None, self.shapes[n.id])
            if not req:
                continue
            got = weights.get(n.id)
            if got is None:
                raise GraphError("no weights for parameterized node", n.id)
            params = {}
            for name, shape in req.items():
                if name not in got:
                    raise GraphError(f"missing weight tensor {name!r}", n.id)
                arr = np.asarray(got[name], dtype=np.float32)
                if arr.shape != shape:
                    raise GraphError(f"weight {name!r} has shape {arr.shape}, expected {shape}", n.id)
                params[name] = arr
            if n.op == "clb":
                block = ClbBlock(params["expand_kernel"], params["expand_bias"],
                                 params["project_kernel"], params["project_bias"],
                                 residual=bool(n.params.get("residual", False)))
                params = {"block": block}
                if collapse:
                    params["collapsed"] = collapse_clb(block)
            self.weights[n.id] = params

    def _conv(self, *args, **kw):
        if self.backend == "naive":
            from .reference import conv2d_naive
            return conv2d_naive(*args, **kw).astype(np.float32)
        return kernels.conv2d(*args, **kw, backend=self.backend)

    def _dwconv(self, *args, **kw):
        if self.backend == "naive":
            from .reference import depthwise_conv_naive
            return depthwise_conv_naive(*args, **kw).astype(np.float32)
        return kernels.depthwise_conv2d(*args, **kw, backend=self.backend)

    def _exec(self, n: Node, xs):
        p, wts = n.params, self.weights.get(n.id, {})
        x = xs[0] if xs else None
        if n.op == "conv2d":
            return self._conv(x, wts["kernel"], wts.get("bias"), stride=p.get("stride", 1),
                              padding=p.get("padding", 0), dilation=p.get("dilation", 1))
        if n.op == "depthwise_conv2d":
            return self._dwconv(x, wts["kernel"], wts.get("bias"), stride=p.get("stride", 1),
                                padding=p.get("padding", 0), dilation=p.get("dilation", 1))
        if n.op in ops.ACTIVATIONS:
            return ops.ACTIVATIONS[n.op](x)
        if n.op == "se_block":
            c = x.shape[-1]
            pooled = x.mean(axis=(1, 2), keepdims=True, dtype=np.float64).astype(np.float32)
            s = ops.relu(self._conv(pooled, wts["w_reduce"][None, None], wts["b_reduce"]))
            gate = ops.hard_sigmoid(self._conv(s, wts["w_expand"][None, None], wts["b_expand"]))
            return x * gate.reshape(-1, 1, 1, c)
        if n.op == "clb":
            block = wts["block"]
            if "collapsed" in wts:
                k, b = wts["collapsed"]
                return self._conv(x, k, b, padding=block.k // 2)
            pad = block.k // 2
            mid = self._conv(x, block.expand_kernel, block.expand_bias, padding=pad)
            out = self._conv(mid, block.project_kernel, block.project_bias)
            return out + x if block.residual else out
        if n.op == "resize_nearest":
            if "scale" in p:
                return ops.resize_nearest(x, scale=p["scale"])
            return ops.resize_nearest(x, size=tuple(p["size"]))
        if n.op == "resize_bilinear":
            return ops.resize_bilinear(x, tuple(p["size"]))
        if n.op == "concat":
            return ops.concat(xs, axis=-1)
        if n.op == "add":
            return ops.add(xs)
        raise GraphError(f"cannot execute op {n.op!r}", n.id)

    def run_tensors(self, feeds: dict[str, np.ndarray], keep: bool = False) -> dict[str, np.ndarray]:
        """Execute the graph on NHWC feeds; returns outputs (or all activations)."""
        values: dict[str, np.ndarray] = {}
        for n in self.graph.nodes:
            if n.op == "input":
                if n.id not in feeds:
                    raise GraphError("no value fed for input", n.id)
                x = as_tensor(feeds[n.id])
                if x.shape[1:] != self.shapes[n.id]:
                    raise GraphError(f"fed shape {x.shape[1:]} != declared {self.shapes[n.id]}", n.id)
                values[n.id] = x
                continue
            try:
                values[n.id] = self._exec(n, [values[i] for i in n.inputs])
            except GraphError:
                raise
            except Exception as exc:
                raise GraphError(f"execution failed: {exc}", n.id) from exc
        if keep:
            return values
        return {o: values[o] for o in self.graph.outputs}

    def run(self, image) -> DepthMap:
        """Single-image inference returning the first output as a DepthMap."""
        out = self.run_raw(image)
        return DepthMap.from_array(out)

    def run_raw(self, image) -> np.ndarray:
        """Single-image inference returning the first output channel as H x W float32."""
        x = image.values if isinstance(image, RgbImage) else image
        if len(self.graph.inputs) != 1:
            raise GraphError("run() needs a single-input graph")
        out = self.run_tensors({self.graph.inputs[0]: x})[self.graph.outputs[0]]
        return out[0, :, :, 0]


def run_graph(graph: GraphSpec, weights, image, backend=None) -> DepthMap:
    return Engine(graph, weights, backend=backend).run(image)
