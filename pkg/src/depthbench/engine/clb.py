"""Collapsible linear blocks: k x k expand conv, 1 x 1 project conv, no
nonlinearity in between, optional identity residual. At inference time the
pair folds into a single k x k convolution."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NotCollapsible, ShapeError
from . import kernels


@dataclass(frozen=True, eq=False)
class ClbBlock:
    expand_kernel: np.ndarray   # (k, k, cin, cmid)
    expand_bias: np.ndarray     # (cmid,)
    project_kernel: np.ndarray  # (1, 1, cmid, cout)
    project_bias: np.ndarray    # (cout,)
    residual: bool = False
    interior_activation: str | None = None

    def __post_init__(self):
        ek, pk = np.asarray(self.expand_kernel), np.asarray(self.project_kernel)
        if ek.ndim != 4 or pk.ndim != 4 or pk.shape[:2] != (1, 1):
            raise ShapeError("expand kernel must be (k,k,cin,cmid), project kernel (1,1,cmid,cout)")
        if ek.shape[0] != ek.shape[1] or ek.shape[0] % 2 == 0:
            raise ShapeError("expand kernel must be square with odd size")
        if ek.shape[3] != pk.shape[2]:
            raise ShapeError(f"expand outputs {ek.shape[3]} channels, project expects {pk.shape[2]}")
        if self.residual and ek.shape[2] != pk.shape[3]:
            raise ShapeError("residual CLB needs cin == cout")

    @property
    def k(self) -> int:
        return self.expand_kernel.shape[0]

    @property
    def channels(self) -> tuple[int, int, int]:
        _, _, cin, cmid = self.expand_kernel.shape
        return cin, cmid, self.project_kernel.shape[3]

    def multiplies_expanded(self) -> int:
        """Per-pixel multiply count of the two-pass form."""
        cin, cmid, cout = self.channels
        return self.k * self.k * cin * cmid + cmid * cout

    def multiplies_collapsed(self) -> int:
        cin, _, cout = self.channels
        return self.k * self.k * cin * cout


def run_expanded(block: ClbBlock, x, backend=None):
    from .ops import ACTIVATIONS

    pad = block.k // 2
    mid = kernels.conv2d(x, block.expand_kernel, block.expand_bias, padding=pad, backend=backend)
    if block.interior_activation:
        mid = ACTIVATIONS[block.interior_activation](mid)
    out = kernels.conv2d(mid, block.project_kernel, block.project_bias, backend=backend)
    if block.residual:
        out = out + x
    return out


def collapse_clb(block: ClbBlock) -> tuple[np.ndarray, np.ndarray]:
    """Fold the block into one (k, k, cin, cout) kernel and a bias."""
    if block.interior_activation:
        raise NotCollapsible(f"interior {block.interior_activation} prevents folding")
    ek = np.asarray(block.expand_kernel, dtype=np.float64)
    pk = np.asarray(block.project_kernel, dtype=np.float64)[0, 0]
    kernel = np.einsum("yxim,mo->yxio", ek, pk)
    bias = np.asarray(block.expand_bias, dtype=np.float64) @ pk + np.asarray(block.project_bias)
    if block.residual:
        c = block.k // 2
        kernel[c, c] += np.eye(kernel.shape[2])
    return kernel.astype(np.float32), bias.astype(np.float32)


def run_collapsed(block: ClbBlock, x, backend=None):
    kernel, bias = collapse_clb(block)
    return kernels.conv2d(x, kernel, bias, padding=block.k // 2, backend=backend)
