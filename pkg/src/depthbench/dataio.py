"""Dataset ingestion: RGB / 16-bit depth PNG pairs, manifests, splits and R^2 crops."""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ConfigError, FormatError, ShapeError
from .rng import make_rng
from .types import MAX_DEPTH_M, DepthMap, RgbImage

DATA_DIR_ENV = "DEPTHBENCH_DATA_DIR"
DEFAULT_UNIT_SCALE = 0.001  # raw uint16 units are millimeters
MANIFEST_HEADER = ("image_id", "rgb_path", "depth_path")
_DEPTH_MODES = ("I;16", "I;16L", "I;16B")


def data_root(default=".") -> Path:
    return Path(os.environ.get(DATA_DIR_ENV, default))


def _open(path) -> Image.Image:
    try:
        im = Image.open(path)
        im.load()
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise FormatError(f"{path}: cannot decode image ({exc})") from exc
    return im


def load_rgb(path) -> RgbImage:
    """Decode an 8-bit RGB PNG to intensities in [0, 1]."""
    im = _open(path)
    if im.mode != "RGB":
        raise FormatError(f"{path}: expected an 8-bit RGB image, got mode {im.mode}")
    return RgbImage(np.asarray(im, dtype=np.float32) / np.float32(255.0))


def save_rgb(image: RgbImage | np.ndarray, path):
    v = image.values if isinstance(image, RgbImage) else np.asarray(image)
    Image.fromarray(np.round(np.clip(v, 0, 1) * 255).astype(np.uint8), mode="RGB").save(path)


def read_depth16_raw(path) -> np.ndarray:
    im = _open(path)
    if im.mode not in _DEPTH_MODES:
        raise FormatError(f"{path}: expected a 16-bit single-channel PNG, got mode {im.mode}")
    return np.asarray(im, dtype=np.uint16)


def write_depth16_raw(raw: np.ndarray, path):
    raw = np.asarray(raw)
    if raw.ndim != 2:
        raise ShapeError(f"depth image must be 2-D, got {raw.shape}")
    if raw.dtype != np.uint16:
        raise FormatError(f"raw depth must be uint16, got {raw.dtype}")
    Image.fromarray(raw).save(path, format="PNG")


def load_depth16(path, unit_scale: float = DEFAULT_UNIT_SCALE, max_depth: float = MAX_DEPTH_M) -> DepthMap:
    """meters = raw * unit_scale; valid where raw > 0 and meters <= max_depth."""
    raw = read_depth16_raw(path)
    meters = raw.astype(np.float64) * unit_scale
    valid = (raw > 0) & (meters <= max_depth)
    return DepthMap(np.where(valid, meters, 0.0), valid, max_depth)


def depth_to_raw(depth: DepthMap, unit_scale: float = DEFAULT_UNIT_SCALE) -> np.ndarray:
    """Quantize to uint16; invalid pixels become 0 and values clamp at 65535."""
    raw = np.rint(depth.values / unit_scale)
    raw = np.where(depth.valid, np.clip(raw, 0, 65535), 0)
    return raw.astype(np.uint16)


def save_depth16(depth: DepthMap, path, unit_scale: float = DEFAULT_UNIT_SCALE):
    write_depth16_raw(depth_to_raw(depth, unit_scale), path)


@dataclass(frozen=True)
class Entry:
    image_id: str
    rgb_path: Path
    depth_path: Path


@dataclass
class DatasetIndex:
    entries: list[Entry]
    split: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        ids = [e.image_id for e in self.entries]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise ConfigError(f"duplicate image ids: {dup}")

    def __len__(self):
        return len(self.entries)

    def ids(self, split: str | None = None) -> list[str]:
        return [e.image_id for e in self.entries if split is None or self.split.get(e.image_id) == split]

    def check_files(self):
        missing = [str(p) for e in self.entries for p in (e.rgb_path, e.depth_path) if not p.exists()]
        if missing:
            raise FileNotFoundError(f"missing dataset files: {missing}")

    def load_pair(self, image_id: str, unit_scale: float = DEFAULT_UNIT_SCALE):
        e = next(e for e in self.entries if e.image_id == image_id)
        rgb, depth = load_rgb(e.rgb_path), load_depth16(e.depth_path, unit_scale)
        if (rgb.height, rgb.width) != depth.shape:
            raise ShapeError(f"{image_id}: RGB {rgb.height}x{rgb.width} vs depth {depth.shape}")
        return rgb, depth


def read_manifest(path, root=None) -> DatasetIndex:
    """CSV with header ``image_id,rgb_path,depth_path``; relative paths resolve
    against ``root`` (default: the manifest's directory)."""
    path = Path(path)
    root = Path(root) if root is not None else path.parent
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows or tuple(rows[0]) != MANIFEST_HEADER:
        raise FormatError(f"{path}: manifest header must be {','.join(MANIFEST_HEADER)}")
    entries = []
    for r in rows[1:]:
        if len(r) != 3:
            raise FormatError(f"{path}: bad manifest row {r}")
        entries.append(Entry(r[0], root / r[1], root / r[2]))
    return DatasetIndex(entries)


def write_manifest(index: DatasetIndex, path, root=None):
    root = Path(root) if root is not None else Path(path).parent
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_HEADER)
        for e in index.entries:
            w.writerow([e.image_id, os.path.relpath(e.rgb_path, root), os.path.relpath(e.depth_path, root)])


def discover(rgb_dir, depth_dir, pattern="*.png") -> DatasetIndex:
    """Pair files in two directories by filename stem (sorted by id)."""
    rgb = {p.stem: p for p in Path(rgb_dir).glob(pattern)}
    depth = {p.stem: p for p in Path(depth_dir).glob(pattern)}
    return DatasetIndex([Entry(i, rgb[i], depth[i]) for i in sorted(rgb.keys() & depth.keys())])


def split_dataset(index: DatasetIndex, val_fraction: float, seed: int) -> DatasetIndex:
    """Shuffle with the pinned PRNG, then take the first round(f * n) ids as val.

    Rounding is half-up. Entry order is preserved in the returned index.
    """
    if not 0.0 <= val_fraction <= 1.0:
        raise ConfigError("val_fraction must lie in [0, 1]")
    n = len(index)
    n_val = int(math.floor(val_fraction * n + 0.5))
    perm = make_rng(seed).permutation(n)
    val = {index.entries[i].image_id for i in perm[:n_val]}
    split = {e.image_id: ("val" if e.image_id in val else "train") for e in index.entries}
    return DatasetIndex(list(index.entries), split)


@dataclass(frozen=True)
class CropConfig:
    min_height: int = 64
    min_width: int = 64
    max_height: int | None = None
    max_width: int | None = None


@dataclass(frozen=True)
class CropSpec:
    top: int
    left: int
    height: int
    width: int

    def apply(self, a):
        """Crop the leading two (H, W) axes of an array, DepthMap or RgbImage."""
        sl = (slice(self.top, self.top + self.height), slice(self.left, self.left + self.width))
        if isinstance(a, DepthMap):
            return DepthMap(a.values[sl], a.valid[sl], a.max_depth)
        if isinstance(a, RgbImage):
            return RgbImage(a.values[sl])
        return np.asarray(a)[sl]


def r2_crop(rng, source_dims: tuple[int, int], config: CropConfig = CropConfig()) -> CropSpec:
    """Random-size, random-location crop.

    Draw order on ``rng``: height, width (uniform integers in [min, max]),
    then top, left (uniform over every in-bounds position).
    """
    rng = make_rng(rng)
    sh, sw = source_dims
    max_h = sh if config.max_height is None else config.max_height
    max_w = sw if config.max_width is None else config.max_width
    if not (1 <= config.min_height <= max_h <= sh and 1 <= config.min_width <= max_w <= sw):
        raise ConfigError(f"infeasible crop config {config} for source {source_dims}")
    h = int(rng.integers(config.min_height, max_h + 1))
    w = int(rng.integers(config.min_width, max_w + 1))
    top = int(rng.integers(0, sh - h + 1))
    left = int(rng.integers(0, sw - w + 1))
    return CropSpec(top, left, h, w)


def crop_pair(rgb, depth, spec: CropSpec):
    """Apply one crop to an aligned RGB / depth pair."""
    return spec.apply(rgb), spec.apply(depth)
