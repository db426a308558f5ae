import hashlib

import numpy as np
import pytest
from PIL import Image

from depthbench import dataio as D
from depthbench.errors import ConfigError, FormatError
from depthbench.rng import make_rng
from depthbench.types import DepthMap, RgbImage

RAW_VALUES = [0, 1, 5000, 50000, 65535]


def test_load_rgb_exact(tmp_path):
    px = np.array([[[0, 128, 255], [1, 2, 3]], [[10, 20, 30], [254, 253, 252]]], np.uint8)
    Image.fromarray(px, "RGB").save(tmp_path / "a.png")
    img = D.load_rgb(tmp_path / "a.png")
    assert img.values.dtype == np.float32
    np.testing.assert_array_equal(img.values, px.astype(np.float32) / np.float32(255))


def test_load_rgb_vga_and_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    px = rng.integers(0, 256, (480, 640, 3), dtype=np.uint8)
    Image.fromarray(px, "RGB").save(tmp_path / "vga.png")
    img = D.load_rgb(tmp_path / "vga.png")
    assert (img.height, img.width) == (480, 640)
    D.save_rgb(img, tmp_path / "again.png")
    assert (np.asarray(Image.open(tmp_path / "again.png")) == px).all()


def test_load_rgb_rejects(tmp_path):
    Image.fromarray(np.zeros((2, 2), np.uint8)).save(tmp_path / "gray.png")
    with pytest.raises(FormatError):
        D.load_rgb(tmp_path / "gray.png")
    (tmp_path / "junk.png").write_bytes(b"not a png")
    with pytest.raises(FormatError):
        D.load_rgb(tmp_path / "junk.png")
    with pytest.raises(FileNotFoundError):
        D.load_rgb(tmp_path / "missing.png")


def test_load_depth16_units_and_validity(tmp_path):
    raw = np.array([[5000, 0, 60000, 50000]], np.uint16)
    D.write_depth16_raw(raw, tmp_path / "d.png")
    d = D.load_depth16(tmp_path / "d.png")
    assert d.values[0, 0] == 5.0 and d.valid[0, 0]
    assert not d.valid[0, 1]
    assert not d.valid[0, 2]  # 60 m exceeds the 50 m cap
    assert d.valid[0, 3] and d.values[0, 3] == 50.0


def test_load_depth16_rejects_8bit(tmp_path):
    Image.fromarray(np.zeros((2, 2), np.uint8)).save(tmp_path / "d8.png")
    with pytest.raises(FormatError):
        D.load_depth16(tmp_path / "d8.png")


def test_raw_roundtrip_bit_exact_full_range(tmp_path):
    raw = np.arange(65536, dtype=np.uint16).reshape(256, 256)
    D.write_depth16_raw(raw, tmp_path / "all.png")
    np.testing.assert_array_equal(D.read_depth16_raw(tmp_path / "all.png"), raw)
    d = D.load_depth16(tmp_path / "all.png", max_depth=np.inf)
    D.save_depth16(d, tmp_path / "again.png")
    np.testing.assert_array_equal(D.read_depth16_raw(tmp_path / "again.png"), raw)


def test_depthmap_roundtrip(tmp_path):
    rng = np.random.default_rng(4)
    raw = rng.integers(1, 50001, (17, 23)).astype(np.uint16)
    raw[rng.random(raw.shape) < 0.2] = 0
    d = DepthMap.from_array(raw * 0.001)
    D.save_depth16(d, tmp_path / "d.png")
    back = D.load_depth16(tmp_path / "d.png")
    np.testing.assert_array_equal(back.valid, d.valid)
    np.testing.assert_array_equal(D.depth_to_raw(back), raw)
    digest = hashlib.sha256(D.read_depth16_raw(tmp_path / "d.png").tobytes()).hexdigest()
    assert digest == hashlib.sha256(raw.tobytes()).hexdigest()


def test_save_clamps_at_65535():
    d = DepthMap(np.array([[70.0]]), np.array([[True]]), max_depth=100.0)
    assert D.depth_to_raw(d)[0, 0] == 65535


def _write_pair(root, image_id, h=6, w=8, seed=0):
    rng = np.random.default_rng(seed)
    (root / "rgb").mkdir(exist_ok=True)
    (root / "depth").mkdir(exist_ok=True)
    Image.fromarray(rng.integers(0, 256, (h, w, 3), dtype=np.uint8), "RGB").save(root / "rgb" / f"{image_id}.png")
    D.write_depth16_raw(rng.integers(0, 20000, (h, w)).astype(np.uint16), root / "depth" / f"{image_id}.png")


def test_manifest_and_discovery(tmp_path):
    for i, name in enumerate(["b", "a", "c"]):
        _write_pair(tmp_path, name, seed=i)
    idx = D.discover(tmp_path / "rgb", tmp_path / "depth")
    assert idx.ids() == ["a", "b", "c"]
    idx.check_files()
    D.write_manifest(idx, tmp_path / "m.csv")
    assert (tmp_path / "m.csv").read_text().splitlines()[0] == "image_id,rgb_path,depth_path"
    back = D.read_manifest(tmp_path / "m.csv")
    assert back.ids() == idx.ids()
    rgb, depth = back.load_pair("b")
    assert (rgb.height, rgb.width) == depth.shape == (6, 8)


def test_manifest_errors(tmp_path):
    (tmp_path / "bad.csv").write_text("id,rgb\n")
    with pytest.raises(FormatError):
        D.read_manifest(tmp_path / "bad.csv")
    with pytest.raises(ConfigError):
        D.DatasetIndex([D.Entry("a", tmp_path, tmp_path), D.Entry("a", tmp_path, tmp_path)])
    with pytest.raises(FileNotFoundError):
        D.DatasetIndex([D.Entry("a", tmp_path / "x", tmp_path / "y")]).check_files()


def test_data_root_env(monkeypatch, tmp_path):
    monkeypatch.setenv("DEPTHBENCH_DATA_DIR", str(tmp_path))
    assert D.data_root() == tmp_path


def _index(n):
    return D.DatasetIndex([D.Entry(f"im{i:03d}", None, None) for i in range(n)])


def test_split_dataset():
    idx = _index(37)
    s0 = D.split_dataset(idx, 0.0, seed=1)
    assert s0.ids("val") == [] and len(s0.ids("train")) == 37
    a, b = D.split_dataset(idx, 0.25, seed=9), D.split_dataset(idx, 0.25, seed=9)
    assert a.split == b.split
    assert len(a.ids("val")) == 9  # floor(0.25 * 37 + 0.5)
    assert set(a.ids("val")).isdisjoint(a.ids("train"))
    assert sorted(a.ids("val") + a.ids("train")) == idx.ids()
    assert D.split_dataset(idx, 0.25, seed=10).split != a.split
    assert len(D.split_dataset(_index(10), 0.25, seed=0).ids("val")) == 3  # 2.5 rounds half-up
    with pytest.raises(ConfigError):
        D.split_dataset(idx, 1.5, seed=0)


def test_r2_crop_single_feasible():
    spec = D.r2_crop(0, (480, 640), D.CropConfig(480, 640, 480, 640))
    assert spec == D.CropSpec(0, 0, 480, 640)


def test_r2_crop_bounds_and_replay():
    cfg = D.CropConfig(64, 64)
    a = make_rng(2024)
    specs = [D.r2_crop(a, (480, 640), cfg) for _ in range(10_000)]
    for s in specs:
        assert 0 <= s.top and s.top + s.height <= 480
        assert 0 <= s.left and s.left + s.width <= 640
        assert 64 <= s.height <= 480 and 64 <= s.width <= 640
    b = make_rng(2024)
    assert specs == [D.r2_crop(b, (480, 640), cfg) for _ in range(10_000)]
    # uniform integer size mean within 3 sigma
    hs = np.array([s.height for s in specs])
    mu = (64 + 480) / 2
    sigma = np.sqrt(((480 - 64 + 1) ** 2 - 1) / 12 / len(hs))
    assert abs(hs.mean() - mu) < 3 * sigma


def test_r2_crop_infeasible():
    with pytest.raises(ConfigError):
        D.r2_crop(0, (50, 50), D.CropConfig())
    with pytest.raises(ConfigError):
        D.r2_crop(0, (100, 100), D.CropConfig(80, 80, 70, 90))


def test_crop_pair_alignment():
    rgb = RgbImage(np.random.default_rng(0).random((30, 40, 3)))
    depth = DepthMap.from_array(np.arange(1, 1201, dtype=float).reshape(30, 40) / 100)
    spec = D.CropSpec(3, 5, 10, 12)
    r, d = D.crop_pair(rgb, depth, spec)
    assert (r.height, r.width) == d.shape == (10, 12)
    np.testing.assert_array_equal(d.values, depth.values[3:13, 5:17])
    np.testing.assert_array_equal(r.values, rgb.values[3:13, 5:17])
