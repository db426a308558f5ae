import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from depthbench import losses as L
from depthbench.errors import EmptyMask, InsufficientGeometry, NonPositiveDepth, ShapeError
from depthbench.types import CameraIntrinsics, DepthMap

from conftest import random_depth
from oracles import distill_oracle, gradient_oracle, vnl_oracle


def row(*vals):
    a = np.array([vals], dtype=float)
    return DepthMap(a, np.ones_like(a, bool))


# ---------------------------------------------------------------- silog

def test_silog_examples(rng):
    gt = random_depth(rng, hi=15.0)
    assert L.silog_loss(gt, gt) == 0.0
    p = L.SilogParams(10.0, 0.85)
    assert L.silog_loss(gt.values * math.e, gt, p) == pytest.approx(10 * math.sqrt(0.15), abs=1e-9)
    assert L.silog_loss(gt.values * math.e, gt, p) == pytest.approx(3.8730, abs=1e-4)
    full = L.SilogParams(10.0, 1.0)
    for s in (0.3, 2.0, 7.5):
        assert L.silog_loss(gt.values * s, gt, full) == pytest.approx(0.0, abs=1e-9)


def test_silog_matches_direct_formula(rng):
    gt, pred = random_depth(rng), random_depth(rng)
    e = np.log(pred.values) - np.log(gt.values)
    n = e.size
    want = 7.0 * math.sqrt(np.sum(e**2) / n - 0.4 / n**2 * np.sum(e) ** 2)
    assert L.silog_loss(pred, gt, L.SilogParams(7.0, 0.4)) == pytest.approx(want, rel=1e-12)


def test_silog_params_and_errors():
    with pytest.raises(ValueError):
        L.SilogParams(0.0, 0.5)
    with pytest.raises(ValueError):
        L.SilogParams(1.0, 1.5)
    with pytest.raises(NonPositiveDepth):
        L.silog_loss(np.array([[0.0, 1.0]]), row(1, 1))


# ---------------------------------------------------------------- gradient

def test_gradient_examples(rng):
    gt = random_depth(rng)
    assert L.gradient_loss(gt, gt) == 0.0
    assert L.gradient_loss(gt.values + 3.0, gt) == pytest.approx(0.0, abs=1e-12)
    assert L.gradient_loss(row(1, 3, 3), row(1, 2, 3)) == pytest.approx(1.0, abs=1e-15)


def test_gradient_matches_oracle(rng):
    for _ in range(10):
        pred = random_depth(rng, 7, 9, invalid_frac=0.25)
        gt = random_depth(rng, 7, 9, invalid_frac=0.25)
        assert L.gradient_loss(pred, gt) == pytest.approx(gradient_oracle(pred, gt), rel=1e-12)


def test_gradient_constant_shift_both(rng):
    pred, gt = random_depth(rng), random_depth(rng)
    base = L.gradient_loss(pred, gt)
    assert L.gradient_loss(pred.values + 2.0, gt.values + 2.0) == pytest.approx(base, abs=1e-12)


def test_gradient_empty():
    with pytest.raises(EmptyMask):
        L.gradient_loss(row(1.0), row(2.0))


# ---------------------------------------------------------------- vnl

@pytest.fixture
def tilted_pair():
    h, w = 24, 32
    k = CameraIntrinsics(30.0, 30.0, (w - 1) / 2, (h - 1) / 2)
    gt = DepthMap(np.full((h, w), 5.0), np.ones((h, w), bool))
    u = np.arange(w)[None, :].repeat(h, 0)
    pred_v = np.where(u < w // 2, 5.0, 5.0 + 0.2 * (u - w // 2))
    return DepthMap(pred_v, np.ones((h, w), bool)), gt, k


def test_vnl_zero_on_identical(rng, intrinsics):
    gt = random_depth(rng)
    assert L.vnl_loss(gt, gt, intrinsics, seed=1, n_triplets=500) == 0.0


def test_vnl_scale_of_pred_only_is_free(rng, intrinsics):
    gt = random_depth(rng)
    v = L.vnl_loss(gt.scaled(2.0), gt, intrinsics, seed=3, n_triplets=500)
    assert v == pytest.approx(0.0, abs=1e-12)


def test_vnl_oracle_equivalence(tilted_pair):
    pred, gt, k = tilted_pair
    tp, tg, idx = L.sample_triplets(pred, gt, k, seed=7, params=L.VnlParams(n_triplets=400))
    got = L.vnl_loss(pred, gt, k, seed=7, n_triplets=400)
    assert got > 0
    assert got == pytest.approx(vnl_oracle(pred, gt, k, idx), abs=1e-12)
    # triplets lying entirely in the flat half contribute nothing
    w = pred.shape[1]
    flat_half = np.all(idx % w < w // 2, axis=1)
    n_p = L.unit_normals(tp[flat_half, 0], tp[flat_half, 1], tp[flat_half, 2])
    np.testing.assert_allclose(n_p, np.tile([0, 0, 1.0], (flat_half.sum(), 1)), atol=1e-12)


def test_vnl_deterministic_and_scale_invariant(tilted_pair):
    pred, gt, k = tilted_pair
    a = L.vnl_loss(pred, gt, k, seed=11, n_triplets=300)
    assert L.vnl_loss(pred, gt, k, seed=11, n_triplets=300) == a
    assert L.vnl_loss(pred, gt, k, seed=12, n_triplets=300) != a
    for s in (0.25, 3.0, 7.1):
        assert L.vnl_loss(pred.scaled(s), gt.scaled(s), k, seed=11, n_triplets=300) == pytest.approx(a, abs=1e-9)


def test_vnl_triplet_filters(tilted_pair):
    pred, gt, k = tilted_pair
    _, _, idx = L.sample_triplets(pred, gt, k, seed=0, params=L.VnlParams(n_triplets=2000))
    w = pred.shape[1]
    r, c = idx // w, idx % w
    for a, b in ((0, 1), (1, 2), (0, 2)):
        assert np.all(np.hypot(r[:, a] - r[:, b], c[:, a] - c[:, b]) >= 3)


def test_vnl_insufficient_geometry(intrinsics):
    line = DepthMap(np.ones((1, 40)), np.ones((1, 40), bool))  # one pixel row: always collinear
    with pytest.raises(InsufficientGeometry):
        L.vnl_loss(line, line, intrinsics, n_triplets=200)
    with pytest.raises(InsufficientGeometry):
        L.vnl_loss(row(1, 1), row(1, 1), intrinsics)


def test_default_triplet_count():
    assert L.default_triplet_count(10**4) == 100_000
    assert L.default_triplet_count(10**6) == 100_000
    assert L.default_triplet_count(5_000) == 50_000
    assert L.default_triplet_count(1) == 10


def test_unit_normal_orientation():
    z = np.zeros(3)
    n = L.unit_normals(z, np.array([0, 1.0, 0]), np.array([1.0, 0, 0]))  # raw normal (0,0,-1)
    assert n.tolist() == [0, 0, 1.0]
    n = L.unit_normals(z, np.array([1.0, 0, 0]), np.array([0, 0, 1.0]))  # raw (0,-1,0)
    assert n.tolist() == [0, 1.0, 0]


# ---------------------------------------------------------------- robust

def test_robust_examples():
    for a in (-2.0, 0.0, 0.5, 1.0, 2.0, 4.0):
        assert L.robust_loss(0.0, L.RobustParams(a, 2.0)) == 0.0
    assert L.robust_loss(2.0, L.RobustParams(1.0, 2.0)) == pytest.approx(math.sqrt(2) - 1, abs=1e-12)
    xs = np.linspace(-6, 6, 101)
    half_sq = 0.5 * (xs / 2.0) ** 2
    np.testing.assert_allclose(L.robust_elementwise(xs, L.RobustParams(2.0, 2.0)), half_sq, atol=0)
    # Near a=2 the exact loss deviates from the limit by ~ z*d*ln(1/d)/4 (z=(x/c)^2,
    # d=|a-2|), which stays under 1e-6 only for |x/c| <~ 0.58; check the
    # log-residual range the depth loss feeds in.
    xs = np.linspace(-1, 1, 201)
    for a in (2 - 1e-6, 2 + 1e-6):
        np.testing.assert_allclose(L.robust_elementwise(xs, L.RobustParams(a, 2.0)),
                                   0.5 * (xs / 2.0) ** 2, rtol=0, atol=1e-6)


def test_robust_near_two_matches_high_precision():
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 50
    for x in (0.5, 2.0, 6.0):
        for a in (2 - 1e-6, 2 + 1e-6, 1.0, -1.5, 0.3):
            z = (mp.mpf(x) / 2) ** 2
            b = abs(mp.mpf(a) - 2)
            want = float(b / a * ((z / b + 1) ** (mp.mpf(a) / 2) - 1))
            got = float(L.robust_elementwise(np.array([x]), L.RobustParams(a, 2.0))[0])
            assert got == pytest.approx(want, rel=1e-9, abs=1e-15)


def test_robust_alpha_zero_limit():
    xs = np.linspace(-5, 5, 41)
    exact = L.robust_elementwise(xs, L.RobustParams(0.0, 1.5))
    near = L.robust_elementwise(xs, L.RobustParams(1e-7, 1.5))
    np.testing.assert_allclose(near, exact, atol=1e-5)


def test_robust_as_printed_mode():
    p = L.RobustParams(1.0, 2.0, as_printed=True)
    assert L.robust_loss(0.0, p) == -1.0  # nonzero at zero residual
    assert L.robust_loss(2.0, p) == pytest.approx(0.0, abs=1e-15)  # |x/c| - 1


@settings(max_examples=60, deadline=None)
@given(st.floats(-3, 6), st.floats(0.1, 5), st.floats(0, 50))
def test_robust_even_and_monotone(alpha, c, x):
    p = L.RobustParams(alpha, c)
    f = lambda v: float(L.robust_elementwise(np.array([v]), p)[0])
    assert f(x) == f(-x)
    assert f(x * 1.1 + 0.01) >= f(x) - 1e-12
    assert f(x) >= 0


# ---------------------------------------------------------------- depth / stage-2

def test_depth_loss_zero_and_projection(rng, intrinsics):
    gt = random_depth(rng, 10, 12)
    assert L.depth_loss(gt, gt, intrinsics, n_triplets=300) == 0.0
    pred = random_depth(rng, 10, 12)
    w = L.DepthLossWeights(1, 0, 0, 0)
    assert L.depth_loss(pred, gt, intrinsics, w) == L.silog_loss(pred, gt)


def test_depth_loss_additivity(rng):
    k = CameraIntrinsics(8.0, 8.0, 3.5, 3.5)
    gt, pred = random_depth(rng, 8, 8), random_depth(rng, 8, 8)
    total = L.depth_loss(pred, gt, k, vnl_seed=5, n_triplets=200)
    terms = (1.0 * L.silog_loss(pred, gt, L.SilogParams(10, 0.85))
             + 0.25 * L.gradient_loss(pred, gt)
             + 2.5 * L.vnl_loss(pred, gt, k, seed=5, n_triplets=200)
             + 0.6 * L.robust_loss(np.log(pred.values) - np.log(gt.values), L.RobustParams(1.0, 2.0)))
    assert total == pytest.approx(terms, abs=1e-12)


def test_stage2():
    assert L.stage2_loss(0.7, 0.0) == 0.7
    assert L.stage2_loss(0.5, 0.1, 10) == pytest.approx(1.5, abs=1e-15)


def test_stage2_full_fixture(rng):
    k = CameraIntrinsics(8.0, 8.0, 3.5, 3.5)
    gt, pred = random_depth(rng, 8, 8), random_depth(rng, 8, 8)
    fs, ft = rng.normal(size=(4, 4, 3)), rng.normal(size=(4, 4, 5))
    d = L.depth_loss(pred, gt, k, n_triplets=200)
    p = L.pairwise_distill_loss(fs, ft)
    assert L.stage2_loss(d, p) == pytest.approx(d + 10 * p, abs=1e-12)


# ---------------------------------------------------------------- affinity / distillation

def test_affinity_examples(rng):
    a = L.pairwise_affinity(np.array([[[1.0], [-1.0]]]))
    assert a.tolist() == [[1.0, -1.0], [-1.0, 1.0]]
    f = rng.normal(size=(4, 4, 3))
    a = L.pairwise_affinity(f)
    assert a.shape == (16, 16)
    np.testing.assert_array_equal(np.diag(a), 1.0)
    np.testing.assert_allclose(a, a.T, atol=0)
    assert np.all(np.abs(a) <= 1 + 1e-12)


def test_affinity_zero_vector_floor():
    a = L.pairwise_affinity(np.array([[[0.0, 0.0], [1.0, 0.0]]]))
    assert np.isfinite(a).all() and a[0, 0] == 1.0 and a[0, 1] == 0.0


def test_distill_examples(rng):
    t = np.array([[[1.0], [1.0]]])
    s = np.array([[[1.0], [-1.0]]])
    assert L.pairwise_distill_loss(s, t) == 4.0
    f = rng.normal(size=(3, 5, 4))
    assert L.pairwise_distill_loss(f, f) == 0.0
    with pytest.raises(ShapeError):
        L.pairwise_distill_loss(np.ones((2, 3, 1)), np.ones((3, 2, 1)))


@pytest.mark.parametrize("h,w", [(1, 1), (2, 3), (6, 6), (8, 8)])
def test_distill_matches_oracle(rng, h, w):
    s = rng.normal(size=(h, w, int(rng.integers(1, 5))))
    t = rng.normal(size=(h, w, int(rng.integers(1, 5))))
    assert L.pairwise_distill_loss(s, t) == pytest.approx(distill_oracle(s, t), abs=1e-10)


def test_multilevel_distill(rng):
    pairs = [(rng.normal(size=(3, 3, 2)), rng.normal(size=(3, 3, 4))) for _ in range(3)]
    want = 0.5 * L.pairwise_distill_loss(*pairs[0]) + 1.0 * L.pairwise_distill_loss(*pairs[1]) \
        + 2.0 * L.pairwise_distill_loss(*pairs[2])
    assert L.multilevel_distill_loss(pairs, [0.5, 1.0, 2.0]) == pytest.approx(want, abs=1e-14)
