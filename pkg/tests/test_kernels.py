"""Backend equivalence: the numba kernels and the numpy fallbacks must
agree on random scenes (same conventions, same results)."""

import math

import numpy as np
import pytest

from escapesim import _kernels_np

nb = pytest.importorskip("escapesim._kernels_nb")


def _random_scene(rng, npoly=6):
    polys = []
    for _ in range(npoly):
        cx, cy = rng.uniform(0.5, 3.5, 2)
        hu, hn = rng.uniform(0.05, 0.3, 2)
        th = rng.uniform(0, math.pi)
        u = np.array([math.cos(th), math.sin(th)])
        n = np.array([-u[1], u[0]])
        c = np.array([cx, cy])
        polys.append(
            np.array([c + u * hu + n * hn, c - u * hu + n * hn,
                      c - u * hu - n * hn, c + u * hu - n * hn])
        )
    verts = np.concatenate(polys)
    offsets = np.cumsum([0] + [4] * npoly).astype(np.int64)
    arena = np.array([0.0, 0.0, 4.0, 4.0])
    return verts, offsets, arena, polys


def test_rect_collides_equivalence():
    rng = np.random.default_rng(0)
    verts, offsets, arena, _ = _random_scene(rng)
    for _ in range(300):
        x, y, th = rng.uniform(0.2, 3.8), rng.uniform(0.2, 3.8), rng.uniform(-4, 4)
        a = nb.rect_collides(x, y, th, 0.175, 0.175, verts, offsets, arena)
        b = _kernels_np.rect_collides(x, y, th, 0.175, 0.175, verts, offsets, arena)
        assert bool(a) == bool(b)


def test_sweep_first_collision_equivalence():
    rng = np.random.default_rng(1)
    verts, offsets, arena, _ = _random_scene(rng)
    for _ in range(50):
        poses = np.column_stack(
            [
                rng.uniform(0.2, 3.8, 12),
                rng.uniform(0.2, 3.8, 12),
                rng.uniform(-math.pi, math.pi, 12),
            ]
        )
        a = nb.sweep_first_collision(poses, 0.175, 0.175, verts, offsets, arena)
        b = _kernels_np.sweep_first_collision(poses, 0.175, 0.175, verts, offsets, arena)
        assert a == b


def test_raycast_equivalence():
    rng = np.random.default_rng(2)
    verts, offsets, arena, polys = _random_scene(rng)
    segs = []
    for p in polys:
        segs.append(np.concatenate([p, np.roll(p, -1, axis=0)], axis=1))
    segs.append(
        np.array(
            [[0, 0, 4, 0], [4, 0, 4, 4], [4, 4, 0, 4], [0, 4, 0, 0]], dtype=float
        )
    )
    segs = np.concatenate(segs)
    angles = 2 * math.pi * np.arange(500) / 500
    for _ in range(10):
        ox, oy = rng.uniform(0.3, 3.7, 2)
        ang = angles + rng.uniform(0, 1)
        a = nb.raycast(ox, oy, ang, segs, 8.0)
        b = _kernels_np.raycast(ox, oy, ang, segs, 8.0)
        assert np.allclose(a, b, atol=1e-12)


def test_cone_far_table_equivalence():
    rng = np.random.default_rng(3)
    corners = rng.uniform(-0.3, 0.3, size=(9, 4, 2))
    # make each quad convex-ish by sorting by angle around its mean
    for k in range(corners.shape[0]):
        c = corners[k] - corners[k].mean(axis=0)
        order = np.argsort(np.arctan2(c[:, 1], c[:, 0]))
        corners[k] = corners[k][order]
    # row 0 plays the start footprint and must be the origin square
    hl = hw = 0.175
    corners[0] = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
    angles = 2 * math.pi * np.arange(500) / 500
    gap = 2 * math.pi / 500
    a = nb.cone_far_table(corners, angles, gap, hl, hw, 0.008)
    b = _kernels_np.cone_far_table(corners, angles, gap, hl, hw, 0.008)
    assert np.allclose(a, b, atol=1e-12)


def test_scene_distance_equivalence():
    rng = np.random.default_rng(4)
    verts, offsets, arena, _ = _random_scene(rng)
    pts = np.column_stack([rng.uniform(0, 4, 400), rng.uniform(0, 4, 400)])
    a = nb.scene_distance(pts, verts, offsets, arena)
    b = _kernels_np.scene_distance(pts, verts, offsets, arena)
    assert np.allclose(a, b, atol=1e-12)


def test_rasterize_cells_equivalence():
    rng = np.random.default_rng(5)
    verts, offsets, arena, _ = _random_scene(rng)
    a = nb.rasterize_cells(verts, offsets, 0.0, 0.0, 0.05, 80, 80)
    b = _kernels_np.rasterize_cells(verts, offsets, 0.0, 0.0, 0.05, 80, 80)
    assert np.array_equal(np.asarray(a), np.asarray(b))


def test_poly_pair_distance_equivalence():
    rng = np.random.default_rng(6)
    _, _, _, polys = _random_scene(rng, npoly=8)
    for i in range(len(polys)):
        for j in range(len(polys)):
            a = nb.poly_pair_distance(polys[i], polys[j])
            b = _kernels_np.poly_pair_distance(polys[i], polys[j])
            assert a == pytest.approx(b, abs=1e-12)


def test_point_poly_nearest_equivalence():
    rng = np.random.default_rng(7)
    _, _, _, polys = _random_scene(rng)
    for p in polys:
        for _ in range(20):
            x, y = rng.uniform(0, 4, 2)
            da, qxa, qya = nb.point_poly_nearest(x, y, p)
            db, qxb, qyb = _kernels_np.point_poly_nearest(x, y, p)
            assert da == pytest.approx(db, abs=1e-12)
            assert math.hypot(qxa - qxb, qya - qyb) < 1e-9


def test_backend_flag_visible():
    from escapesim import _kernels

    assert _kernels.backend_name() in ("numba", "numpy")
