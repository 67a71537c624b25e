"""Pure-numpy fallback for the geometry kernels.

Mirrors ``_kernels_nb`` exactly (same functions, same conventions) so the
two backends are interchangeable; used when numba is unavailable or when
``ESCAPESIM_NUMBA=0``.
"""

import numpy as np

_EPS = 1e-12


def _orient(ax, ay, bx, by, px, py):
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax)


def _segs_intersect_arr(a1, a2, b1, b2):
    """Vectorized closed-segment intersection over broadcastable (...,2) arrays."""
    d1 = _orient(b1[..., 0], b1[..., 1], b2[..., 0], b2[..., 1], a1[..., 0], a1[..., 1])
    d2 = _orient(b1[..., 0], b1[..., 1], b2[..., 0], b2[..., 1], a2[..., 0], a2[..., 1])
    d3 = _orient(a1[..., 0], a1[..., 1], a2[..., 0], a2[..., 1], b1[..., 0], b1[..., 1])
    d4 = _orient(a1[..., 0], a1[..., 1], a2[..., 0], a2[..., 1], b2[..., 0], b2[..., 1])
    proper = (((d1 > 0) & (d2 < 0)) | ((d1 < 0) & (d2 > 0))) & (
        ((d3 > 0) & (d4 < 0)) | ((d3 < 0) & (d4 > 0))
    )

    def on_seg(s1, s2, p):
        lox = np.minimum(s1[..., 0], s2[..., 0]) - _EPS
        hix = np.maximum(s1[..., 0], s2[..., 0]) + _EPS
        loy = np.minimum(s1[..., 1], s2[..., 1]) - _EPS
        hiy = np.maximum(s1[..., 1], s2[..., 1]) + _EPS
        return (p[..., 0] >= lox) & (p[..., 0] <= hix) & (p[..., 1] >= loy) & (p[..., 1] <= hiy)

    touch = (
        ((d1 == 0) & on_seg(b1, b2, a1))
        | ((d2 == 0) & on_seg(b1, b2, a2))
        | ((d3 == 0) & on_seg(a1, a2, b1))
        | ((d4 == 0) & on_seg(a1, a2, b2))
    )
    return proper | touch


def _points_in_poly(pts, poly):
    """Boundary-inclusive containment of pts (...,2) in one polygon (N,2)."""
    px = pts[..., 0][..., None]
    py = pts[..., 1][..., None]
    vi = poly
    vj = np.roll(poly, 1, axis=0)
    xi, yi = vi[:, 0], vi[:, 1]
    xj, yj = vj[:, 0], vj[:, 1]
    o = _orient(xj, yj, xi, yi, px, py)
    on_edge = (
        (o == 0)
        & (px >= np.minimum(xj, xi) - _EPS)
        & (px <= np.maximum(xj, xi) + _EPS)
        & (py >= np.minimum(yj, yi) - _EPS)
        & (py <= np.maximum(yj, yi) + _EPS)
    ).any(axis=-1)
    crossing = (yi > py) != (yj > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = xj + (py - yj) * (xi - xj) / (yi - yj)
    hits = crossing & (px < xint)
    inside = (hits.sum(axis=-1) % 2) == 1
    return inside | on_edge


def _poses_to_corners(poses, hl, hw):
    ct = np.cos(poses[:, 2])
    st = np.sin(poses[:, 2])
    cx = poses[:, 0]
    cy = poses[:, 1]
    corners = np.empty((poses.shape[0], 4, 2))
    corners[:, 0, 0] = cx + ct * hl - st * hw
    corners[:, 0, 1] = cy + st * hl + ct * hw
    corners[:, 1, 0] = cx - ct * hl - st * hw
    corners[:, 1, 1] = cy - st * hl + ct * hw
    corners[:, 2, 0] = cx - ct * hl + st * hw
    corners[:, 2, 1] = cy - st * hl - ct * hw
    corners[:, 3, 0] = cx + ct * hl + st * hw
    corners[:, 3, 1] = cy + st * hl - ct * hw
    return corners


def _poses_collide_mask(poses, hl, hw, verts, offsets, arena):
    corners = _poses_to_corners(poses, hl, hw)
    bad = (
        (corners[..., 0] <= arena[0])
        | (corners[..., 0] >= arena[2])
        | (corners[..., 1] <= arena[1])
        | (corners[..., 1] >= arena[3])
    ).any(axis=1)
    rect_a1 = corners
    rect_a2 = np.roll(corners, -1, axis=1)
    ct = np.cos(poses[:, 2])
    st = np.sin(poses[:, 2])
    for p in range(len(offsets) - 1):
        poly = verts[offsets[p] : offsets[p + 1]]
        e1 = np.roll(poly, 1, axis=0)
        # (K, 4, E) edge-pair intersections
        cross = _segs_intersect_arr(
            rect_a1[:, :, None, :],
            rect_a2[:, :, None, :],
            e1[None, None, :, :],
            poly[None, None, :, :],
        ).any(axis=(1, 2))
        corner_in = _points_in_poly(corners[:, 0, :], poly)
        bx = poly[0, 0] - poses[:, 0]
        by = poly[0, 1] - poses[:, 1]
        lx = ct * bx + st * by
        ly = -st * bx + ct * by
        vert_in = (np.abs(lx) <= hl) & (np.abs(ly) <= hw)
        bad |= cross | corner_in | vert_in
    return bad


def rect_collides(cx, cy, theta, hl, hw, verts, offsets, arena):
    poses = np.array([[cx, cy, theta]])
    return bool(_poses_collide_mask(poses, hl, hw, verts, offsets, arena)[0])


def sweep_first_collision(poses, hl, hw, verts, offsets, arena):
    """Index of the first colliding pose in ``poses`` (K,3), or -1."""
    bad = _poses_collide_mask(np.asarray(poses, dtype=float), hl, hw, verts, offsets, arena)
    idx = np.flatnonzero(bad)
    return int(idx[0]) if idx.size else -1


def raycast(ox, oy, angles, segs, max_range):
    """Nearest-hit distances from (ox, oy) along each angle; misses -> max_range."""
    dx = np.cos(angles)[:, None]
    dy = np.sin(angles)[:, None]
    ex = (segs[:, 2] - segs[:, 0])[None, :]
    ey = (segs[:, 3] - segs[:, 1])[None, :]
    wx = (segs[:, 0] - ox)[None, :]
    wy = (segs[:, 1] - oy)[None, :]
    det = ex * dy - ey * dx
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (ex * wy - ey * wx) / det
        u = (dx * wy - dy * wx) / det
    valid = (np.abs(det) >= 1e-15) & (t >= 0.0) & (u >= -_EPS) & (u <= 1.0 + _EPS)
    t = np.where(valid, t, np.inf)
    return np.minimum(t.min(axis=1), max_range)


def _wrap_pi(a):
    a = np.mod(a + np.pi, 2.0 * np.pi)
    a = np.where(a <= 0.0, a + 2.0 * np.pi, a)
    return a - np.pi


def _square_far(dx, dy, hl, hw):
    return 1.0 / np.maximum(np.abs(dx) / hl, np.abs(dy) / hw)


def cone_far_table(corner_sets, ray_angles, half_gap, hl, hw, margin):
    """Per-ray conservative boundary of one action's swept footprint.

    Mirrors the numba kernel: start footprint (row 0) unpadded, swept
    points beyond the start square in their own direction padded by
    ``margin``; each maximized over the +-half_gap cone.
    """
    nray = ray_angles.shape[0]
    edges_ang = np.concatenate([ray_angles - half_gap, ray_angles + half_gap])
    dx = np.cos(edges_ang)[:, None, None]
    dy = np.sin(edges_ang)[:, None, None]
    p2 = corner_sets  # (K,4,2)
    p1 = np.roll(corner_sets, 1, axis=1)
    ex = (p2[..., 0] - p1[..., 0])[None, :, :]
    ey = (p2[..., 1] - p1[..., 1])[None, :, :]
    wx = p1[..., 0][None, :, :]
    wy = p1[..., 1][None, :, :]
    det = ex * dy - ey * dx
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (ex * wy - ey * wx) / det
        u = (dx * wy - dy * wx) / det
    valid = (np.abs(det) >= 1e-15) & (t >= 0.0) & (u >= -_EPS) & (u <= 1.0 + _EPS)
    t = np.where(valid, t, 0.0)  # (2*nray, K, 4)

    start_hits = t[:, 0, :].max(axis=1)
    t0 = _square_far(dx[:, 0, 0], dy[:, 0, 0], hl, hw)
    if corner_sets.shape[0] > 1:
        moved = np.where(t[:, 1:, :] > (t0[:, None, None] + _EPS), t[:, 1:, :], -1.0)
        moved_hits = moved.max(axis=(1, 2))
    else:
        moved_hits = np.full(2 * nray, -1.0)

    def fold(two_ray):
        return np.maximum(two_ray[:nray], two_ray[nray:])

    start_best = fold(start_hits)
    legal_best = fold(moved_hits)

    vr = np.hypot(corner_sets[..., 0], corner_sets[..., 1])  # (K,4)
    va = np.arctan2(corner_sets[..., 1], corner_sets[..., 0])
    ok = vr >= 1e-15
    dd = np.abs(_wrap_pi(va.ravel()[None, :] - ray_angles[:, None]))
    in_cone = (dd <= half_gap + _EPS) & ok.ravel()[None, :]
    start_mask = np.zeros_like(vr, dtype=bool)
    start_mask[0, :] = True
    sv = np.where(in_cone & start_mask.ravel()[None, :], vr.ravel()[None, :], 0.0)
    start_best = np.maximum(start_best, sv.max(axis=1))
    with np.errstate(invalid="ignore"):
        beyond = vr > _square_far(
            corner_sets[..., 0] / np.where(vr < 1e-15, 1.0, vr),
            corner_sets[..., 1] / np.where(vr < 1e-15, 1.0, vr),
            hl,
            hw,
        ) + _EPS
    beyond[0, :] = False
    mv = np.where(in_cone & beyond.ravel()[None, :], vr.ravel()[None, :], -1.0)
    legal_best = np.maximum(legal_best, mv.max(axis=1))

    padded = legal_best + margin
    return np.where((legal_best >= 0.0) & (padded > start_best), padded, start_best)


def _point_seg_dist_arr(px, py, ax, ay, bx, by):
    ex = bx - ax
    ey = by - ay
    ll = ex * ex + ey * ey
    ll = np.where(ll < 1e-30, 1.0, ll)
    t = np.clip(((px - ax) * ex + (py - ay) * ey) / ll, 0.0, 1.0)
    return np.hypot(px - (ax + t * ex), py - (ay + t * ey))


def scene_distance(points, verts, offsets, arena):
    """Distance from each point to the nearest obstacle or arena wall (0 inside)."""
    px = points[:, 0]
    py = points[:, 1]
    d = np.minimum(
        np.minimum(px - arena[0], arena[2] - px),
        np.minimum(py - arena[1], arena[3] - py),
    )
    d = np.maximum(d, 0.0)
    for p in range(len(offsets) - 1):
        poly = verts[offsets[p] : offsets[p + 1]]
        e1 = np.roll(poly, 1, axis=0)
        dd = _point_seg_dist_arr(
            px[:, None], py[:, None], e1[None, :, 0], e1[None, :, 1], poly[None, :, 0], poly[None, :, 1]
        ).min(axis=1)
        dd = np.where(_points_in_poly(points, poly), 0.0, dd)
        d = np.minimum(d, dd)
    return d


def rasterize_cells(verts, offsets, x0, y0, res, nx, ny):
    """Conservative occupancy: any cell whose rectangle touches a polygon."""
    occ = np.zeros((ny, nx), dtype=bool)
    for p in range(len(offsets) - 1):
        poly = verts[offsets[p] : offsets[p + 1]]
        bxmin, bymin = poly.min(axis=0)
        bxmax, bymax = poly.max(axis=0)
        ix0 = max(0, int(np.floor((bxmin - x0) / res - _EPS)))
        ix1 = min(nx - 1, int(np.floor((bxmax - x0) / res + _EPS)))
        iy0 = max(0, int(np.floor((bymin - y0) / res - _EPS)))
        iy1 = min(ny - 1, int(np.floor((bymax - y0) / res + _EPS)))
        if ix1 < ix0 or iy1 < iy0:
            continue
        ixs, iys = np.meshgrid(np.arange(ix0, ix1 + 1), np.arange(iy0, iy1 + 1))
        ixs = ixs.ravel()
        iys = iys.ravel()
        cx0 = x0 + ixs * res
        cy0 = y0 + iys * res
        cx1 = cx0 + res
        cy1 = cy0 + res
        # polygon vertex inside cell
        hit = (
            (poly[None, :, 0] >= cx0[:, None])
            & (poly[None, :, 0] <= cx1[:, None])
            & (poly[None, :, 1] >= cy0[:, None])
            & (poly[None, :, 1] <= cy1[:, None])
        ).any(axis=1)
        # cell corner inside polygon
        hit |= _points_in_poly(np.stack([cx0, cy0], axis=-1), poly)
        # cell edges x polygon edges
        c = np.stack(
            [
                np.stack([cx0, cy0], -1),
                np.stack([cx1, cy0], -1),
                np.stack([cx1, cy1], -1),
                np.stack([cx0, cy1], -1),
            ],
            axis=1,
        )  # (C,4,2)
        c2 = np.roll(c, -1, axis=1)
        e1 = np.roll(poly, 1, axis=0)
        hit |= _segs_intersect_arr(
            c[:, :, None, :], c2[:, :, None, :], e1[None, None, :, :], poly[None, None, :, :]
        ).any(axis=(1, 2))
        occ[iys, ixs] |= hit
    return occ


def poly_pair_distance(pa, pb):
    """Minimum distance between two polygons; 0 when they touch or overlap."""
    a2 = np.roll(pa, -1, axis=0)
    b2 = np.roll(pb, -1, axis=0)
    if _segs_intersect_arr(
        pa[:, None, :], a2[:, None, :], pb[None, :, :], b2[None, :, :]
    ).any():
        return 0.0
    if _points_in_poly(pa[0], pb) or _points_in_poly(pb[0], pa):
        return 0.0
    e1 = np.roll(pb, 1, axis=0)
    d1 = _point_seg_dist_arr(
        pa[:, None, 0], pa[:, None, 1], e1[None, :, 0], e1[None, :, 1], pb[None, :, 0], pb[None, :, 1]
    ).min()
    e1 = np.roll(pa, 1, axis=0)
    d2 = _point_seg_dist_arr(
        pb[:, None, 0], pb[:, None, 1], e1[None, :, 0], e1[None, :, 1], pa[None, :, 0], pa[None, :, 1]
    ).min()
    return float(min(d1, d2))


def point_poly_nearest(px, py, poly):
    """(distance, qx, qy): nearest point of poly to p; inside -> (0, p)."""
    if _points_in_poly(np.array([px, py]), poly):
        return 0.0, px, py
    a = np.roll(poly, 1, axis=0)
    b = poly
    ex = b[:, 0] - a[:, 0]
    ey = b[:, 1] - a[:, 1]
    ll = ex * ex + ey * ey
    ll = np.where(ll < 1e-30, 1.0, ll)
    t = np.clip(((px - a[:, 0]) * ex + (py - a[:, 1]) * ey) / ll, 0.0, 1.0)
    qx = a[:, 0] + t * ex
    qy = a[:, 1] + t * ey
    d = np.hypot(px - qx, py - qy)
    i = int(np.argmin(d))
    return float(d[i]), float(qx[i]), float(qy[i])
