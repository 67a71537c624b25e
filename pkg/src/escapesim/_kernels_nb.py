"""Numba-compiled geometry kernels (hot inner loops).

Same signatures as ``_kernels_np``; selected at import time by ``_kernels``.
All polygons are flattened into a vertex array plus per-polygon offsets so
the kernels stay allocation-free inside the loops.
"""

import numpy as np
from numba import njit, prange

_EPS = 1e-12


@njit(cache=True, inline="always")
def _orient(ax, ay, bx, by, px, py):
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax)


@njit(cache=True, inline="always")
def _on_seg(ax, ay, bx, by, px, py):
    # collinearity established by caller; bbox containment with slack
    return (
        min(ax, bx) - _EPS <= px <= max(ax, bx) + _EPS
        and min(ay, by) - _EPS <= py <= max(ay, by) + _EPS
    )


@njit(cache=True)
def _segs_intersect(p1x, p1y, p2x, p2y, p3x, p3y, p4x, p4y):
    # closed-segment intersection: touching and collinear overlap count
    d1 = _orient(p3x, p3y, p4x, p4y, p1x, p1y)
    d2 = _orient(p3x, p3y, p4x, p4y, p2x, p2y)
    d3 = _orient(p1x, p1y, p2x, p2y, p3x, p3y)
    d4 = _orient(p1x, p1y, p2x, p2y, p4x, p4y)
    if ((d1 > 0.0 and d2 < 0.0) or (d1 < 0.0 and d2 > 0.0)) and (
        (d3 > 0.0 and d4 < 0.0) or (d3 < 0.0 and d4 > 0.0)
    ):
        return True
    if d1 == 0.0 and _on_seg(p3x, p3y, p4x, p4y, p1x, p1y):
        return True
    if d2 == 0.0 and _on_seg(p3x, p3y, p4x, p4y, p2x, p2y):
        return True
    if d3 == 0.0 and _on_seg(p1x, p1y, p2x, p2y, p3x, p3y):
        return True
    if d4 == 0.0 and _on_seg(p1x, p1y, p2x, p2y, p4x, p4y):
        return True
    return False


@njit(cache=True)
def _point_in_poly(px, py, verts, lo, hi):
    # boundary-inclusive crossing test on verts[lo:hi]
    inside = False
    j = hi - 1
    for i in range(lo, hi):
        xi = verts[i, 0]
        yi = verts[i, 1]
        xj = verts[j, 0]
        yj = verts[j, 1]
        o = _orient(xj, yj, xi, yi, px, py)
        if o == 0.0 and _on_seg(xj, yj, xi, yi, px, py):
            return True
        if (yi > py) != (yj > py):
            xint = xj + (py - yj) * (xi - xj) / (yi - yj)
            if px < xint:
                inside = not inside
        j = i
    return inside


@njit(cache=True)
def _rect_corners(cx, cy, ct, st, hl, hw, out):
    # CCW corners of an oriented rectangle, body x = heading
    out[0, 0] = cx + ct * hl - st * hw
    out[0, 1] = cy + st * hl + ct * hw
    out[1, 0] = cx - ct * hl - st * hw
    out[1, 1] = cy - st * hl + ct * hw
    out[2, 0] = cx - ct * hl + st * hw
    out[2, 1] = cy - st * hl - ct * hw
    out[3, 0] = cx + ct * hl + st * hw
    out[3, 1] = cy + st * hl - ct * hw


@njit(cache=True)
def _rect_hits_scene(cx, cy, ct, st, hl, hw, verts, offsets, arena):
    corners = np.empty((4, 2), dtype=np.float64)
    _rect_corners(cx, cy, ct, st, hl, hw, corners)
    for c in range(4):
        if (
            corners[c, 0] <= arena[0]
            or corners[c, 0] >= arena[2]
            or corners[c, 1] <= arena[1]
            or corners[c, 1] >= arena[3]
        ):
            return True
    npoly = offsets.shape[0] - 1
    for p in range(npoly):
        lo = offsets[p]
        hi = offsets[p + 1]
        # any edge pair crossing (touch counts)
        for c in range(4):
            c2 = (c + 1) % 4
            j = hi - 1
            for i in range(lo, hi):
                if _segs_intersect(
                    corners[c, 0],
                    corners[c, 1],
                    corners[c2, 0],
                    corners[c2, 1],
                    verts[j, 0],
                    verts[j, 1],
                    verts[i, 0],
                    verts[i, 1],
                ):
                    return True
                j = i
        # containment either way (no edges crossed, so one test point suffices)
        if _point_in_poly(corners[0, 0], corners[0, 1], verts, lo, hi):
            return True
        bx = verts[lo, 0] - cx
        by = verts[lo, 1] - cy
        lx = ct * bx + st * by
        ly = -st * bx + ct * by
        if -hl <= lx <= hl and -hw <= ly <= hw:
            return True
    return False


@njit(cache=True)
def rect_collides(cx, cy, theta, hl, hw, verts, offsets, arena):
    return _rect_hits_scene(
        cx, cy, np.cos(theta), np.sin(theta), hl, hw, verts, offsets, arena
    )


@njit(cache=True)
def sweep_first_collision(poses, hl, hw, verts, offsets, arena):
    """Index of the first colliding pose in ``poses`` (K,3), or -1."""
    for k in range(poses.shape[0]):
        if _rect_hits_scene(
            poses[k, 0],
            poses[k, 1],
            np.cos(poses[k, 2]),
            np.sin(poses[k, 2]),
            hl,
            hw,
            verts,
            offsets,
            arena,
        ):
            return k
    return -1


@njit(cache=True)
def raycast(ox, oy, angles, segs, max_range):
    """Nearest-hit distances from (ox, oy) along each angle; misses -> max_range."""
    n = angles.shape[0]
    out = np.empty(n, dtype=np.float64)
    for j in range(n):
        dx = np.cos(angles[j])
        dy = np.sin(angles[j])
        best = max_range
        for s in range(segs.shape[0]):
            ex = segs[s, 2] - segs[s, 0]
            ey = segs[s, 3] - segs[s, 1]
            det = ex * dy - ey * dx
            if abs(det) < 1e-15:
                continue
            wx = segs[s, 0] - ox
            wy = segs[s, 1] - oy
            t = (ex * wy - ey * wx) / det
            u = (dx * wy - dy * wx) / det
            if t >= 0.0 and -_EPS <= u <= 1.0 + _EPS and t < best:
                best = t
        out[j] = best
    return out


@njit(cache=True, inline="always")
def _wrap_pi(a):
    a = (a + np.pi) % (2.0 * np.pi)
    if a <= 0.0:
        a += 2.0 * np.pi
    return a - np.pi


@njit(cache=True)
def _ray_poly_far(dx, dy, poly):
    # farthest intersection parameter of ray (origin, dir) with convex poly; -1 if none
    best = -1.0
    n = poly.shape[0]
    j = n - 1
    for i in range(n):
        ex = poly[i, 0] - poly[j, 0]
        ey = poly[i, 1] - poly[j, 1]
        det = ex * dy - ey * dx
        if abs(det) >= 1e-15:
            wx = poly[j, 0]
            wy = poly[j, 1]
            t = (ex * wy - ey * wx) / det
            u = (dx * wy - dy * wx) / det
            if t >= 0.0 and -_EPS <= u <= 1.0 + _EPS and t > best:
                best = t
        j = i
    return best


@njit(cache=True, inline="always")
def _square_far(dx, dy, hl, hw):
    # farthest boundary of the origin-centered hl x hw rectangle along (dx, dy)
    a = abs(dx) / hl
    b = abs(dy) / hw
    m = a if a > b else b
    return 1.0 / m


@njit(cache=True)
def cone_far_table(corner_sets, ray_angles, half_gap, hl, hw, margin):
    """Per-ray conservative boundary of one action's swept footprint.

    corner_sets: (K, 4, 2) footprint corners along the sweep in the
    start-pose body frame; row 0 is the start footprint itself. For each
    ray the boundary maximizes over directions within +-half_gap (cone
    edge hits plus in-cone vertex radii, exact for convex quads).

    The start footprint contributes unpadded: the pose is already known
    collision-free, so obstacles can only sit strictly outside it. Swept
    points that reach beyond the start square in their own direction get
    ``margin`` added, covering obstacle surfaces that dip between two rays
    and the sweep's sample spacing.
    """
    nray = ray_angles.shape[0]
    out = np.zeros(nray, dtype=np.float64)
    nk = corner_sets.shape[0]
    for j in range(nray):
        phi = ray_angles[j]
        start_best = 0.0
        legal_best = -1.0
        for edge in range(2):
            ang = phi - half_gap if edge == 0 else phi + half_gap
            dx = np.cos(ang)
            dy = np.sin(ang)
            t0 = _square_far(dx, dy, hl, hw)
            t = _ray_poly_far(dx, dy, corner_sets[0])
            if t > start_best:
                start_best = t
            for k in range(1, nk):
                t = _ray_poly_far(dx, dy, corner_sets[k])
                if t > t0 + _EPS and t > legal_best:
                    legal_best = t
        for k in range(nk):
            for v in range(4):
                vx = corner_sets[k, v, 0]
                vy = corner_sets[k, v, 1]
                r = np.hypot(vx, vy)
                if r < 1e-15:
                    continue
                dd = _wrap_pi(np.arctan2(vy, vx) - phi)
                if not (-half_gap - _EPS <= dd <= half_gap + _EPS):
                    continue
                if k == 0:
                    if r > start_best:
                        start_best = r
                else:
                    dirx = vx / r
                    diry = vy / r
                    if r > _square_far(dirx, diry, hl, hw) + _EPS and r > legal_best:
                        legal_best = r
        if legal_best >= 0.0 and legal_best + margin > start_best:
            out[j] = legal_best + margin
        else:
            out[j] = start_best
    return out


@njit(cache=True, inline="always")
def _point_seg_dist(px, py, ax, ay, bx, by):
    ex = bx - ax
    ey = by - ay
    ll = ex * ex + ey * ey
    if ll < 1e-30:
        return np.hypot(px - ax, py - ay)
    t = ((px - ax) * ex + (py - ay) * ey) / ll
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    return np.hypot(px - (ax + t * ex), py - (ay + t * ey))


@njit(cache=True, parallel=True)
def scene_distance(points, verts, offsets, arena):
    """Distance from each point to the nearest obstacle or arena wall (0 inside)."""
    n = points.shape[0]
    out = np.empty(n, dtype=np.float64)
    npoly = offsets.shape[0] - 1
    for i in prange(n):
        px = points[i, 0]
        py = points[i, 1]
        d = min(
            min(px - arena[0], arena[2] - px),
            min(py - arena[1], arena[3] - py),
        )
        if d < 0.0:
            d = 0.0
        for p in range(npoly):
            lo = offsets[p]
            hi = offsets[p + 1]
            if _point_in_poly(px, py, verts, lo, hi):
                d = 0.0
                break
            j = hi - 1
            for k in range(lo, hi):
                dd = _point_seg_dist(
                    px, py, verts[j, 0], verts[j, 1], verts[k, 0], verts[k, 1]
                )
                if dd < d:
                    d = dd
                j = k
        out[i] = d
    return out


@njit(cache=True)
def rasterize_cells(verts, offsets, x0, y0, res, nx, ny):
    """Conservative occupancy: any cell whose rectangle touches a polygon."""
    occ = np.zeros((ny, nx), dtype=np.bool_)
    npoly = offsets.shape[0] - 1
    for p in range(npoly):
        lo = offsets[p]
        hi = offsets[p + 1]
        bxmin = verts[lo, 0]
        bxmax = verts[lo, 0]
        bymin = verts[lo, 1]
        bymax = verts[lo, 1]
        for k in range(lo + 1, hi):
            bxmin = min(bxmin, verts[k, 0])
            bxmax = max(bxmax, verts[k, 0])
            bymin = min(bymin, verts[k, 1])
            bymax = max(bymax, verts[k, 1])
        ix0 = max(0, int(np.floor((bxmin - x0) / res - _EPS)))
        ix1 = min(nx - 1, int(np.floor((bxmax - x0) / res + _EPS)))
        iy0 = max(0, int(np.floor((bymin - y0) / res - _EPS)))
        iy1 = min(ny - 1, int(np.floor((bymax - y0) / res + _EPS)))
        for iy in range(iy0, iy1 + 1):
            cy0 = y0 + iy * res
            cy1 = cy0 + res
            for ix in range(ix0, ix1 + 1):
                if occ[iy, ix]:
                    continue
                cx0 = x0 + ix * res
                cx1 = cx0 + res
                if _cell_overlaps_poly(cx0, cy0, cx1, cy1, verts, lo, hi):
                    occ[iy, ix] = True
    return occ


@njit(cache=True)
def _cell_overlaps_poly(cx0, cy0, cx1, cy1, verts, lo, hi):
    # vertex of poly inside cell (touch counts)
    for k in range(lo, hi):
        if cx0 <= verts[k, 0] <= cx1 and cy0 <= verts[k, 1] <= cy1:
            return True
    # cell corner inside poly
    if _point_in_poly(cx0, cy0, verts, lo, hi):
        return True
    # edge crossings
    j = hi - 1
    for k in range(lo, hi):
        ax = verts[j, 0]
        ay = verts[j, 1]
        bx = verts[k, 0]
        by = verts[k, 1]
        if (
            _segs_intersect(cx0, cy0, cx1, cy0, ax, ay, bx, by)
            or _segs_intersect(cx1, cy0, cx1, cy1, ax, ay, bx, by)
            or _segs_intersect(cx1, cy1, cx0, cy1, ax, ay, bx, by)
            or _segs_intersect(cx0, cy1, cx0, cy0, ax, ay, bx, by)
        ):
            return True
        j = k
    return False


@njit(cache=True)
def poly_pair_distance(pa, pb):
    """Minimum distance between two polygons; 0 when they touch or overlap."""
    na = pa.shape[0]
    nb = pb.shape[0]
    j = na - 1
    for i in range(na):
        k = nb - 1
        for m in range(nb):
            if _segs_intersect(
                pa[j, 0], pa[j, 1], pa[i, 0], pa[i, 1],
                pb[k, 0], pb[k, 1], pb[m, 0], pb[m, 1],
            ):
                return 0.0
            k = m
        j = i
    if _point_in_poly(pa[0, 0], pa[0, 1], pb, 0, nb):
        return 0.0
    if _point_in_poly(pb[0, 0], pb[0, 1], pa, 0, na):
        return 0.0
    best = 1e300
    for i in range(na):
        k = nb - 1
        for m in range(nb):
            d = _point_seg_dist(
                pa[i, 0], pa[i, 1], pb[k, 0], pb[k, 1], pb[m, 0], pb[m, 1]
            )
            if d < best:
                best = d
            k = m
    for i in range(nb):
        k = na - 1
        for m in range(na):
            d = _point_seg_dist(
                pb[i, 0], pb[i, 1], pa[k, 0], pa[k, 1], pa[m, 0], pa[m, 1]
            )
            if d < best:
                best = d
            k = m
    return best


@njit(cache=True)
def point_poly_nearest(px, py, poly):
    """(distance, qx, qy): nearest point of poly to p; inside -> (0, p)."""
    n = poly.shape[0]
    if _point_in_poly(px, py, poly, 0, n):
        return 0.0, px, py
    best = 1e300
    qx = poly[0, 0]
    qy = poly[0, 1]
    j = n - 1
    for i in range(n):
        ax = poly[j, 0]
        ay = poly[j, 1]
        bx = poly[i, 0]
        by = poly[i, 1]
        ex = bx - ax
        ey = by - ay
        ll = ex * ex + ey * ey
        if ll < 1e-30:
            t = 0.0
        else:
            t = ((px - ax) * ex + (py - ay) * ey) / ll
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
        cx = ax + t * ex
        cy = ay + t * ey
        d = np.hypot(px - cx, py - cy)
        if d < best:
            best = d
            qx = cx
            qy = cy
        j = i
    return best, qx, qy
