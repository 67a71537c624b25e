"""Geometry kernel dispatch.

The hot loops (raycasting, swept-footprint collision, boundary tables,
distance fields) exist twice: a numba-compiled version and a vectorized
pure-numpy fallback. Set ``ESCAPESIM_NUMBA=0`` (or ``off``/``false``) to
force the numpy path; anything else tries numba first. The active backend
is reported by :func:`backend_name`.
"""

import os

from . import _kernels_np

_flag = os.environ.get("ESCAPESIM_NUMBA", "auto").strip().lower()

if _flag in ("0", "false", "off", "numpy"):
    _impl = _kernels_np
    _BACKEND = "numpy"
else:
    try:
        from . import _kernels_nb as _impl

        _BACKEND = "numba"
    except ImportError:
        _impl = _kernels_np
        _BACKEND = "numpy"


def backend_name() -> str:
    return _BACKEND


rect_collides = _impl.rect_collides
sweep_first_collision = _impl.sweep_first_collision
raycast = _impl.raycast
cone_far_table = _impl.cone_far_table
scene_distance = _impl.scene_distance
rasterize_cells = _impl.rasterize_cells
poly_pair_distance = _impl.poly_pair_distance
point_poly_nearest = _impl.point_poly_nearest
