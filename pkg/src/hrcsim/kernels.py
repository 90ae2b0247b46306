"""Kernel backend selection.

Prefers the compiled extension; falls back to the NumPy implementation when
the extension is missing or HRC_PURE_PYTHON=1 is set. Both backends expose
the same functions, so callers import names from here only.
"""

import os

if os.environ.get("HRC_PURE_PYTHON", "") not in ("", "0"):
    from hrcsim import _kernels_py as _impl
else:
    try:
        from hrcsim import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from hrcsim import _kernels_py as _impl

BACKEND: str = _impl.BACKEND
fk_frames = _impl.fk_frames
jacobian_from_frames = _impl.jacobian_from_frames
dist_point_segment = _impl.dist_point_segment
dist_segment_segment = _impl.dist_segment_segment
dist_point_aabb = _impl.dist_point_aabb
dist_segment_aabb = _impl.dist_segment_aabb
arm_world_contacts = _impl.arm_world_contacts
