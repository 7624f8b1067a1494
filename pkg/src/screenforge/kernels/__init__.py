"""Box-ops kernels used by the evaluation matcher.

The compiled extension is preferred when it imported cleanly; the pure
module is the fallback and the reference for result equivalence. Set
SCREENFORGE_PURE=1 to force the fallback (used by the benchmark).
"""

import os

from . import _pure

if os.environ.get("SCREENFORGE_PURE") == "1":
    _impl = _pure
else:
    try:
        from . import _native as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _pure

IMPL = _impl.IMPL
box_iou = _impl.box_iou
iou_matrix = _impl.iou_matrix
greedy_match = _impl.greedy_match

__all__ = ["IMPL", "box_iou", "iou_matrix", "greedy_match"]
