"""Plate arithmetic: trailing-aligned broadcasting and collapse-aware reductions.

Arrays carried around the graph keep axes of size 1 wherever every plate
element provably holds the same value.  Reductions over plates therefore have
to scale by the number of represented elements instead of summing explicit
copies; the helpers here centralize that bookkeeping.
"""

from __future__ import annotations

import numpy as np

from .errors import PlateMismatchError

Plates = tuple


def plate_broadcast(a, b):
    """Broadcast two plate shapes, trailing-aligned.

    Axes of size 1 expand; unequal sizes > 1 raise PlateMismatchError.
    """
    try:
        return tuple(np.broadcast_shapes(tuple(a), tuple(b)))
    except ValueError:
        raise PlateMismatchError(f"plates {tuple(a)} and {tuple(b)} are incompatible")


def check_parent_plates(child_plates, parent_plates):
    """Parent plates must broadcast INTO the child's plates.

    Every trailing-aligned parent axis must have size 1 or equal the child's
    size; a parent axis larger than the child's has no meaning (there would be
    several parent elements per child element).
    """
    if plate_broadcast(child_plates, parent_plates) != tuple(child_plates):
        raise PlateMismatchError(
            f"parent plates {tuple(parent_plates)} do not fit into child plates "
            f"{tuple(child_plates)}"
        )


def expansion_factor(arr_shape, plates, event_ndim):
    """Number of plate elements each stored element of ``arr`` represents.

    ``arr`` is broadcastable to ``plates + event``; collapsed plate axes
    (stored size 1, logical size > 1) each contribute their logical size.
    """
    lead = len(arr_shape) - event_ndim
    factor = 1
    for i, size in enumerate(plates):
        j = lead - len(plates) + i
        stored = arr_shape[j] if j >= 0 else 1
        if stored == 1 and size != 1:
            factor *= size
    return factor


def plate_sum(arr, plates, event_ndim=0):
    """Sum ``arr`` over the full logical plate shape.

    Collapsed axes are accounted for by scaling; event axes (the trailing
    ``event_ndim`` axes) are summed as-is.
    """
    arr = np.asarray(arr)
    return arr.sum() * expansion_factor(arr.shape, plates, event_ndim)


def reduce_to_plates(arr, src_plates, dst_plates, event_ndim):
    """Accumulate per-element contributions over ``src_plates`` onto ``dst_plates``.

    ``arr`` is broadcastable to ``src_plates + event``.  Destination axes are
    aligned with the trailing source axes.  A source axis absent from the
    destination (or of size 1 there) is reduced: summed if the array carries
    it, scaled by the source size if the array holds a single representative.
    The result is broadcastable to ``dst_plates + event``.
    """
    arr = np.asarray(arr)
    src = tuple(src_plates)
    dst = tuple(dst_plates)
    # Left-pad the stored shape up to the logical source rank.
    lead = arr.ndim - event_ndim
    if lead < len(src):
        arr = arr.reshape((1,) * (len(src) - lead) + arr.shape)
    scale = 1
    axes_to_sum = []
    for i in range(len(src)):
        dst_i = len(dst) - len(src) + i
        dst_size = dst[dst_i] if dst_i >= 0 else 1
        if dst_size == 1 or dst_i < 0:
            stored = arr.shape[i]
            if stored > 1:
                axes_to_sum.append(i)
            elif src[i] != 1:
                scale *= src[i]
    if axes_to_sum:
        arr = arr.sum(axis=tuple(axes_to_sum), keepdims=True)
    if scale != 1:
        arr = arr * float(scale)
    # Drop leading axes beyond the destination rank (all size 1 by now).
    extra = (arr.ndim - event_ndim) - len(dst)
    if extra > 0:
        arr = arr.reshape(arr.shape[extra:])
    return arr


def expand_to(arr, plates, event_shape):
    """Materialize ``arr`` at the full ``plates + event_shape``."""
    return np.broadcast_to(arr, tuple(plates) + tuple(event_shape)).copy()
