"""Independent reference implementations used by the tests.

Nothing here imports the package's own geometry or decision code.
"""

from __future__ import annotations

import math


def rect_corners(center, half_extents, orientation):
    cx, cy = center
    hx, hy = half_extents
    c, s = math.cos(orientation), math.sin(orientation)
    return [(cx + c * x - s * y, cy + s * x + c * y)
            for x, y in ((-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy))]


def _orient(a, b, c):
    v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    return (v > 0) - (v < 0)


def _on_segment(a, b, p):
    return (min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= p[1] <= max(a[1], b[1]))


def segments_intersect(p1, p2, q1, q2) -> bool:
    d1, d2 = _orient(q1, q2, p1), _orient(q1, q2, p2)
    d3, d4 = _orient(p1, p2, q1), _orient(p1, p2, q2)
    if d1 * d2 < 0 and d3 * d4 < 0:
        return True
    return ((d1 == 0 and _on_segment(q1, q2, p1)) or (d2 == 0 and _on_segment(q1, q2, p2))
            or (d3 == 0 and _on_segment(p1, p2, q1)) or (d4 == 0 and _on_segment(p1, p2, q2)))


def point_in_rect(p, center, half_extents, orientation) -> bool:
    c, s = math.cos(orientation), math.sin(orientation)
    dx, dy = p[0] - center[0], p[1] - center[1]
    lx, ly = c * dx + s * dy, -s * dx + c * dy
    return abs(lx) <= half_extents[0] and abs(ly) <= half_extents[1]


def los_oracle(tx, rx, rects) -> bool:
    """LOS iff the segment crosses no rect edge and neither endpoint lies inside a rect."""
    tx = (float(tx[0]), float(tx[1]))
    rx = (float(rx[0]), float(rx[1]))
    for center, half, theta in rects:
        if point_in_rect(tx, center, half, theta) or point_in_rect(rx, center, half, theta):
            return False
        corners = rect_corners(center, half, theta)
        for k in range(4):
            if segments_intersect(tx, rx, corners[k], corners[(k + 1) % 4]):
                return False
    return True


def decision_oracle(s, i, st, it, th, ttt_ok, hysteresis=3.0, forward_on_switch=True):
    """Truth table of the dual-connection rule on bare numbers.

    ``st``/``it`` are target SINRs or None. Returns a tuple describing the
    action. Outage handling is exercised separately.
    """
    if s <= th and i <= th:
        if not ttt_ok:
            return ("none",)
        st_v = -math.inf if st is None else st
        it_v = -math.inf if it is None else it
        if st_v <= it_v:
            if it is not None and it > th:
                return ("handover", "idle")
            return ("none",)
        if st > th:
            return ("handover", "serving")
        return ("none",)
    if s <= th < i:
        return ("switch", True)
    if s > th and i > th and i > s + hysteresis:
        return ("switch", forward_on_switch)
    return ("none",)
