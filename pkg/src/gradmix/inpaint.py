"""Fast-marching inpainting (Telea 2004).

Hole pixels are finalized in order of their arrival time ``T`` from the hole
boundary.  Each finalized pixel takes a weighted average of the known pixels
inside a disk of radius ``radius``; the weight of a contributor ``q`` for the
target ``p`` is the product of

* a direction term ``|(p - q) . N| / |p - q|`` with ``N`` the unit gradient of
  ``T`` at ``p`` (1 when the gradient vanishes),
* a distance term ``1 / |p - q|**2``,
* a level-set term ``1 / (1 + |T(p) - T(q)|)``.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .imageops import bounding_box, round_half_away

__all__ = ["InpaintResult", "inpaint", "inpaint_trace", "pixel_estimate", "StarvedEstimatorError"]

KNOWN = 0
BAND = 1
INSIDE = 2

_DIR_FLOOR = 1e-6


class StarvedEstimatorError(ValueError):
    pass


@njit(cache=True, nogil=True)
def _weighted_sum(image, known, t_field, row, col, grad_r, grad_c, radius):
    height, width = known.shape
    out = np.zeros(3)
    wsum = 0.0
    gnorm = math.sqrt(grad_r * grad_r + grad_c * grad_c)
    t_here = t_field[row, col]
    r2 = radius * radius
    for dr in range(-radius, radius + 1):
        rr = row + dr
        if rr < 0 or rr >= height:
            continue
        for dc in range(-radius, radius + 1):
            cc = col + dc
            if cc < 0 or cc >= width:
                continue
            d2 = dr * dr + dc * dc
            if d2 == 0 or d2 > r2:
                continue
            if not known[rr, cc]:
                continue
            dist = math.sqrt(d2)
            # vector from contributor to target
            if gnorm > 0.0:
                direction = abs((-dr) * grad_r + (-dc) * grad_c) / (dist * gnorm)
                if direction < _DIR_FLOOR:
                    direction = _DIR_FLOOR
            else:
                direction = 1.0
            level = 1.0 / (1.0 + abs(t_here - t_field[rr, cc]))
            w = direction * level / d2
            wsum += w
            for ch in range(3):
                out[ch] += w * image[rr, cc, ch]
    return out, wsum


def pixel_estimate(image, known, target, grad_t, t_field, radius):
    """Weighted average of known pixels within ``radius`` of ``target``.

    ``known`` is a boolean mask, ``grad_t`` the ``(d/drow, d/dcol)`` gradient of
    the arrival time at the target.  Returns unrounded per-channel reals.
    """
    image = np.asarray(image, dtype=np.float64)
    known = np.asarray(known, dtype=np.bool_)
    t_field = np.asarray(t_field, dtype=np.float64)
    total, wsum = _weighted_sum(
        image, known, t_field, int(target[0]), int(target[1]), float(grad_t[0]), float(grad_t[1]), int(radius)
    )
    if wsum <= 0.0:
        raise StarvedEstimatorError(f"starved estimator at {tuple(target)}: no known pixel within radius {radius}")
    return total / wsum


def _solve(t_field, state, row, col):
    """First-order upwind update from finalized 4-neighbours."""
    height, width = state.shape
    a = b = math.inf
    if row > 0 and state[row - 1, col] == KNOWN:
        a = t_field[row - 1, col]
    if row + 1 < height and state[row + 1, col] == KNOWN:
        a = min(a, t_field[row + 1, col])
    if col > 0 and state[row, col - 1] == KNOWN:
        b = t_field[row, col - 1]
    if col + 1 < width and state[row, col + 1] == KNOWN:
        b = min(b, t_field[row, col + 1])
    if math.isinf(a) and math.isinf(b):
        return math.inf
    if math.isinf(a) or math.isinf(b) or abs(a - b) >= 1.0:
        return min(a, b) + 1.0
    return (a + b + math.sqrt(2.0 - (a - b) ** 2)) / 2.0


def _axis_grad(t_field, state, row, col, drow, dcol):
    height, width = state.shape
    pr, pc = row - drow, col - dcol
    nr, nc = row + drow, col + dcol
    prev_ok = 0 <= pr < height and 0 <= pc < width and state[pr, pc] == KNOWN
    next_ok = 0 <= nr < height and 0 <= nc < width and state[nr, nc] == KNOWN
    if prev_ok and next_ok:
        return (t_field[nr, nc] - t_field[pr, pc]) / 2.0
    if prev_ok:
        return t_field[row, col] - t_field[pr, pc]
    if next_ok:
        return t_field[nr, nc] - t_field[row, col]
    return 0.0


def t_gradient(t_field, state, row, col):
    return (
        _axis_grad(t_field, state, row, col, 1, 0),
        _axis_grad(t_field, state, row, col, 0, 1),
    )


@dataclass
class InpaintResult:
    image: np.ndarray
    t_field: np.ndarray
    """Arrival times over the whole frame; 0 outside the hole."""
    order: list
    """``(row, col, T)`` per hole pixel in finalization order."""


def inpaint_trace(image: np.ndarray, hole: np.ndarray, radius: int = 5) -> InpaintResult:
    """Inpaint ``hole`` (an ``(n, 2)`` pixel set) and keep the march trace."""
    if radius < 1:
        raise ValueError("radius must be >= 1")
    height, width = image.shape[:2]
    full_t = np.zeros((height, width))
    if len(hole) == 0:
        return InpaintResult(image.copy(), full_t, [])
    if len(hole) >= height * width:
        raise ValueError("hole covers the whole frame")

    # work on a crop holding the hole plus every pixel the estimator can reach
    top, left, bottom, right = bounding_box(hole)
    top, left = max(top - radius - 1, 0), max(left - radius - 1, 0)
    bottom, right = min(bottom + radius + 1, height - 1), min(right + radius + 1, width - 1)
    crop = image[top : bottom + 1, left : right + 1].astype(np.float64)
    ch, cw = crop.shape[:2]
    local = hole - np.array([top, left])
    state = np.full((ch, cw), KNOWN, dtype=np.int8)
    state[local[:, 0], local[:, 1]] = INSIDE
    if not (state == KNOWN).any():
        raise ValueError("hole covers the whole frame")
    t_field = np.where(state == INSIDE, np.inf, 0.0)

    heap = []
    for r, c in local:
        r, c = int(r), int(c)
        t = _solve(t_field, state, r, c)
        if not math.isinf(t):
            t_field[r, c] = t
            state[r, c] = BAND
            heap.append((t, r, c))
    heapq.heapify(heap)

    order = []
    known = state == KNOWN
    while heap:
        t, r, c = heapq.heappop(heap)
        if state[r, c] == KNOWN or t > t_field[r, c]:
            continue
        state[r, c] = KNOWN
        gr, gc = t_gradient(t_field, state, r, c)
        total, wsum = _weighted_sum(crop, known, t_field, r, c, gr, gc, radius)
        if wsum <= 0.0:
            raise StarvedEstimatorError(f"starved estimator at {(r + top, c + left)}")
        crop[r, c] = np.clip(round_half_away(total / wsum), 0, 255)
        known[r, c] = True
        order.append((r + top, c + left, t))
        for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if 0 <= nr < ch and 0 <= nc < cw and state[nr, nc] != KNOWN:
                nt = _solve(t_field, state, nr, nc)
                if nt < t_field[nr, nc]:
                    t_field[nr, nc] = nt
                    state[nr, nc] = BAND
                    heapq.heappush(heap, (nt, nr, nc))

    if len(order) != len(hole):
        raise RuntimeError("fast march did not reach every hole pixel")
    out = image.copy()
    out[top : bottom + 1, left : right + 1] = crop.astype(np.uint8)
    full_t[top : bottom + 1, left : right + 1] = t_field
    return InpaintResult(out, full_t, order)


def inpaint(image: np.ndarray, hole: np.ndarray, radius: int = 5) -> np.ndarray:
    """Fill ``hole`` from its surroundings; pixels outside the hole are returned unchanged."""
    return inpaint_trace(image, hole, radius).image
