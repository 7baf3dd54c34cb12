"""Planar layout of the target atoms and the path of the transported control atom.

The control atom sits still at a dwell point (distance ``a`` from the target
being gated) during every gate window and moves along a straight line at
constant speed during each transport gap.  Lengths are in um, times in us.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .pulses import TimingTable

# Le Roy radius for the Cs-Rb pair; dwell distances below it are suspect.
R_LR_CT = 1.9

_SQUARE_CORNERS = ((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0))
# corners 1 -> 3 -> 2 -> 4: diagonal, side, diagonal
DEFAULT_VISIT_ORDER = (1, 3, 2, 4)


@dataclass(frozen=True)
class Geometry:
    """Target positions, dwell points and visiting order.

    ``visit_order[w - 1]`` is the (1-based) target gated in window ``w``, and
    ``dwell_points[j - 1]`` is where the control waits while gating target ``j``.
    """

    target_positions: np.ndarray
    dwell_points: np.ndarray
    visit_order: tuple[int, ...]
    a: float
    d: float

    def __post_init__(self):
        targets = np.array(self.target_positions, dtype=float).reshape(-1, 2)
        dwell = np.array(self.dwell_points, dtype=float).reshape(-1, 2)
        n = len(targets)
        if n < 1 or dwell.shape != targets.shape:
            raise ValueError("need one dwell point per target")
        order = tuple(int(v) for v in self.visit_order)
        if sorted(order) != list(range(1, n + 1)):
            raise ValueError(f"visit_order {order} is not a permutation of 1..{n}")
        if not self.a > 0:
            raise ValueError("dwell distance a must be positive")
        dist = np.linalg.norm(dwell - targets, axis=1)
        if not np.allclose(dist, self.a, rtol=0, atol=1e-9):
            raise ValueError(f"dwell points are not at distance a={self.a} from their targets")
        if n > 1:
            pair = [
                np.linalg.norm(targets[j] - targets[k]) for j in range(n) for k in range(j + 1, n)
            ]
            if abs(min(pair) - self.d) > 1e-9:
                raise ValueError(f"nearest target spacing {min(pair)} != d={self.d}")
        if self.a <= R_LR_CT:
            warnings.warn(
                f"dwell distance a={self.a} um is inside the Le Roy radius {R_LR_CT} um",
                stacklevel=2,
            )
        targets.setflags(write=False)
        dwell.setflags(write=False)
        object.__setattr__(self, "target_positions", targets)
        object.__setattr__(self, "dwell_points", dwell)
        object.__setattr__(self, "visit_order", order)

    @property
    def num_targets(self) -> int:
        return len(self.target_positions)


def build_square_geometry(
    d: float, a: float, visit_order: Sequence[int] | None = None, num_targets: int = 4
) -> Geometry:
    """Targets on the corners (0,0), (d,0), (d,d), (0,d) of a square.

    Each dwell point is displaced by ``a`` from its corner along the inward
    diagonal.  With fewer than four targets the first ``num_targets`` corners
    are used.  The default order visits corners 1, 3, 2, 4, so two of the
    three hops cross the diagonal with length ``d*sqrt(2) - 2a``.
    """
    if not d > 0:
        raise ValueError("d must be positive")
    if not 0 < a < d / 2:
        raise ValueError(f"need 0 < a < d/2, got a={a}, d={d}")
    if not 1 <= num_targets <= 4:
        raise ValueError("square layout holds 1 to 4 targets")
    corners = d * np.array(_SQUARE_CORNERS[:num_targets])
    centre = np.array([d / 2, d / 2])
    inward = (centre - corners) / np.linalg.norm(centre - corners, axis=1)[:, None]
    dwell = corners + a * inward
    if visit_order is None:
        visit_order = (
            DEFAULT_VISIT_ORDER if num_targets == 4 else tuple(range(1, num_targets + 1))
        )
    return Geometry(corners, dwell, tuple(visit_order), a, d)


def diagonal_hop_length(d: float, a: float) -> float:
    """Dwell-to-dwell distance across the square diagonal."""
    return d * math.sqrt(2) - 2 * a


@dataclass(frozen=True)
class Segment:
    t_start: float
    t_end: float
    start: tuple[float, float]
    end: tuple[float, float]

    @property
    def length(self) -> float:
        return math.dist(self.start, self.end)

    @property
    def is_dwell(self) -> bool:
        return self.start == self.end

    def position(self, t: float) -> np.ndarray:
        if self.t_end == self.t_start or self.is_dwell:
            return np.array(self.start)
        s = (t - self.t_start) / (self.t_end - self.t_start)
        return (1 - s) * np.asarray(self.start) + s * np.asarray(self.end)


@dataclass(frozen=True)
class Trajectory:
    segments: tuple[Segment, ...]

    @property
    def span(self) -> tuple[float, float]:
        return self.segments[0].t_start, self.segments[-1].t_end

    def segment_at(self, t: float) -> Segment:
        t0, t1 = self.span
        if not t0 <= t <= t1:
            raise ValueError(f"t={t} outside trajectory span [{t0}, {t1}]")
        for seg in self.segments:
            if t <= seg.t_end:
                return seg
        return self.segments[-1]

    def moving_segments(self) -> list[Segment]:
        return [s for s in self.segments if not s.is_dwell]


def build_trajectory(table: TimingTable, geometry: Geometry) -> Trajectory:
    """Dwell during each gate window, straight constant-speed hop in each gap."""
    segments = []
    for w in range(1, table.num_windows + 1):
        target = window_target(table, geometry, w)
        p = tuple(geometry.dwell_points[target - 1])
        start, end = table.window(w)
        segments.append(Segment(start, end, p, p))
        if w < table.num_windows:
            nxt = tuple(geometry.dwell_points[window_target(table, geometry, w + 1) - 1])
            segments.append(Segment(end, table.window(w + 1)[0], p, nxt))
    return Trajectory(tuple(segments))


def window_target(table: TimingTable, geometry: Geometry, window: int) -> int:
    """1-based index of the target gated in ``window``."""
    if table.n_cycles > 1:
        return geometry.visit_order[0]
    return geometry.visit_order[window - 1]


def control_position(t: float, trajectory: Trajectory) -> np.ndarray:
    return trajectory.segment_at(t).position(t)


def distance_to_target(t: float, j: int, trajectory: Trajectory, geometry: Geometry) -> float:
    """Distance from the control atom to target ``j`` (1-based) at time ``t``."""
    if not 1 <= j <= geometry.num_targets:
        raise ValueError(f"target {j} out of range")
    return float(np.linalg.norm(control_position(t, trajectory) - geometry.target_positions[j - 1]))


def average_speed(segment: Segment) -> float:
    if not segment.t_end > segment.t_start:
        raise ValueError("segment has zero duration")
    return segment.length / (segment.t_end - segment.t_start)
