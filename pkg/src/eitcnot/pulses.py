"""Gate timing and the three laser envelopes.

Each gate window ``w`` (1-based) starts at ``offset_w = (w - 1) * (2 T_r + T_p + T_gap)``
and carries six marks ``mark(j, k) = offset_w + j T_r + k T_p`` (j = 0..2, k = 0..1):

* Rydberg rectangles ``pi/T_r`` on ``[mark(0,0), mark(1,0)]`` and ``[mark(1,1), mark(2,1)]``
* smooth Raman pulse on ``[mark(1,0), mark(1,1)]``
* coupling field ``Omega_c`` over the whole window ``[mark(0,0), mark(2,1)]``

Windows are separated by the transport gap ``T_gap``.  Time is in us and
angular frequencies in rad/us.  The envelope functions accept scalars or
numpy arrays.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TimingTable:
    """Gate windows for either N sequential targets or n repeated cycles on one target."""

    num_targets: int
    n_cycles: int
    t_r: float
    t_p: float
    t_gap: float

    def __post_init__(self):
        for name in ("t_r", "t_p", "t_gap"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.num_targets < 1 or self.n_cycles < 1:
            raise ValueError("num_targets and n_cycles must be >= 1")
        if self.num_targets > 1 and self.n_cycles > 1:
            raise ValueError("multi-target sequencing cannot be combined with repeated cycles")

    @property
    def num_windows(self) -> int:
        return max(self.num_targets, self.n_cycles)

    @property
    def window_length(self) -> float:
        return 2 * self.t_r + self.t_p

    @property
    def period(self) -> float:
        return 2 * self.t_r + self.t_p + self.t_gap

    def offset(self, window: int) -> float:
        self._check_window(window)
        return (window - 1) * self.period

    def mark(self, j: int, k: int, window: int) -> float:
        if j not in (0, 1, 2) or k not in (0, 1):
            raise ValueError(f"invalid mark indices ({j}, {k})")
        return self.offset(window) + j * self.t_r + k * self.t_p

    def window(self, window: int) -> tuple[float, float]:
        return self.mark(0, 0, window), self.mark(2, 1, window)

    def marks(self, window: int) -> tuple[float, float, float, float]:
        """The four distinct switching times of a window in increasing order."""
        return (
            self.mark(0, 0, window),
            self.mark(1, 0, window),
            self.mark(1, 1, window),
            self.mark(2, 1, window),
        )

    @property
    def span(self) -> tuple[float, float]:
        return 0.0, self.mark(2, 1, self.num_windows)

    @property
    def duration(self) -> float:
        return self.span[1]

    def breakpoints(self) -> list[float]:
        return [m for w in range(1, self.num_windows + 1) for m in self.marks(w)]

    def gaps(self) -> list[tuple[float, float]]:
        return [
            (self.window(w)[1], self.window(w + 1)[0]) for w in range(1, self.num_windows)
        ]

    def window_at(self, t: float) -> int | None:
        """Window containing ``t`` (closed interval), or ``None`` inside a gap."""
        if t < 0:
            return None
        w = min(int(t // self.period) + 1, self.num_windows)
        start, end = self.window(w)
        if start <= t <= end:
            return w
        # guard float rounding right at a window end
        if w > 1 and t <= self.window(w - 1)[1]:
            return w - 1
        return None

    def _check_window(self, window: int):
        if not 1 <= window <= self.num_windows:
            raise ValueError(f"window {window} outside 1..{self.num_windows}")


def build_timing(num_targets: int, t_r: float, t_p: float, t_gap: float, n_cycles: int = 1) -> TimingTable:
    return TimingTable(num_targets, n_cycles, t_r, t_p, t_gap)


def raman_peak(t_p: float, delta: float) -> float:
    return math.sqrt(16 * math.pi * delta / (3 * t_p))


def raman_duration_from_peak(omega_peak: float, delta: float) -> float:
    """Raman duration making ``int Omega_p^2 / (2 Delta) dt = pi`` for a sin^2 pulse."""
    if not (omega_peak > 0 and delta > 0):
        raise ValueError("omega_peak and delta must be positive")
    return 16 * math.pi * delta / (3 * omega_peak**2)


def total_duration(num_targets: int, n_cycles: int, t_r: float, t_p: float, t_gap: float) -> float:
    table = TimingTable(num_targets, n_cycles, t_r, t_p, t_gap)
    n = table.num_windows
    return n * (2 * t_r + t_p) + (n - 1) * t_gap


def omega_r(t, window: int, table: TimingTable):
    m00, m10, m11, m21 = table.marks(window)
    t = np.asarray(t, dtype=float)
    on = ((t >= m00) & (t <= m10)) | ((t >= m11) & (t <= m21))
    out = np.where(on, math.pi / table.t_r, 0.0)
    return float(out) if out.ndim == 0 else out


def omega_p(t, window: int, table: TimingTable, delta: float):
    if not delta > 0:
        raise ValueError("delta must be positive")
    _, m10, m11, _ = table.marks(window)
    t = np.asarray(t, dtype=float)
    tbar = t - m10
    on = (t >= m10) & (t <= m11)
    out = np.where(on, raman_peak(table.t_p, delta) * np.sin(np.pi * tbar / table.t_p) ** 2, 0.0)
    return float(out) if out.ndim == 0 else out


def omega_c(t, window: int, table: TimingTable, omega_c_amp: float):
    if omega_c_amp < 0:
        raise ValueError("coupling amplitude must be non-negative")
    m00, _, _, m21 = table.marks(window)
    t = np.asarray(t, dtype=float)
    out = np.where((t >= m00) & (t <= m21), float(omega_c_amp), 0.0)
    return float(out) if out.ndim == 0 else out


def next_breakpoint(table: TimingTable, t: float) -> float | None:
    """First switching time strictly after ``t``."""
    bps = table.breakpoints()
    i = bisect_right(bps, t)
    return bps[i] if i < len(bps) else None
