"""Time-dependent non-Hermitian Hamiltonian of the control/target array.

With hbar = 1 and rotating-wave couplings,

    H(t) = H_C + sum_j H_Tj + sum_j V_CTj(t) |r><r| (x) |R><R|_j
           + sum_{j<k} V_TjTk |R><R|_j (x) |R><R|_k

    H_C  = 1/2 [Omega_r(t) (|1><r| + h.c.) - i gamma_r |r><r|]
    H_Tj = 1/2 [Omega_p(t) (|A><P| + |B><P| + h.c.) + Omega_c(t) (|P><R| + h.c.)
                - (2 Delta + i gamma_p) |P><P|]

with V_CT = C3 / R^3 (R follows the transported control atom) and
V_TT = C6 / R^6 between static targets.  Units: us, um, rad/us.

Two routes evaluate H: :meth:`GateModel.assemble_dense` builds the explicit
matrix from Kronecker products (test oracle), :meth:`GateModel.apply_h`
acts term by term on a reshaped state without building it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from . import pulses
from .hilbert import LevelScheme
from .pulses import TimingTable
from .transport import Geometry, Trajectory, build_trajectory, control_position, window_target

TWO_PI = 2 * math.pi


def mhz(f: float) -> float:
    """Convert a frequency in MHz (cycles) to rad/us."""
    return TWO_PI * f


@dataclass(frozen=True)
class PhysicalParams:
    omega_p_peak: float = mhz(70.0)
    omega_c: float = 2.5 * mhz(70.0)
    delta: float = mhz(1200.0)
    gamma_r: float = 1 / 548.0
    gamma_p: float = 1 / 0.0264
    c3: float = mhz(14.25e3)
    c6: float = mhz(2036e3)
    r_lr_ct: float = 1.9
    r_lr_tt: float = 1.8
    r_vdw: float = 31.0
    # pair model is refused below this separation
    min_distance: float = 0.5

    def __post_init__(self):
        for name in ("omega_p_peak", "delta", "c3", "c6", "r_lr_ct", "r_lr_tt", "r_vdw", "min_distance"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        # zero rates/couplings are allowed for closed-system and diagnostic runs
        for name in ("omega_c", "gamma_r", "gamma_p"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)!r}")

    @property
    def t_p(self) -> float:
        return pulses.raman_duration_from_peak(self.omega_p_peak, self.delta)

    def without_decay(self) -> PhysicalParams:
        return replace(self, gamma_r=0.0, gamma_p=0.0)


@dataclass(frozen=True)
class Piece:
    """Part of a gate window with fixed Rydberg and coupling amplitudes."""

    window: int
    target: int
    t_start: float
    t_end: float
    omega_r: float
    omega_c: float
    raman: bool


def _embed(op: np.ndarray, site: int, dims: tuple[int, ...]) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for k, d in enumerate(dims):
        out = np.kron(out, op if k == site else np.eye(d))
    return out


@dataclass(frozen=True)
class GateModel:
    params: PhysicalParams
    geometry: Geometry
    table: TimingTable
    trajectory: Trajectory = field(repr=False)
    # False switches all three laser channels off
    drives: bool = True

    def __post_init__(self):
        if self.table.num_targets != self.geometry.num_targets:
            raise ValueError(
                f"timing has {self.table.num_targets} targets, geometry {self.geometry.num_targets}"
            )

    @cached_property
    def scheme(self) -> LevelScheme:
        return LevelScheme(self.geometry.num_targets)

    @property
    def num_targets(self) -> int:
        return self.geometry.num_targets

    # -- envelopes --------------------------------------------------------

    def windows_of_target(self, j: int) -> list[int]:
        return [
            w for w in range(1, self.table.num_windows + 1)
            if window_target(self.table, self.geometry, w) == j
        ]

    def envelopes(self, t: float) -> tuple[float, float, float, int | None]:
        """(Omega_r, Omega_p, Omega_c, target) at ``t``; target is None in gaps."""
        w = self.table.window_at(t)
        if w is None or not self.drives:
            return 0.0, 0.0, 0.0, None
        p = self.params
        return (
            pulses.omega_r(t, w, self.table),
            pulses.omega_p(t, w, self.table, p.delta),
            pulses.omega_c(t, w, self.table, p.omega_c),
            window_target(self.table, self.geometry, w),
        )

    @cached_property
    def pieces(self) -> tuple[Piece, ...]:
        out = []
        om_r = math.pi / self.table.t_r if self.drives else 0.0
        om_c = self.params.omega_c if self.drives else 0.0
        for w in range(1, self.table.num_windows + 1):
            j = window_target(self.table, self.geometry, w)
            m00, m10, m11, m21 = self.table.marks(w)
            out.append(Piece(w, j, m00, m10, om_r, om_c, False))
            out.append(Piece(w, j, m10, m11, 0.0, om_c, self.drives))
            out.append(Piece(w, j, m11, m21, om_r, om_c, False))
        return tuple(out)

    def raman_amplitude(self, t: float, piece: Piece) -> float:
        if not piece.raman:
            return 0.0
        tbar = t - piece.t_start
        return pulses.raman_peak(self.table.t_p, self.params.delta) * math.sin(math.pi * tbar / self.table.t_p) ** 2

    # -- diagonal terms ---------------------------------------------------

    @cached_property
    def _digits(self) -> np.ndarray:
        return np.array(np.unravel_index(np.arange(self.scheme.dim), self.scheme.dims)).T

    @cached_property
    def rydberg_pair_masks(self) -> np.ndarray:
        """Row j-1: basis states with the control in |r> and target j in |R>."""
        dig = self._digits
        return np.array([(dig[:, 0] == 2) & (dig[:, j] == 3) for j in range(1, self.num_targets + 1)], dtype=float)

    @cached_property
    def static_diagonal(self) -> np.ndarray:
        """Decay, detuning and target-target terms (time independent)."""
        p = self.params
        dig = self._digits
        diag = np.zeros(self.scheme.dim, dtype=complex)
        diag += np.where(dig[:, 0] == 2, -0.5j * p.gamma_r, 0.0)
        for j in range(1, self.num_targets + 1):
            diag += np.where(dig[:, j] == 2, -p.delta - 0.5j * p.gamma_p, 0.0)
        diag += self.target_pair_diagonal
        return diag

    @cached_property
    def target_pair_diagonal(self) -> np.ndarray:
        dig = self._digits
        pos = self.geometry.target_positions
        diag = np.zeros(self.scheme.dim)
        for j in range(self.num_targets):
            for k in range(j + 1, self.num_targets):
                r = float(np.linalg.norm(pos[j] - pos[k]))
                diag += self.v_tt(r) * ((dig[:, j + 1] == 3) & (dig[:, k + 1] == 3))
        return diag

    def v_ct(self, r: float) -> float:
        if r < self.params.min_distance:
            raise ValueError(
                f"control-target distance {r:.3g} um is below the {self.params.min_distance} um floor"
            )
        return self.params.c3 / r**3

    def v_tt(self, r: float) -> float:
        if r < self.params.min_distance:
            raise ValueError(
                f"target-target distance {r:.3g} um is below the {self.params.min_distance} um floor"
            )
        return self.params.c6 / r**6

    def control_target_distances(self, t: float) -> np.ndarray:
        pos = control_position(t, self.trajectory)
        return np.linalg.norm(self.geometry.target_positions - pos, axis=1)

    def control_target_couplings(self, t: float) -> np.ndarray:
        return np.array([self.v_ct(r) for r in self.control_target_distances(t)])

    def interaction_diagonal(self, t: float) -> np.ndarray:
        return self.control_target_couplings(t) @ self.rydberg_pair_masks + self.target_pair_diagonal

    def diagonal(self, t: float) -> np.ndarray:
        return self.static_diagonal + self.control_target_couplings(t) @ self.rydberg_pair_masks

    def window_diagonal(self, window: int) -> np.ndarray:
        return self._window_diagonals[window - 1]

    @cached_property
    def _window_diagonals(self) -> list[np.ndarray]:
        # the control dwells during a window, so its couplings are constant there
        return [self.diagonal(self.table.window(w)[0]) for w in range(1, self.table.num_windows + 1)]

    # -- dense operators --------------------------------------------------

    @cached_property
    def _blocks(self) -> dict:
        """Embedded single- and two-site operators, built once."""
        dims = self.scheme.dims
        x_c = np.zeros((3, 3)); x_c[1, 2] = x_c[2, 1] = 1
        r_c = np.zeros((3, 3)); r_c[2, 2] = 1
        ab_p = np.zeros((4, 4)); ab_p[0, 2] = ab_p[2, 0] = ab_p[1, 2] = ab_p[2, 1] = 1
        p_r = np.zeros((4, 4)); p_r[2, 3] = p_r[3, 2] = 1
        p_t = np.zeros((4, 4)); p_t[2, 2] = 1
        r_t = np.zeros((4, 4)); r_t[3, 3] = 1
        sites = range(1, self.num_targets + 1)
        blocks = {
            "x_c": _embed(x_c, 0, dims),
            "r_c": _embed(r_c, 0, dims),
            "ab_p": {j: _embed(ab_p, j, dims) for j in sites},
            "p_r": {j: _embed(p_r, j, dims) for j in sites},
            "p_t": {j: _embed(p_t, j, dims) for j in sites},
            "r_t": {j: _embed(r_t, j, dims) for j in sites},
        }
        blocks["ct"] = {j: blocks["r_c"] @ blocks["r_t"][j] for j in sites}
        pos = self.geometry.target_positions
        tt = np.zeros((self.scheme.dim, self.scheme.dim), dtype=complex)
        for j in sites:
            for k in range(j + 1, self.num_targets + 1):
                vtt = self.v_tt(float(np.linalg.norm(pos[j - 1] - pos[k - 1])))
                tt += vtt * (blocks["r_t"][j] @ blocks["r_t"][k])
        blocks["tt"] = tt
        return blocks

    def h_control(self, t: float) -> np.ndarray:
        om_r, _, _, _ = self.envelopes(t)
        b = self._blocks
        return 0.5 * om_r * b["x_c"] - 0.5j * self.params.gamma_r * b["r_c"]

    def h_target(self, t: float, j: int) -> np.ndarray:
        if not 1 <= j <= self.num_targets:
            raise ValueError(f"target {j} out of range")
        _, om_p, om_c, active = self.envelopes(t)
        if active != j:
            om_p = om_c = 0.0
        p = self.params
        b = self._blocks
        return (
            0.5 * om_p * b["ab_p"][j]
            + 0.5 * om_c * b["p_r"][j]
            - 0.5 * (2 * p.delta + 1j * p.gamma_p) * b["p_t"][j]
        )

    def h_interaction(self, t: float) -> np.ndarray:
        b = self._blocks
        h = b["tt"].copy()
        for j, v in enumerate(self.control_target_couplings(t), start=1):
            h += v * b["ct"][j]
        return h

    def assemble_dense(self, t: float) -> np.ndarray:
        h = self.h_control(t) + self.h_interaction(t)
        for j in range(1, self.num_targets + 1):
            h += self.h_target(t, j)
        return h

    # -- matrix-free action -----------------------------------------------

    def apply_h(self, t: float, psi) -> np.ndarray:
        """H(t) @ psi without building H."""
        amps = getattr(psi, "amplitudes", psi)
        amps = np.asarray(amps, dtype=complex)
        om_r, om_p, om_c, target = self.envelopes(t)
        if target is None:
            return self.diagonal(t) * amps
        w = self.table.window_at(t)
        return apply_local(amps, self.window_diagonal(w), 0.5 * om_r, 0.5 * om_p, 0.5 * om_c, target, self.num_targets)


def apply_local(
    psi: np.ndarray,
    diag: np.ndarray,
    cr: float,
    cp: float,
    cc: float,
    target: int,
    num_targets: int,
) -> np.ndarray:
    """Diagonal part plus the control and one target's couplings.

    ``cr``, ``cp``, ``cc`` are the half Rabi frequencies (matrix elements).
    """
    out = diag * psi
    if cr:
        c_in = psi.reshape(3, -1)
        c_out = out.reshape(3, -1)
        c_out[1] += cr * c_in[2]
        c_out[2] += cr * c_in[1]
    if cp or cc:
        shape = (3 * 4 ** (target - 1), 4, 4 ** (num_targets - target))
        t_in = psi.reshape(shape)
        t_out = out.reshape(shape)
        a, b, pp, rr = t_in[:, 0], t_in[:, 1], t_in[:, 2], t_in[:, 3]
        if cp:
            t_out[:, 0] += cp * pp
            t_out[:, 1] += cp * pp
            t_out[:, 2] += cp * (a + b)
        if cc:
            t_out[:, 2] += cc * rr
            t_out[:, 3] += cc * pp
    return out


def build_model(
    params: PhysicalParams,
    geometry: Geometry,
    t_r: float = 0.0166,
    t_gap: float = 1.09,
    n_cycles: int = 1,
    drives: bool = True,
) -> GateModel:
    table = pulses.build_timing(geometry.num_targets, t_r, params.t_p, t_gap, n_cycles=n_cycles)
    return GateModel(params, geometry, table, build_trajectory(table, geometry), drives=drives)
