"""Propagation of i dpsi/dt = H(t) psi over a gate schedule.

Gate windows are integrated with an adaptive Dormand-Prince 5(4) pair whose
steps never straddle a pulse switching time.  In transport gaps every laser
is off and H(t) is diagonal, so those stretches are propagated exactly with
one phase/decay factor per basis state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.linalg import expm
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import pulses
from .hamiltonian import GateModel, Piece, apply_local
from .hilbert import StateVector

DEFAULT_TOL = 1e-9
DEFAULT_SAMPLES = 2000
# error-per-unit-step reference time (us); keeps global error within a few tol
EPUS_TIME = 1e-2

# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = _A[6] + (0.0,)
_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40)
_E = tuple(b5 - b4 for b5, b4 in zip(_B5, _B4))


class NumericalError(RuntimeError):
    """Propagation produced non-finite values or could not proceed."""


class StepSizeUnderflow(NumericalError):
    pass


@dataclass
class Evolution:
    model: GateModel = field(repr=False)
    times: np.ndarray
    states: np.ndarray = field(repr=False)
    final: StateVector = field(repr=False)
    n_steps: int = 0
    n_rejected: int = 0

    def state(self, i: int) -> StateVector:
        return StateVector(self.model.scheme, self.states[i])

    @property
    def norms2(self) -> np.ndarray:
        return np.sum(np.abs(self.states) ** 2, axis=1)


def _piece_at(model: GateModel, t: float) -> Piece:
    for piece in model.pieces:
        if piece.t_start <= t < piece.t_end:
            return piece
    raise ValueError(f"t={t} is not inside a gate window")


class _Rhs:
    """-i H(t) psi on one piece; H is fixed apart from the Raman envelope."""

    def __init__(self, model: GateModel, piece: Piece):
        self.model = model
        self.piece = piece
        self.diag = model.window_diagonal(piece.window)
        self.cr = 0.5 * piece.omega_r
        self.cc = 0.5 * piece.omega_c
        self.n = model.num_targets

    def __call__(self, t: float, psi: np.ndarray) -> np.ndarray:
        cp = 0.5 * self.model.raman_amplitude(t, self.piece)
        h_psi = apply_local(psi, self.diag, self.cr, cp, self.cc, self.piece.target, self.n)
        h_psi *= -1j
        return h_psi


def _dp_step(rhs, t, psi, h, k1):
    ks = [k1]
    for i in range(1, 6):
        acc = psi.copy()
        for a, k in zip(_A[i], ks):
            if a:
                acc += (h * a) * k
        ks.append(rhs(t + _C[i] * h, acc))
    new = psi.copy()
    for b, k in zip(_B5, ks):
        if b:
            new += (h * b) * k
    k7 = rhs(t + h, new)
    ks.append(k7)
    err = np.zeros_like(psi)
    for e, k in zip(_E, ks):
        if e:
            err += (h * e) * k
    return new, k7, float(np.linalg.norm(err))


def _next_dt(h, err, tol_eff):
    if err == 0:
        return 5.0 * h
    return h * min(5.0, max(0.2, 0.9 * (tol_eff / err) ** 0.2))


def _local_tol(tol, psi, h):
    return tol * (1.0 + math.sqrt(float(np.vdot(psi, psi).real))) * min(1.0, h / EPUS_TIME)


def _check_finite(psi, t):
    if not np.all(np.isfinite(psi)):
        raise NumericalError(f"non-finite amplitudes at t={t:.9g} us")


def _integrate_piece(rhs, psi, t, t_stop, dt, tol, k1=None, stats=None):
    """Advance from ``t`` to exactly ``t_stop``; returns (psi, dt_next, k_last)."""
    if k1 is None:
        k1 = rhs(t, psi)
    while t < t_stop:
        h = min(dt, t_stop - t)
        if h <= 1e-15 * max(1.0, abs(t)):
            raise StepSizeUnderflow(f"step size underflow at t={t:.12g} us")
        new, k7, err = _dp_step(rhs, t, psi, h, k1)
        tol_eff = _local_tol(tol, psi, h)
        if err <= tol_eff:
            _check_finite(new, t + h)
            t = t_stop if h == t_stop - t else t + h
            psi, k1 = new, k7
            if stats is not None:
                stats[0] += 1
            # a clipped step says nothing about the natural step size
            if h == dt or err > 0.1 * tol_eff:
                dt = _next_dt(h, err, tol_eff)
        else:
            if not np.isfinite(err):
                raise NumericalError(f"non-finite error estimate at t={t:.9g} us")
            if stats is not None:
                stats[1] += 1
            dt = _next_dt(h, err, tol_eff)
    return psi, dt, k1


def step_active(
    model: GateModel,
    psi: np.ndarray,
    t: float,
    dt: float,
    tol: float = DEFAULT_TOL,
    t_limit: float | None = None,
) -> tuple[np.ndarray, float, float]:
    """One accepted adaptive step starting inside a gate window.

    The step is clipped so it ends no later than the next pulse switching
    time (or ``t_limit``).  Returns ``(psi_new, dt_used, dt_next)``.
    """
    piece = _piece_at(model, t)
    rhs = _Rhs(model, piece)
    psi = np.asarray(psi, dtype=complex)
    t_stop = piece.t_end if t_limit is None else min(piece.t_end, t_limit)
    k1 = rhs(t, psi)
    while True:
        h = min(dt, t_stop - t)
        if h <= 1e-15 * max(1.0, abs(t)):
            raise StepSizeUnderflow(f"step size underflow at t={t:.12g} us")
        new, _, err = _dp_step(rhs, t, psi, h, k1)
        tol_eff = _local_tol(tol, psi, h)
        if err <= tol_eff:
            _check_finite(new, t + h)
            return new, h, _next_dt(h, err, tol_eff)
        if not np.isfinite(err):
            raise NumericalError(f"non-finite error estimate at t={t:.9g} us")
        dt = _next_dt(h, err, tol_eff)


def gap_phase(model: GateModel, t1: float, t2: float) -> np.ndarray:
    """``int_{t1}^{t2}`` of the (diagonal) Hamiltonian over a transport gap."""
    if t2 < t1:
        raise ValueError("t2 < t1")
    phase = model.static_diagonal * (t2 - t1)
    if t2 == t1:
        return phase
    traj = model.trajectory
    cuts = sorted({t1, t2} | {s.t_start for s in traj.segments if t1 < s.t_start < t2})
    c3 = model.params.c3
    integrals = np.zeros(model.num_targets)
    for a, b in zip(cuts[:-1], cuts[1:]):
        seg = traj.segment_at(0.5 * (a + b))
        for j, target in enumerate(model.geometry.target_positions):
            _check_approach(model, seg, target, a, b)

            def v(t, target=target, seg=seg):
                return c3 / float(np.linalg.norm(seg.position(t) - target)) ** 3

            val, _ = integrate.quad(v, a, b, epsabs=0.0, epsrel=1e-11, limit=200)
            integrals[j] += val
    return phase + integrals @ model.rydberg_pair_masks


def _check_approach(model, seg, target, a, b):
    p0, p1 = seg.position(a), seg.position(b)
    d = p1 - p0
    s = 0.0 if not d.any() else float(np.clip(np.dot(target - p0, d) / np.dot(d, d), 0.0, 1.0))
    closest = float(np.linalg.norm(p0 + s * d - target))
    model.v_ct(closest)


def step_gap(model: GateModel, psi: np.ndarray, t1: float, t2: float) -> np.ndarray:
    """Exact propagation across a laser-free stretch ``[t1, t2]``."""
    for w in range(1, model.table.num_windows + 1):
        start, end = model.table.window(w)
        if model.drives and t1 < end and t2 > start:
            raise ValueError(f"[{t1}, {t2}] overlaps gate window {w}")
    return np.exp(-1j * gap_phase(model, t1, t2)) * np.asarray(psi, dtype=complex)


def _sample_times(model: GateModel, sample_grid) -> np.ndarray:
    t0, t1 = model.table.span
    if sample_grid is None:
        sample_grid = DEFAULT_SAMPLES
    if np.isscalar(sample_grid):
        n = int(sample_grid)
        if n < 2:
            raise ValueError("sample grid needs at least 2 points")
        return np.linspace(t0, t1, n)
    times = np.asarray(sample_grid, dtype=float)
    if times.ndim != 1 or len(times) == 0:
        raise ValueError("sample grid must be a 1-D sequence")
    if np.any(np.diff(times) <= 0):
        raise ValueError("sample times must be strictly increasing")
    if times[0] < t0 or times[-1] > t1:
        raise ValueError(f"sample times must lie within [{t0}, {t1}]")
    return times


def evolve(
    psi0,
    model: GateModel,
    tol: float = DEFAULT_TOL,
    sample_grid=None,
    analytic_gaps: bool = True,
) -> Evolution:
    """Propagate ``psi0`` over the whole schedule of ``model``.

    ``sample_grid`` is a point count (uniform over the schedule) or explicit
    increasing times.  With ``analytic_gaps=False`` the gaps go through the
    adaptive integrator as well (used to cross-check :func:`step_gap`).
    """
    if not 1e-12 <= tol <= 1e-6:
        raise ValueError(f"tol must lie in [1e-12, 1e-6], got {tol}")
    amps = np.array(getattr(psi0, "amplitudes", psi0), dtype=complex)
    if amps.size != model.scheme.dim:
        raise ValueError(f"initial state has size {amps.size}, expected {model.scheme.dim}")
    times = _sample_times(model, sample_grid)
    samples = np.empty((len(times), amps.size), dtype=complex)
    stats = [0, 0]

    # stretches: gate pieces and gaps, in time order
    stretches: list[tuple[float, float, Piece | None]] = []
    for piece in model.pieces:
        if stretches and stretches[-1][1] < piece.t_start:
            stretches.append((stretches[-1][1], piece.t_start, None))
        stretches.append((piece.t_start, piece.t_end, piece))

    psi = amps
    si = 0
    while si < len(times) and times[si] <= stretches[0][0]:
        samples[si] = psi
        si += 1
    dt = 1e-4
    for start, end, piece in stretches:
        if piece is None and analytic_gaps:
            while si < len(times) and times[si] <= end:
                samples[si] = step_gap(model, psi, start, times[si])
                si += 1
            psi = step_gap(model, psi, start, end)
            _check_finite(psi, end)
            continue
        rhs = _Rhs(model, piece) if piece is not None else _GapRhs(model)
        t, k1 = start, None
        while t < end:
            stop = end
            if si < len(times) and times[si] < end:
                stop = times[si]
            if stop > t:
                psi, dt, k1 = _integrate_piece(rhs, psi, t, stop, dt, tol, k1, stats)
                t = stop
            while si < len(times) and times[si] <= t:
                samples[si] = psi
                si += 1
    while si < len(times):
        samples[si] = psi
        si += 1
    norm2 = float(np.vdot(psi, psi).real)
    if norm2 > 1 + 1e-9:
        raise NumericalError(f"final squared norm {norm2} exceeds 1")
    final = StateVector(model.scheme, psi)
    return Evolution(model, times, samples, final, stats[0], stats[1])


class _GapRhs:
    def __init__(self, model: GateModel):
        self.model = model

    def __call__(self, t, psi):
        return -1j * self.model.diagonal(t) * psi


def _invariant_blocks(pattern: np.ndarray) -> list[np.ndarray]:
    """Index sets of the connected components of a matrix sparsity pattern.

    A matrix whose nonzeros only join indices within a component is block
    diagonal after permutation, so each block can be exponentiated alone.
    """
    n_comp, labels = connected_components(csr_matrix(pattern != 0), directed=False)
    return [np.flatnonzero(labels == c) for c in range(n_comp)]


def _oracle_raman(psi, model: GateModel, piece: Piece, mids: np.ndarray, dt: float, chunk: int = 1024):
    # H is affine in Omega_p(t) inside the Raman pulse: H(t) = H0 + Omega_p(t) K
    f = pulses.omega_p(mids, piece.window, model.table, model.params.delta)
    n = len(mids)
    i1, i2, i3 = n // 4, n // 2, (3 * n) // 4
    h1, h2, h3 = (model.assemble_dense(mids[i]) for i in (i1, i2, i3))
    k = (h2 - h1) / (f[i2] - f[i1])
    h0 = h1 - f[i1] * k
    if not np.allclose(h0 + f[i3] * k, h3, rtol=0, atol=1e-9 * np.abs(h3).max()):
        raise NumericalError("Hamiltonian is not affine in the Raman envelope")
    pattern = np.abs(h1) + np.abs(h2) + np.abs(h3)
    groups: dict[int, list[np.ndarray]] = {}
    for idx in _invariant_blocks(pattern):
        groups.setdefault(len(idx), []).append(idx)
    psi = psi.copy()
    for size, members in groups.items():
        idx = np.array(members)  # (blocks, size)
        h0b = h0[idx[:, :, None], idx[:, None, :]]
        kb = k[idx[:, :, None], idx[:, None, :]]
        vec = psi[idx]
        for start in range(0, n, chunk):
            fc = f[start:start + chunk]
            us = expm(-1j * dt * (h0b[None] + fc[:, None, None, None] * kb[None]))
            for u in us:
                vec = np.einsum("bij,bj->bi", u, vec)
        psi[idx] = vec
    return psi


def oracle_evolve(psi0, model: GateModel, steps_per_us: float = 2e5) -> np.ndarray:
    """Fixed-step exponential-midpoint propagation with dense ``expm``.

    Every stretch between switching times gets ``ceil(length * steps_per_us)``
    equal steps, each advanced by ``expm(-i H(t_mid) dt)`` with ``H`` from
    :meth:`GateModel.assemble_dense`.  Constant pieces reuse one propagator,
    Raman pieces are exponentiated block by block, and gaps (diagonal H) sum
    the midpoint phases.  Meant for small N in tests.
    """
    psi = np.array(getattr(psi0, "amplitudes", psi0), dtype=complex)
    edges = [0.0]
    for piece in model.pieces:
        if piece.t_start > edges[-1]:
            edges.append(piece.t_start)
        edges.append(piece.t_end)
    for a, b in zip(edges[:-1], edges[1:]):
        n = max(1, math.ceil((b - a) * steps_per_us))
        dt = (b - a) / n
        mids = a + (np.arange(n) + 0.5) * dt
        piece = next((p for p in model.pieces if p.t_start <= mids[0] < p.t_end), None)
        if piece is None:
            h = model.assemble_dense(mids[0])
            if np.count_nonzero(h - np.diag(np.diag(h))):
                raise NumericalError(f"Hamiltonian is not diagonal in the gap at t={mids[0]:.6g}")
            couplings = sum(model.control_target_couplings(t) for t in mids) * dt
            phase = model.static_diagonal * (b - a) + couplings @ model.rydberg_pair_masks
            psi = np.exp(-1j * phase) * psi
        elif piece.raman and n >= 4:
            psi = _oracle_raman(psi, model, piece, mids, dt)
        elif not piece.raman:
            # piecewise-constant H: the same midpoint propagator for every step
            u = expm(-1j * model.assemble_dense(mids[0]) * dt)
            psi = np.linalg.matrix_power(u, n) @ psi
        else:
            for tm in mids:
                psi = expm(-1j * model.assemble_dense(tm) * dt) @ psi
    return psi
