"""Labeled product basis for one control atom and N target atoms.

The control atom lives in a 3-level space ``(g0, g1, ryd)`` = ``|0>, |1>, |r>``
and each target in a 4-level space ``(A, B, P, R)``.  Composite indices are
row-major with the control slowest and target N fastest, so for N = 4::

    index = 256 * c + 64 * t1 + 16 * t2 + 4 * t3 + t4

Density matrices are plain complex ``numpy`` arrays.  Subsystems are addressed
either by position (0 = control, j = target j) or by name (``"control"``,
``"target_j"``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Sequence

import numpy as np

CONTROL_LEVELS = ("g0", "g1", "ryd")
TARGET_LEVELS = ("A", "B", "P", "R")

_CONTROL_ALIASES = {"0": "g0", "1": "g1", "r": "ryd"}

EQUAL_SUPERPOSITION = "equal_superposition"


class LeakedStateError(ValueError):
    """Raised when a quantity is undefined because the state has zero weight."""


@dataclass(frozen=True)
class LevelScheme:
    num_targets: int
    control_levels: tuple[str, ...] = CONTROL_LEVELS
    target_levels: tuple[str, ...] = TARGET_LEVELS

    def __post_init__(self):
        if int(self.num_targets) != self.num_targets or self.num_targets < 1:
            raise ValueError(f"num_targets must be a positive integer, got {self.num_targets!r}")
        if len(self.control_levels) != 3:
            raise ValueError("control atom must have exactly 3 levels")
        if len(self.target_levels) != 4:
            raise ValueError("target atoms must have exactly 4 levels")

    @property
    def dims(self) -> tuple[int, ...]:
        return (3,) + (4,) * self.num_targets

    @property
    def dim(self) -> int:
        return 3 * 4**self.num_targets

    @property
    def num_subsystems(self) -> int:
        return self.num_targets + 1

    @property
    def logical_dim(self) -> int:
        return 2 ** (self.num_targets + 1)

    def control_level(self, label: str) -> int:
        label = _CONTROL_ALIASES.get(label, label)
        try:
            return self.control_levels.index(label)
        except ValueError:
            raise ValueError(f"unknown control label {label!r}") from None

    def target_level(self, label: str) -> int:
        try:
            return self.target_levels.index(label)
        except ValueError:
            raise ValueError(f"unknown target label {label!r}") from None

    def composite_index(self, control_label: str, target_labels: Sequence[str]) -> int:
        """Row-major index of ``|control> |t1 ... tN>``.

        ``target_labels`` may be a string such as ``"BAAA"``.
        """
        if len(target_labels) != self.num_targets:
            raise ValueError(
                f"expected {self.num_targets} target labels, got {len(target_labels)}"
            )
        index = self.control_level(control_label)
        for label in target_labels:
            index = 4 * index + self.target_level(label)
        return index

    def labels(self, index: int) -> tuple[str, tuple[str, ...]]:
        """Inverse of :meth:`composite_index`."""
        if not 0 <= index < self.dim:
            raise ValueError(f"index {index} outside [0, {self.dim})")
        digits = np.unravel_index(index, self.dims)
        control = self.control_levels[int(digits[0])]
        return control, tuple(self.target_levels[int(k)] for k in digits[1:])

    def subsystem(self, ident) -> int:
        """Resolve ``"control"``, ``"target_j"`` or an integer to a subsystem position."""
        if isinstance(ident, str):
            if ident == "control":
                return 0
            if ident.startswith("target_"):
                try:
                    ident = int(ident[len("target_"):])
                except ValueError:
                    raise ValueError(f"invalid subsystem identifier {ident!r}") from None
            else:
                raise ValueError(f"invalid subsystem identifier {ident!r}")
        if isinstance(ident, (bool, np.bool_)) or int(ident) != ident:
            raise ValueError(f"invalid subsystem identifier {ident!r}")
        ident = int(ident)
        if not 0 <= ident <= self.num_targets:
            raise ValueError(f"subsystem {ident} out of range for N={self.num_targets}")
        return ident

    def logical_indices(self) -> np.ndarray:
        """Composite indices of {g0,g1} x {A,B}^N in logical (binary) order."""
        idx = [
            self.composite_index(self.control_levels[c], [self.target_levels[b] for b in bits])
            for c, *bits in product((0, 1), repeat=self.num_targets + 1)
        ]
        return np.array(idx, dtype=np.intp)

    def logical_labels(self) -> list[tuple[str, str]]:
        """Labels of the logical basis, e.g. ``("0", "BBAA")``, in logical order."""
        return [
            (str(c), "".join("AB"[b] for b in bits))
            for c, *bits in product((0, 1), repeat=self.num_targets + 1)
        ]


@dataclass(frozen=True)
class StateVector:
    scheme: LevelScheme
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != self.scheme.dim:
            raise ValueError(f"expected {self.scheme.dim} amplitudes, got {amps.size}")
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes contain NaN or inf")
        norm2 = float(np.vdot(amps, amps).real)
        if norm2 > 1 + 1e-9:
            raise ValueError(f"squared norm {norm2} exceeds 1")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm2(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def amplitude(self, control_label: str, target_labels: Sequence[str]) -> complex:
        return complex(self.amplitudes[self.scheme.composite_index(control_label, target_labels)])

    def density(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())


def basis_state(scheme: LevelScheme, control_label: str, target_labels: Sequence[str]) -> StateVector:
    amps = np.zeros(scheme.dim, dtype=complex)
    amps[scheme.composite_index(control_label, target_labels)] = 1.0
    return StateVector(scheme, amps)


def prepare_initial(scheme: LevelScheme, control_spec: str, target_labels: Sequence[str]) -> StateVector:
    """Product initial state.

    ``control_spec`` is a control label or ``"equal_superposition"`` for
    ``(|0> + |1>)/sqrt(2)`` (ideal Hadamard on ``|0>``).
    """
    if control_spec == EQUAL_SUPERPOSITION:
        amps = np.zeros(scheme.dim, dtype=complex)
        amps[scheme.composite_index("g0", target_labels)] = 1 / np.sqrt(2)
        amps[scheme.composite_index("g1", target_labels)] = 1 / np.sqrt(2)
        return StateVector(scheme, amps)
    return basis_state(scheme, control_spec, target_labels)


def _resolve_keep(keep: Iterable, dims: Sequence[int], scheme: LevelScheme | None) -> list[int]:
    out = []
    for ident in keep:
        if scheme is not None:
            pos = scheme.subsystem(ident)
        else:
            if isinstance(ident, str) or int(ident) != ident or not 0 <= int(ident) < len(dims):
                raise ValueError(f"invalid subsystem identifier {ident!r}")
            pos = int(ident)
        if pos in out:
            raise ValueError(f"subsystem {ident!r} listed twice")
        out.append(pos)
    return sorted(out)


def partial_trace(state, keep: Iterable, dims: Sequence[int] | None = None) -> np.ndarray:
    """Reduced density matrix on the subsystems in ``keep``.

    ``state`` is a :class:`StateVector`, a state vector or a density matrix;
    raw arrays need ``dims``.  Kept subsystems come out in ascending order.
    An empty ``keep`` gives the 1x1 matrix holding the trace.
    """
    scheme = None
    if isinstance(state, StateVector):
        scheme = state.scheme
        dims = scheme.dims
        data = state.amplitudes
    else:
        if dims is None:
            raise ValueError("dims are required for raw arrays")
        data = np.asarray(state, dtype=complex)
    dims = tuple(int(d) for d in dims)
    total = int(np.prod(dims))
    keep = _resolve_keep(keep, dims, scheme)
    rest = [k for k in range(len(dims)) if k not in keep]
    dk = int(np.prod([dims[k] for k in keep])) if keep else 1

    if data.ndim == 1:
        if data.size != total:
            raise ValueError(f"state of size {data.size} does not match dims {dims}")
        m = np.transpose(data.reshape(dims), keep + rest).reshape(dk, -1)
        return m @ m.conj().T

    if data.shape != (total, total):
        raise ValueError(f"density matrix of shape {data.shape} does not match dims {dims}")
    n = len(dims)
    t = data.reshape(dims + dims)
    t = np.transpose(t, keep + rest + [n + k for k in keep] + [n + k for k in rest])
    dr = total // dk
    t = t.reshape(dk, dr, dk, dr)
    return np.einsum("ajbj->ab", t)


def project_logical(state, renormalize: bool = False) -> np.ndarray:
    """Density matrix restricted to the logical subspace {0,1} x {A,B}^N.

    Amplitudes on ``|r>``, ``|P>`` and ``|R>`` are dropped without
    renormalization, so leakage appears as a trace deficit.  For full-space
    density matrices use :func:`project_logical_density`.
    """
    idx = state.scheme.logical_indices()
    v = state.amplitudes[idx]
    rho = np.outer(v, v.conj())
    if renormalize:
        tr = rho.trace().real
        if tr <= 0:
            raise LeakedStateError("state has no weight in the logical subspace")
        rho = rho / tr
    return rho


def project_logical_density(scheme: LevelScheme, rho: np.ndarray, renormalize: bool = False) -> np.ndarray:
    """Logical-subspace block of a full-space density matrix."""
    idx = scheme.logical_indices()
    out = np.asarray(rho, dtype=complex)[np.ix_(idx, idx)]
    if renormalize:
        tr = out.trace().real
        if tr <= 0:
            raise LeakedStateError("state has no weight in the logical subspace")
        out = out / tr
    return out


def purity(rho: np.ndarray) -> float:
    """Normalized purity Tr(rho^2) / Tr(rho)^2."""
    rho = np.asarray(rho, dtype=complex)
    tr = rho.trace().real
    if tr <= 1e-300:
        raise LeakedStateError("zero-trace density matrix (fully leaked state)")
    # Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
    return float(np.sum(np.abs(rho) ** 2) / tr**2)
