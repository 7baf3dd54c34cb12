"""Measured quantities: populations, truth tables, fidelities, parity, Renyi-2 entropy.

Fidelity follows the Uhlmann form ``F = Tr sqrt(sqrt(rho) sigma sqrt(rho))``
(no square), evaluated on the logical-subspace projection of the final state.
Entropies are base-2 and always use trace-renormalized reduced states; the
weight lost to leakage and decay is reported separately as ``norm_deficit``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .hilbert import (
    LeakedStateError,
    LevelScheme,
    StateVector,
    partial_trace,
    prepare_initial,
    project_logical,
    purity,
)

PSD_FLOOR = -1e-10


def _parse_tuple(scheme: LevelScheme, labels) -> int:
    if isinstance(labels, (int, np.integer)):
        return int(labels)
    control, targets = labels
    return scheme.composite_index(control, targets)


def populations(state: StateVector, label_tuples: Iterable) -> dict:
    """``|amplitude|^2`` for each ``(control, targets)`` tuple, keyed by the tuple as given."""
    out = {}
    for labels in label_tuples:
        key = labels if not isinstance(labels, list) else tuple(labels)
        out[key] = float(abs(state.amplitudes[_parse_tuple(state.scheme, labels)]) ** 2)
    return out


def norm_deficit(state: StateVector) -> float:
    return max(0.0, 1.0 - state.norm2)


def logical_populations(state: StateVector) -> np.ndarray:
    return np.abs(state.amplitudes[state.scheme.logical_indices()]) ** 2


def _psd_sqrt(rho: np.ndarray, name: str) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    herm = 0.5 * (rho + rho.conj().T)
    if not np.allclose(rho, herm, atol=1e-10):
        raise ValueError(f"{name} is not Hermitian")
    w, v = np.linalg.eigh(herm)
    if w.min() < PSD_FLOOR:
        raise ValueError(f"{name} has eigenvalue {w.min():.3e} below the PSD floor")
    # roundoff-level eigenvalues would otherwise enter as sqrt(eps) ~ 1e-8
    w = np.where(w > len(w) * np.finfo(float).eps * max(w.max(), 0.0), w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity_general(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann fidelity ``Tr sqrt(sqrt(rho) sigma sqrt(rho))``.

    Evaluated as the trace norm of ``sqrt(rho) sqrt(sigma)``, which equals the
    above and avoids square roots of the small eigenvalues of the product.
    """
    m = _psd_sqrt(rho, "rho") @ _psd_sqrt(sigma, "sigma")
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def fidelity_pure(rho: np.ndarray, phi: np.ndarray) -> float:
    """Uhlmann fidelity against the pure state ``phi``: ``sqrt(<phi|rho|phi>)``."""
    phi = np.asarray(phi, dtype=complex)
    return float(np.sqrt(max(0.0, np.vdot(phi, rho @ phi).real)))


def ghz_vector(scheme: LevelScheme, orientation: str = "A") -> np.ndarray:
    """GHZ target in the logical basis.

    ``orientation="A"``: (|0,A..A> + |1,B..B>)/sqrt2; ``"B"``: (|0,B..B> + |1,A..A>)/sqrt2.
    """
    n = scheme.num_targets
    if orientation not in ("A", "B"):
        raise ValueError(f"orientation must be 'A' or 'B', got {orientation!r}")
    rest = 2**n - 1
    v = np.zeros(scheme.logical_dim, dtype=complex)
    if orientation == "A":
        v[0] = v[2**n + rest] = 1 / np.sqrt(2)
    else:
        v[rest] = v[2**n] = 1 / np.sqrt(2)
    return v


FIDELITY_CONVENTIONS = ("uhlmann", "squared")


def ghz_fidelity(state: StateVector, orientation: str = "A", renormalize: bool = False,
                 convention: str = "uhlmann") -> float:
    """Fidelity of the logical projection with the GHZ target.

    ``convention="squared"`` returns the overlap ``<GHZ|rho|GHZ>`` instead of its root.
    """
    if convention not in FIDELITY_CONVENTIONS:
        raise ValueError(f"convention must be one of {FIDELITY_CONVENTIONS}, got {convention!r}")
    rho = project_logical(state, renormalize=renormalize)
    f = fidelity_pure(rho, ghz_vector(state.scheme, orientation))
    return f * f if convention == "squared" else f


def parity(state: StateVector) -> float:
    """``2 (P_{0A} + P_{1B}) - 1`` for a single target."""
    if state.scheme.num_targets != 1:
        raise ValueError("parity is defined for a single target only")
    p = populations(state, [("g0", "A"), ("g1", "B")])
    return 2 * (p[("g0", "A")] + p[("g1", "B")]) - 1


def _reduced(state: StateVector, subset, space: str) -> np.ndarray:
    scheme = state.scheme
    keep = [scheme.subsystem(s) for s in subset]
    if space == "logical":
        v = state.amplitudes[scheme.logical_indices()]
        return partial_trace(v, keep, dims=(2,) * scheme.num_subsystems)
    if space == "full":
        return partial_trace(state, keep)
    raise ValueError(f"space must be 'logical' or 'full', got {space!r}")


def renyi2(state: StateVector, subset: Iterable, space: str = "logical") -> float:
    """Base-2 second Renyi entropy of the renormalized reduced state on ``subset``.

    ``space="logical"`` first restricts the state to the logical subspace;
    ``"full"`` keeps the leakage levels.
    """
    rho = _reduced(state, list(subset), space)
    if rho.trace().real <= 1e-300:
        raise LeakedStateError("no weight left to compute an entropy")
    return float(max(0.0, -np.log2(purity(rho))))


def complement(scheme: LevelScheme, subset: Iterable) -> list[int]:
    chosen = {scheme.subsystem(s) for s in subset}
    return [k for k in range(scheme.num_subsystems) if k not in chosen]


def mutual_information(state: StateVector, subset: Iterable, space: str = "logical") -> float:
    """``S2(A) + S2(B) - S2(AB)`` with ``B`` the complement of ``A``."""
    subset = list(subset)
    scheme = state.scheme
    everything = list(range(scheme.num_subsystems))
    s_a = renyi2(state, subset, space)
    s_b = renyi2(state, complement(scheme, subset), space)
    s_ab = renyi2(state, everything, space)
    return s_a + s_b - s_ab


def subset_of_size(scheme: LevelScheme, size: int) -> list[int]:
    """Control plus the first ``size - 1`` targets; empty for size 0."""
    if not 0 <= size <= scheme.num_subsystems:
        raise ValueError(f"subset size must lie in 0..{scheme.num_subsystems}")
    return list(range(size))


@dataclass
class TruthTable:
    initial_labels: list[str]
    final_labels: list[str]
    probabilities: np.ndarray = field(repr=False)

    @property
    def row_sums(self) -> np.ndarray:
        return self.probabilities.sum(axis=1)

    def probability(self, initial: str, final: str) -> float:
        return float(self.probabilities[self.initial_labels.index(initial), self.final_labels.index(final)])


def logical_label(control: str, targets: str) -> str:
    return f"|{control},{targets}>"


def truth_table(model, initial_set: Sequence, tol: float = 1e-9) -> TruthTable:
    """Final logical-basis populations for each initial ``(control_spec, targets)``."""
    from .propagate import evolve

    if not initial_set:
        raise ValueError("initial_set must not be empty")
    scheme = model.scheme
    finals = [logical_label(c, t) for c, t in scheme.logical_labels()]
    rows, labels = [], []
    for control, targets in initial_set:
        psi0 = prepare_initial(scheme, control, targets)
        final = evolve(psi0, model, tol=tol, sample_grid=2).final
        rows.append(logical_populations(final))
        labels.append(initial_label(control, targets))
    return TruthTable(labels, finals, np.array(rows))


def initial_label(control: str, targets: str) -> str:
    names = {"g0": "0", "g1": "1", "ryd": "r", "equal_superposition": "+"}
    return logical_label(names.get(control, control), "".join(targets))
