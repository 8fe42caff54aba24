"""Dense complex linear algebra over small qubit tensor-product spaces.

Every state, density matrix and observable carries a :class:`SpaceLayout`
naming its ordered tensor factors, so composition, embedding and partial
traces can be checked against the factor structure instead of bare shapes.
Storage is dense ``complex128`` throughout; the largest space used anywhere
in this package is 13 qubits (dimension 8192), where dense wins on
simplicity.

All operations are pure functions on immutable values (arrays are frozen at
construction), so they are safe to call from concurrent contexts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union

import numpy as np

ATOL_NORM = 1e-12           # state-vector normalization
ATOL_HERMITIAN_INPUT = 1e-10  # acceptance gate for Hermitian input matrices
ATOL_HERMITIAN_STORED = 1e-12  # guaranteed for stored matrices
ATOL_TRACE = 1e-12          # density-matrix trace
ATOL_PSD = 1e-12            # tolerated magnitude of negative eigenvalues
ATOL_PROJECTOR = 1e-10      # projector algebra checks
ATOL_PROB_SUM = 1e-10       # outcome distributions must sum to one
ATOL_IMAG = 1e-10           # discarded imaginary residue of expectations
RTOL_RECONSTRUCT = 1e-9     # spectral reconstruction, relative Frobenius
EIG_GROUP_RTOL = 1e-8       # |l_i - l_j| <= EIG_GROUP_RTOL * max(1, |l_i|)
DEFAULT_EIGENSTATE_TOL = 1e-9


class InvariantViolation(ValueError):
    """A numeric model invariant (norm, Hermiticity, positivity, ...) failed."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SpaceLayout:
    """Ordered list of labelled tensor factors; all factors are qubits."""

    factors: tuple[tuple[str, int], ...]

    def __post_init__(self):
        if not self.factors:
            raise ValueError("a layout needs at least one factor")
        labels = [label for label, _ in self.factors]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate factor labels in {labels}")
        for label, dim in self.factors:
            if dim != 2:
                raise ValueError(
                    f"factor {label!r} has dim {dim}; only qubit factors are supported"
                )

    @classmethod
    def of(cls, *labels: str) -> "SpaceLayout":
        return cls(tuple((label, 2) for label in labels))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.factors)

    @property
    def n_factors(self) -> int:
        return len(self.factors)

    @property
    def total_dim(self) -> int:
        out = 1
        for dim in self.dims:
            out *= dim
        return out

    def axis(self, label: str) -> int:
        for i, (lab, _) in enumerate(self.factors):
            if lab == label:
                return i
        raise ValueError(f"no factor labelled {label!r} in layout {self.labels}")

    def restricted(self, keep: Sequence[str]) -> "SpaceLayout":
        """Sub-layout of the factors in ``keep``, preserving this layout's order."""
        keep_set = set(keep)
        unknown = keep_set - set(self.labels)
        if unknown:
            raise ValueError(f"unknown factor labels {sorted(unknown)}")
        return SpaceLayout(tuple(f for f in self.factors if f[0] in keep_set))


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized complex amplitude array over a layout's basis ordering."""

    layout: SpaceLayout
    amplitudes: np.ndarray

    def __post_init__(self):
        arr = np.array(self.amplitudes, dtype=np.complex128)
        if arr.shape != (self.layout.total_dim,):
            raise ValueError(
                f"amplitude array has shape {arr.shape}, layout needs "
                f"({self.layout.total_dim},)"
            )
        norm = float(np.linalg.norm(arr))
        if abs(norm - 1.0) > ATOL_NORM:
            raise InvariantViolation(
                f"state norm {norm!r} deviates from 1 by more than {ATOL_NORM}"
            )
        object.__setattr__(self, "amplitudes", _frozen(arr))

    def density(self) -> "DensityMatrix":
        """Rank-one density matrix of this pure state."""
        return DensityMatrix(
            self.layout, np.outer(self.amplitudes, self.amplitudes.conj())
        )


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, positive semidefinite, trace-one operator."""

    layout: SpaceLayout
    matrix: np.ndarray

    def __post_init__(self):
        dim = self.layout.total_dim
        arr = np.array(self.matrix, dtype=np.complex128)
        if arr.shape != (dim, dim):
            raise ValueError(f"matrix has shape {arr.shape}, layout needs ({dim}, {dim})")
        if np.max(np.abs(arr - arr.conj().T)) > ATOL_HERMITIAN_STORED:
            raise InvariantViolation("density matrix is not Hermitian")
        arr = (arr + arr.conj().T) / 2.0
        trace = float(arr.trace().real)
        if abs(trace - 1.0) > ATOL_TRACE:
            raise InvariantViolation(f"density matrix trace {trace!r} is not 1")
        lowest = float(np.linalg.eigvalsh(arr)[0])
        if lowest < -ATOL_PSD:
            raise InvariantViolation(
                f"density matrix has negative eigenvalue {lowest!r}"
            )
        object.__setattr__(self, "matrix", _frozen(arr))

    def purity(self) -> float:
        return float(np.trace(self.matrix @ self.matrix).real)


class SpectralEntry(NamedTuple):
    eigenvalue: float
    projector: np.ndarray
    multiplicity: int


class Observable:
    """Hermitian operator with a grouped spectral decomposition.

    The input matrix must be Hermitian within ``ATOL_HERMITIAN_INPUT``; the
    stored copy is symmetrized so downstream code sees an exactly Hermitian
    matrix.  The spectral decomposition is computed lazily on first access
    and merges eigenvalues closer than the relative grouping tolerance into
    one entry, so degenerate spectra yield stable projectors.
    """

    __slots__ = ("layout", "matrix", "name", "_spectrum")

    def __init__(self, layout: SpaceLayout, matrix, name: str | None = None):
        dim = layout.total_dim
        arr = np.array(matrix, dtype=np.complex128)
        if arr.shape != (dim, dim):
            raise ValueError(f"matrix has shape {arr.shape}, layout needs ({dim}, {dim})")
        if np.max(np.abs(arr - arr.conj().T)) > ATOL_HERMITIAN_INPUT:
            raise InvariantViolation("observable matrix is not Hermitian")
        self.layout = layout
        self.matrix = _frozen((arr + arr.conj().T) / 2.0)
        self.name = name
        self._spectrum: tuple[SpectralEntry, ...] | None = None

    @property
    def spectrum(self) -> tuple[SpectralEntry, ...]:
        if self._spectrum is None:
            self._spectrum = _grouped_spectrum(self.matrix)
        return self._spectrum

    @property
    def eigenvalues(self) -> tuple[float, ...]:
        return tuple(entry.eigenvalue for entry in self.spectrum)

    def __repr__(self):
        label = self.name or "G"
        return f"Observable({label!r}, dim={self.layout.total_dim})"


def _grouped_spectrum(matrix: np.ndarray) -> tuple[SpectralEntry, ...]:
    values, vectors = np.linalg.eigh(matrix)
    entries: list[SpectralEntry] = []
    start = 0
    for k in range(1, len(values) + 1):
        last = values[k - 1]
        if k < len(values) and values[k] - last <= EIG_GROUP_RTOL * max(1.0, abs(last)):
            continue
        block = vectors[:, start:k]
        projector = _frozen(block @ block.conj().T)
        entries.append(
            SpectralEntry(float(values[start:k].mean()), projector, k - start)
        )
        start = k
    return tuple(entries)


State = Union[StateVector, DensityMatrix]


def _require_same_layout(state, op) -> None:
    if state.layout != op.layout:
        raise ValueError(
            f"layout mismatch: {state.layout.labels} vs {op.layout.labels}"
        )


def tensor_state(parts: Sequence[StateVector]) -> StateVector:
    """Kronecker product of states, factors concatenated in argument order."""
    if not parts:
        raise ValueError("tensor_state needs at least one part")
    factors: list[tuple[str, int]] = []
    for part in parts:
        factors.extend(part.layout.factors)
    layout = SpaceLayout(tuple(factors))  # rejects duplicate labels
    amplitudes = parts[0].amplitudes
    for part in parts[1:]:
        amplitudes = np.kron(amplitudes, part.amplitudes)
    return StateVector(layout, amplitudes)


def basis_state(layout: SpaceLayout, occupations: Sequence[int]) -> StateVector:
    """Computational basis vector with the given 0/1 value per factor."""
    if len(occupations) != layout.n_factors:
        raise ValueError("one occupation per factor required")
    index = 0
    for occ in occupations:
        if occ not in (0, 1):
            raise ValueError("occupations must be 0 or 1")
        index = 2 * index + occ
    amplitudes = np.zeros(layout.total_dim, dtype=np.complex128)
    amplitudes[index] = 1.0
    return StateVector(layout, amplitudes)


def embed_operator(
    op: Observable, target_labels: Sequence[str], layout: SpaceLayout
) -> Observable:
    """Lift ``op`` to ``layout``: acts as ``op`` on the targets, identity elsewhere.

    ``target_labels`` name the factors of ``layout`` onto which the factors of
    ``op`` map, in order.
    """
    targets = list(target_labels)
    if len(targets) != op.layout.n_factors:
        raise ValueError(
            f"operator has {op.layout.n_factors} factors but {len(targets)} targets given"
        )
    if len(set(targets)) != len(targets):
        raise ValueError("target labels must be distinct")
    for label in targets:
        layout.axis(label)  # raises on unknown labels
    rest = [label for label in layout.labels if label not in set(targets)]
    big = np.kron(op.matrix, np.eye(2 ** len(rest), dtype=np.complex128))
    # `big` is ordered targets + rest; permute the factor axes to layout order
    order = targets + rest
    source = {label: i for i, label in enumerate(order)}
    perm = [source[label] for label in layout.labels]
    n = layout.n_factors
    tensor = big.reshape((2,) * (2 * n))
    tensor = tensor.transpose(perm + [p + n for p in perm])
    return Observable(layout, tensor.reshape(layout.total_dim, layout.total_dim),
                      name=op.name)


def partial_trace(state: State, keep_labels: Sequence[str]) -> DensityMatrix:
    """Reduced density matrix over the kept factors.

    Accepts a pure state or a density matrix; for a pure state the reduced
    matrix is formed without materializing the full projector.  The result
    layout is the input layout restricted to ``keep_labels``.
    """
    keep = list(keep_labels)
    if not keep:
        raise ValueError("keep_labels must be nonempty")
    if len(set(keep)) != len(keep):
        raise ValueError("keep_labels must be distinct")
    layout = state.layout
    sub = layout.restricted(keep)  # raises on unknown labels
    keep_axes = [layout.axis(label) for label in sub.labels]
    rest_axes = [i for i in range(layout.n_factors) if i not in keep_axes]
    dim_keep = 2 ** len(keep_axes)
    dim_rest = 2 ** len(rest_axes)
    n = layout.n_factors
    if isinstance(state, StateVector):
        block = (
            state.amplitudes.reshape((2,) * n)
            .transpose(keep_axes + rest_axes)
            .reshape(dim_keep, dim_rest)
        )
        reduced = block @ block.conj().T
    else:
        axes = keep_axes + rest_axes
        tensor = state.matrix.reshape((2,) * (2 * n))
        tensor = tensor.transpose(axes + [a + n for a in axes])
        tensor = tensor.reshape(dim_keep, dim_rest, dim_keep, dim_rest)
        reduced = np.einsum("arbr->ab", tensor)
    return DensityMatrix(sub, reduced)


def spectral_decompose(matrix, layout: SpaceLayout) -> Observable:
    """Observable with grouped spectrum; rejects non-Hermitian input."""
    return Observable(layout, matrix)


def expectation(state: State, op: Observable) -> float:
    """<psi|G|psi> or Tr(rho G); tiny imaginary residue is discarded."""
    _require_same_layout(state, op)
    if isinstance(state, StateVector):
        value = complex(np.vdot(state.amplitudes, op.matrix @ state.amplitudes))
    else:
        value = complex(np.trace(op.matrix @ state.matrix))
    if abs(value.imag) > ATOL_IMAG:
        raise InvariantViolation(
            f"expectation of Hermitian operator has imaginary part {value.imag!r}"
        )
    return float(value.real)


def is_eigenstate(
    op: Observable, state: StateVector, tol: float = DEFAULT_EIGENSTATE_TOL
) -> float | None:
    """Eigenvalue of ``state`` under ``op`` if the residual is within ``tol``.

    Returns ``lam = <psi|G|psi>`` when ``||G psi - lam psi|| <= tol``, else None.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    _require_same_layout(state, op)
    lam = expectation(state, op)
    residual = float(
        np.linalg.norm(op.matrix @ state.amplitudes - lam * state.amplitudes)
    )
    return lam if residual <= tol else None


def outcome_distribution(state: State, op: Observable) -> list[tuple[float, float]]:
    """Measurement distribution of ``op`` in ``state``, one entry per spectral group."""
    _require_same_layout(state, op)
    out: list[tuple[float, float]] = []
    for entry in op.spectrum:
        if isinstance(state, StateVector):
            weight = float(
                np.real(np.vdot(state.amplitudes, entry.projector @ state.amplitudes))
            )
        else:
            weight = float(np.trace(entry.projector @ state.matrix).real)
        if weight < -ATOL_PROB_SUM:
            raise InvariantViolation(f"negative outcome probability {weight!r}")
        out.append((entry.eigenvalue, max(weight, 0.0)))
    total = sum(weight for _, weight in out)
    if abs(total - 1.0) > ATOL_PROB_SUM:
        raise InvariantViolation(f"outcome probabilities sum to {total!r}")
    return out
