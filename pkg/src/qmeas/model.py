"""The measurement chain: system, detector pointer, observer pointer, environment.

Basis conventions, fixed once so amplitude layouts are bit-exact in tests:
the first basis vector of every factor carries branch 1 and the second
branch 2; the factor order is system, detector, observer, then environment
qubits.  Spin components on the system are Pauli matrices over two
(eigenvalues +-1/2); pointer observables on the detector and observer are
Pauli-normalized (eigenvalues +-1), branch 1 mapping to +1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from .hilbert import (
    InvariantViolation,
    Observable,
    SpaceLayout,
    StateVector,
    basis_state,
    embed_operator,
    partial_trace,
    tensor_state,
)

SYSTEM = "S"
DETECTOR = "D"
OBSERVER = "O"
CHAIN_LABELS = (SYSTEM, DETECTOR, OBSERVER)

PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)

ATOL_AMPLITUDE = 1e-12
ATOL_PARAMETER = 1e-12
ATOL_POINTER_READY = 1e-9

# ready state of either pointer: the symmetric superposition of its basis
_POINTER_READY = np.array([1.0, 1.0], dtype=np.complex128) / math.sqrt(2.0)

_HADAMARD = np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2.0)
_CONTROLLED_FLIP = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128
)
# maps |i>(x)|ready> to |i>(x)|pointer_i| for both source basis vectors,
# extended unitarily to the rest of the two-factor space
_PREMEASURE_UNITARY = _CONTROLLED_FLIP @ np.kron(np.eye(2), _HADAMARD)


def env_label(j: int) -> str:
    """Label of the j-th environment qubit, counted from 1."""
    return f"E{j}"


def is_env_label(label: str) -> bool:
    return label not in CHAIN_LABELS


def ms_layout(n_env: int = 0) -> SpaceLayout:
    """Layout of the full chain with ``n_env`` trailing environment qubits."""
    if n_env < 0:
        raise ValueError("n_env must be >= 0")
    labels = list(CHAIN_LABELS) + [env_label(j) for j in range(1, n_env + 1)]
    return SpaceLayout.of(*labels)


@dataclass(frozen=True)
class ModelConfig:
    """Amplitudes, environment coupling and the sampling seed for one experiment."""

    a1: complex
    a2: complex
    n_env: int = 0
    env_overlap: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        total = abs(self.a1) ** 2 + abs(self.a2) ** 2
        if abs(total - 1.0) > ATOL_AMPLITUDE:
            raise InvariantViolation(
                f"|a1|^2 + |a2|^2 = {total!r}, expected 1 within {ATOL_AMPLITUDE}"
            )
        if self.n_env < 0:
            raise ValueError("n_env must be >= 0")
        if not 0.0 <= self.env_overlap <= 1.0:
            raise ValueError("env_overlap must lie in [0, 1]")

    @property
    def born_weights(self) -> tuple[float, float]:
        return (abs(self.a1) ** 2, abs(self.a2) ** 2)


def prepare_system(a1: complex, a2: complex) -> StateVector:
    """Pure system qubit a1|s1> + a2|s2>; rejects non-normalized amplitudes."""
    return StateVector(SpaceLayout.of(SYSTEM), np.array([a1, a2], dtype=np.complex128))


def pointer_ready(label: str) -> StateVector:
    """The symmetric ready state of a pointer factor."""
    return StateVector(SpaceLayout.of(label), _POINTER_READY)


def premeasure(state: StateVector, source_label: str, pointer_label: str) -> StateVector:
    """Correlate the source factor with a pointer that sits in its ready state.

    Applies the unitary defined on basis vectors by |i>|ready> -> |i>|p_i>
    (a basis flip controlled on the source, composed with the map taking the
    ready state to the first pointer vector).  The pointer factor must be in
    its ready state: the interaction is only tuned from there.
    """
    layout = state.layout
    source_axis = layout.axis(source_label)
    pointer_axis = layout.axis(pointer_label)
    if source_axis == pointer_axis:
        raise ValueError("source and pointer must be different factors")
    reduced = partial_trace(state, [pointer_label]).matrix
    ready = np.outer(_POINTER_READY, _POINTER_READY)
    if np.max(np.abs(reduced - ready)) > ATOL_POINTER_READY:
        raise ValueError(
            f"pointer {pointer_label!r} is not in its ready state; "
            "premeasurement is only defined from there"
        )
    n = layout.n_factors
    tensor = state.amplitudes.reshape((2,) * n)
    tensor = np.moveaxis(tensor, (source_axis, pointer_axis), (0, 1))
    shape = tensor.shape
    tensor = (_PREMEASURE_UNITARY @ tensor.reshape(4, -1)).reshape(shape)
    tensor = np.moveaxis(tensor, (0, 1), (source_axis, pointer_axis))
    return StateVector(layout, tensor.reshape(-1))


def _env_branch_vector(branch: int, env_overlap: float) -> np.ndarray:
    if branch == 1:
        return np.array([1.0, 0.0], dtype=np.complex128)
    return np.array(
        [env_overlap, math.sqrt(max(0.0, 1.0 - env_overlap**2))], dtype=np.complex128
    )


def branch_state(
    branch: int, layout: SpaceLayout, env_overlap: float | None = None
) -> StateVector:
    """Product state of one measurement branch over all factors of ``layout``.

    Chain factors take their branch basis vector; environment factors take
    the branch environment state, which requires ``env_overlap``.
    """
    if branch not in (1, 2):
        raise ValueError("branch must be 1 or 2")
    parts: list[StateVector] = []
    for label, _ in layout.factors:
        sub = SpaceLayout.of(label)
        if is_env_label(label):
            if env_overlap is None:
                raise ValueError(
                    f"layout contains environment factor {label!r}; env_overlap required"
                )
            parts.append(StateVector(sub, _env_branch_vector(branch, env_overlap)))
        else:
            parts.append(basis_state(sub, [branch - 1]))
    return tensor_state(parts)


def decohere(
    state: StateVector,
    n_env: int,
    env_overlap: float,
    control_label: str = OBSERVER,
) -> StateVector:
    """Couple ``n_env`` fresh environment qubits to the pointer basis.

    Each basis value of the control factor tags every environment qubit with
    its branch state, whose mutual overlap is ``env_overlap``; branch
    amplitudes are unchanged.  The environment factors are appended after the
    existing ones.
    """
    if n_env < 1:
        raise ValueError("n_env must be >= 1")
    if not 0.0 <= env_overlap <= 1.0:
        raise ValueError("env_overlap must lie in [0, 1]")
    layout = state.layout
    control_axis = layout.axis(control_label)
    new_labels = [env_label(j) for j in range(1, n_env + 1)]
    for label in new_labels:
        if label in layout.labels:
            raise ValueError(f"layout already contains environment factor {label!r}")
    target = SpaceLayout(tuple(layout.factors) + tuple((lab, 2) for lab in new_labels))

    blocks = []
    for branch in (1, 2):
        env = _env_branch_vector(branch, env_overlap)
        block = env
        for _ in range(n_env - 1):
            block = np.kron(block, env)
        blocks.append(block.reshape((2,) * n_env))
    tensor = state.amplitudes.reshape((2,) * layout.n_factors)
    slices = [
        np.multiply.outer(np.take(tensor, value, axis=control_axis), blocks[value])
        for value in (0, 1)
    ]
    result = np.stack(slices, axis=control_axis)
    return StateVector(target, result.reshape(-1))


def interference_operator(
    layout: SpaceLayout,
    c1: complex,
    c2: complex | None = None,
    factors: Sequence[str] = CHAIN_LABELS,
) -> Observable:
    """Joint flip operator c1 |1..1><2..2| + c2 |2..2><1..1| over ``factors``.

    Hermiticity requires c2 equal to the conjugate of c1 (the default); any
    other combination is rejected, as is |c1| != 1.
    """
    c1 = complex(c1)
    c2 = c1.conjugate() if c2 is None else complex(c2)
    if abs(c2 - c1.conjugate()) > ATOL_PARAMETER:
        raise ValueError("c2 must equal conj(c1) for a Hermitian interference term")
    if abs(abs(c1) - 1.0) > ATOL_PARAMETER:
        raise ValueError("|c1| must equal 1")
    sub = SpaceLayout.of(*factors)
    dim = sub.total_dim
    matrix = np.zeros((dim, dim), dtype=np.complex128)
    matrix[0, dim - 1] = c1
    matrix[dim - 1, 0] = c2
    name = "B" if len(factors) == 3 else "B_SD"
    op = Observable(sub, matrix, name=name)
    if tuple(layout.labels) == tuple(factors):
        return op
    return embed_operator(op, list(factors), layout)


@dataclass(frozen=True, eq=False)
class ObservableZoo:
    """Named observables embedded in one layout."""

    members: Mapping[str, Observable]
    gamma: float
    c1: complex
    direction: tuple[float, float, float]

    def __getitem__(self, name: str) -> Observable:
        try:
            return self.members[name]
        except KeyError:
            raise KeyError(
                f"no observable {name!r}; available: {sorted(self.members)}"
            ) from None

    def __contains__(self, name: str) -> bool:
        return name in self.members

    def names(self) -> tuple[str, ...]:
        return tuple(self.members)


def zoo(
    layout: SpaceLayout,
    gamma: float = 0.0,
    c1: complex = 1.0 + 0.0j,
    direction: Sequence[float] = (1.0, 0.0, 0.0),
) -> ObservableZoo:
    """Build every named observable whose factors exist in ``layout``.

    ``gamma`` fixes the conjugate spin component S_a, ``c1`` the interference
    phases, ``direction`` the observer-algebra coefficients (d0, d1, d2) of
    d0 V + d1 Vx + d2 Vy, which must be normalized.
    """
    d = tuple(float(x) for x in direction)
    if len(d) != 3:
        raise ValueError("direction needs exactly three coefficients")
    if abs(d[0] ** 2 + d[1] ** 2 + d[2] ** 2 - 1.0) > ATOL_PARAMETER:
        raise ValueError("direction coefficients must satisfy sum d_i^2 = 1")
    c1 = complex(c1)
    if abs(abs(c1) - 1.0) > ATOL_PARAMETER:
        raise ValueError("|c1| must equal 1")

    labels = set(layout.labels)
    members: dict[str, Observable] = {}

    def put(name: str, matrix: np.ndarray, target: str) -> None:
        op = Observable(SpaceLayout.of(target), matrix, name=name)
        members[name] = embed_operator(op, [target], layout)

    if SYSTEM in labels:
        put("S_z", PAULI_Z / 2.0, SYSTEM)
        put("S_x", PAULI_X / 2.0, SYSTEM)
        put("S_y", PAULI_Y / 2.0, SYSTEM)
        put("S_a", conjugate_spin_matrix(gamma), SYSTEM)
    if DETECTOR in labels:
        put("Q", PAULI_Z, DETECTOR)
        put("Q_x", PAULI_X, DETECTOR)
        put("Q_y", PAULI_Y, DETECTOR)
    if OBSERVER in labels:
        put("V", PAULI_Z, OBSERVER)
        put("V_x", PAULI_X, OBSERVER)
        put("V_y", PAULI_Y, OBSERVER)
        put("A", d[0] * PAULI_Z + d[1] * PAULI_X + d[2] * PAULI_Y, OBSERVER)
    if SYSTEM in labels and DETECTOR in labels:
        sz_q = Observable(
            SpaceLayout.of(SYSTEM, DETECTOR),
            np.kron(PAULI_Z / 2.0, PAULI_Z),
            name="SzQ",
        )
        members["SzQ"] = embed_operator(sz_q, [SYSTEM, DETECTOR], layout)
        members["B_SD"] = interference_operator(
            layout, c1, factors=(SYSTEM, DETECTOR)
        )
    if labels.issuperset(CHAIN_LABELS):
        members["B"] = interference_operator(layout, c1, factors=CHAIN_LABELS)

    return ObservableZoo(
        members=MappingProxyType(members), gamma=gamma, c1=c1, direction=d
    )


def conjugate_spin_matrix(gamma: float) -> np.ndarray:
    """Spin component conjugate to S_z at quantum phase ``gamma``."""
    return (math.cos(gamma) * PAULI_X + math.sin(gamma) * PAULI_Y) / 2.0


def measurement_chain_state(
    a1: complex, a2: complex, include_observer: bool = True
) -> StateVector:
    """Premeasured chain state for amplitudes (a1, a2).

    Runs the detector interaction, then (optionally) the observer
    interaction, from both pointers' ready states.
    """
    state = tensor_state([prepare_system(a1, a2), pointer_ready(DETECTOR)])
    state = premeasure(state, SYSTEM, DETECTOR)
    if include_observer:
        state = tensor_state([state, pointer_ready(OBSERVER)])
        state = premeasure(state, DETECTOR, OBSERVER)
    return state
