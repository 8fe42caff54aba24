"""Gemenge construction, seeded event sampling, and the restriction maps.

A gemenge is a probabilistic mixture with an objective decomposition into
individual states; unlike a density matrix it remembers which states occur.
Sampling uses counter-based per-event streams derived from a single 64-bit
seed, so every event is reproducible and independent of every other:
identical (seed, event_index) always yields the identical record, and events
may be evaluated concurrently and aggregated in any order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hilbert import (
    DensityMatrix,
    SpaceLayout,
    StateVector,
    basis_state,
    partial_trace,
)
from .model import ModelConfig, OBSERVER, branch_state, is_env_label

ATOL_PROBABILITY = 1e-12
ATOL_BRANCH_SUPPORT = 1e-9

POINTER_VALUES = {1: 1.0, 2: -1.0}

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_INV_TWO53 = 1.0 / float(2**53)


def stream_keys(seed: int, start: int, count: int) -> np.ndarray:
    """64-bit stream key per event counter: a splitmix64 finalizer of (seed, index)."""
    if count < 0 or start < 0:
        raise ValueError("start and count must be nonnegative")
    with np.errstate(over="ignore"):
        index = np.arange(start, start + count, dtype=np.uint64)
        z = np.uint64(seed % 2**64) + (index + np.uint64(1)) * _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        z = z ^ (z >> np.uint64(31))
    return z


def stream_uniform(seed: int, start: int, count: int) -> np.ndarray:
    """Deterministic uniforms in [0, 1), one per event counter."""
    return (stream_keys(seed, start, count) >> np.uint64(11)).astype(np.float64) * _INV_TWO53


@dataclass(frozen=True, eq=False)
class Gemenge:
    """Finite list of (individual state, probability) over one layout."""

    members: tuple[tuple[StateVector, float], ...]

    def __post_init__(self):
        members = tuple((state, float(p)) for state, p in self.members)
        if not members:
            raise ValueError("a gemenge needs at least one member")
        layout = members[0][0].layout
        for state, p in members:
            if state.layout != layout:
                raise ValueError("all gemenge members must share one layout")
            if p < 0.0:
                raise ValueError(f"negative probability {p!r}")
        total = sum(p for _, p in members)
        if abs(total - 1.0) > ATOL_PROBABILITY:
            raise ValueError(f"probabilities sum to {total!r}, expected 1")
        object.__setattr__(self, "members", members)

    @property
    def layout(self) -> SpaceLayout:
        return self.members[0][0].layout

    @property
    def probabilities(self) -> tuple[float, ...]:
        return tuple(p for _, p in self.members)


@dataclass(frozen=True)
class EventRecord:
    """One sampled measurement event."""

    event_index: int
    branch: int
    pointer_value: float
    seed_stream: int


@dataclass(frozen=True)
class FrequencyReport:
    """Aggregated branch statistics of one sampled ensemble."""

    n_events: int
    counts: tuple[int, int]
    frequencies: tuple[float, float]
    born_probabilities: tuple[float, float]
    standard_errors: tuple[float, float]


def mixture_density(gemenge: Gemenge) -> DensityMatrix:
    """Density matrix of the gemenge: sum of P_i |psi_i><psi_i|."""
    dim = gemenge.layout.total_dim
    matrix = np.zeros((dim, dim), dtype=np.complex128)
    for state, p in gemenge.members:
        matrix += p * np.outer(state.amplitudes, state.amplitudes.conj())
    return DensityMatrix(gemenge.layout, matrix)


def _member_indices(gemenge: Gemenge, seed: int, start: int, count: int) -> np.ndarray:
    """0-based member index per event; the single sampling path for everything."""
    cumulative = np.cumsum(gemenge.probabilities)
    uniforms = stream_uniform(seed, start, count)
    return np.searchsorted(cumulative, uniforms, side="right")


def sample_event(gemenge: Gemenge, event_index: int, seed: int) -> EventRecord:
    """Draw one member from its keyed per-event stream; reproducible by construction."""
    if len(gemenge.members) > 2:
        raise ValueError("event records use the two-branch pointer convention")
    member = int(_member_indices(gemenge, seed, event_index, 1)[0])
    branch = member + 1
    key = int(stream_keys(seed, event_index, 1)[0])
    return EventRecord(
        event_index=event_index,
        branch=branch,
        pointer_value=POINTER_VALUES[branch],
        seed_stream=key,
    )


def collapse_gemenge(config: ModelConfig) -> Gemenge:
    """Observer-side branch gemenge with Born weights |a_i|^2."""
    layout = SpaceLayout.of(OBSERVER)
    p1, p2 = config.born_weights
    return Gemenge(
        (
            (basis_state(layout, [0]), p1),
            (basis_state(layout, [1]), p2),
        )
    )


def run_ensemble(config: ModelConfig, n_events: int) -> FrequencyReport:
    """Sample ``n_events`` collapse events and aggregate branch frequencies."""
    if n_events < 1:
        raise ValueError("n_events must be >= 1")
    gemenge = collapse_gemenge(config)
    members = _member_indices(gemenge, config.rng_seed, 0, n_events)
    n1 = int(np.count_nonzero(members == 0))
    n2 = n_events - n1
    p1, p2 = config.born_weights
    return FrequencyReport(
        n_events=n_events,
        counts=(n1, n2),
        frequencies=(n1 / n_events, n2 / n_events),
        born_probabilities=(p1, p2),
        standard_errors=(
            math.sqrt(p1 * (1.0 - p1) / n_events),
            math.sqrt(p2 * (1.0 - p2) / n_events),
        ),
    )


def restrict_statistical(
    state: StateVector | DensityMatrix, observer_label: str = OBSERVER
) -> DensityMatrix:
    """Statistical restriction: the partial trace onto the observer factor."""
    return partial_trace(state, [observer_label])


def _branch_weights(state: StateVector) -> tuple[float, float]:
    layout = state.layout
    if any(is_env_label(label) for label in layout.labels):
        raise ValueError(
            "stochastic restriction is defined on chain factors only; "
            "trace out the environment first"
        )
    c1 = np.vdot(branch_state(1, layout).amplitudes, state.amplitudes)
    c2 = np.vdot(branch_state(2, layout).amplitudes, state.amplitudes)
    p1, p2 = abs(c1) ** 2, abs(c2) ** 2
    if abs(p1 + p2 - 1.0) > ATOL_BRANCH_SUPPORT:
        raise ValueError(
            "state is not supported on the measurement branches; "
            f"branch weights sum to {p1 + p2!r}"
        )
    return p1, p2


def restrict_stochastic(
    source: Gemenge | StateVector, observer_label: str = OBSERVER
) -> Gemenge:
    """Stochastic restriction: the gemenge of observer branch states.

    A pure chain state contributes its Born weights |a_i|^2; a gemenge of
    branch states contributes each member's probability to its branch.  The
    restriction forgets everything but which observer pointer state occurs
    and how often, which is exactly what a density matrix cannot express.
    """
    source_layout = source.layout
    if observer_label not in source_layout.labels:
        raise ValueError(
            f"no factor labelled {observer_label!r} in layout {source_layout.labels}"
        )
    weights = [0.0, 0.0]
    if isinstance(source, Gemenge):
        for state, p in source.members:
            p1, p2 = _branch_weights(state)
            if max(p1, p2) < 1.0 - ATOL_BRANCH_SUPPORT:
                raise ValueError(
                    "gemenge member is not a branch state; cannot restrict stochastically"
                )
            weights[0 if p1 >= p2 else 1] += p
    else:
        p1, p2 = _branch_weights(source)
        weights = [p1, p2]

    layout = SpaceLayout.of(observer_label)
    members = tuple(
        (basis_state(layout, [branch]), weight)
        for branch, weight in enumerate(weights)
        if weight > 0.0
    )
    return Gemenge(members)
