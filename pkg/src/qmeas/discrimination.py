"""Distinguishability metrics and the observable no-go search.

The overlap K of two states under an observable is the intersection of
their outcome distributions, sum over spectral groups of min(w1, w2): 1
means the observable cannot tell the states apart even statistically, 0
means it separates them event by event.  The purity rate is the
conjugate-spin signature 2|<S_a>| that distinguishes a pure qubit state
from the matched mixture.

The no-go search scans observable families for an operator having the
entangled chain state and both branch states as eigenstates with distinct
eigenvalues; with both branch amplitudes nonzero no such operator exists,
and the search also verifies the linear identity that forces the
eigenvalues to coincide.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .hilbert import (
    DEFAULT_EIGENSTATE_TOL,
    DensityMatrix,
    Observable,
    SpaceLayout,
    StateVector,
    embed_operator,
    expectation,
    is_eigenstate,
    outcome_distribution,
    partial_trace,
)
from .model import (
    DETECTOR,
    OBSERVER,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    branch_state,
    conjugate_spin_matrix,
    interference_operator,
    measurement_chain_state,
    prepare_system,
    zoo,
)
from .ensembles import Gemenge, mixture_density

State = StateVector | DensityMatrix

DISTINCTNESS_THRESHOLD = 1e-6   # eigenvalue separation that counts as discrimination
DEGENERATE_AMPLITUDE = 1e-12    # |a1 a2| below this is out of the no-go regime
INDETERMINATE_PURITY = 1e-10    # below this the optimal phase is meaningless
MIN_NOGO_SAMPLES = 10_000
MIN_PHASE_GRID = 3600
MIN_DIRECTIONS = 1000
ATOL_ORTHONORMAL = 1e-9


@dataclass(frozen=True)
class OverlapReport:
    """Outcome-distribution intersection of two states under one observable."""

    observable_name: str
    k_value: float
    weights: tuple[tuple[float, float, float], ...]  # (eigenvalue, w1, w2)


def overlap(obs: Observable, state1: State, state2: State) -> OverlapReport:
    """K = sum over spectral groups of min(w1, w2); 1 iff the distributions agree."""
    dist1 = outcome_distribution(state1, obs)
    dist2 = outcome_distribution(state2, obs)
    rows = tuple(
        (eigenvalue, w1, w2) for (eigenvalue, w1), (_, w2) in zip(dist1, dist2)
    )
    k = float(sum(min(w1, w2) for _, w1, w2 in rows))
    return OverlapReport(obs.name or "G", k, rows)


def _single_qubit(state: State) -> None:
    if state.layout.n_factors != 1:
        raise ValueError("purity rate is defined on a single-qubit state")


def purity_rate(rho_s: State, gamma: float) -> float:
    """Pure-vs-mixed signature 2|<S_a(gamma)>|, between 0 and 1."""
    _single_qubit(rho_s)
    op = Observable(rho_s.layout, conjugate_spin_matrix(gamma), name="S_a")
    return 2.0 * abs(expectation(rho_s, op))


@dataclass(frozen=True)
class PhaseScanResult:
    """Outcome of the purity-rate phase scan; gamma is None when indeterminate."""

    gamma: float | None
    purity: float


def _refine_extremum(
    f: Callable[[float], float], lo: float, hi: float, minimize: bool, iters: int = 80
) -> tuple[float, float]:
    for _ in range(iters):
        third = (hi - lo) / 3.0
        m1, m2 = lo + third, hi - third
        f1, f2 = f(m1), f(m2)
        better = f1 < f2 if minimize else f1 > f2
        if better:
            hi = m2
        else:
            lo = m1
    x = 0.5 * (lo + hi)
    return x, f(x)


def optimal_phase(rho_s: State, n_grid: int = MIN_PHASE_GRID) -> PhaseScanResult:
    """Grid scan plus local refinement of the purity rate over the phase.

    The returned phase is canonicalized so the conjugate-spin expectation is
    nonnegative there; a maximally mixed input has no meaningful maximizer
    and is reported with ``gamma=None``.
    """
    _single_qubit(rho_s)
    if n_grid < MIN_PHASE_GRID:
        raise ValueError(f"phase grid needs at least {MIN_PHASE_GRID} points")
    grid = np.linspace(0.0, 2.0 * math.pi, n_grid, endpoint=False)
    values = [purity_rate(rho_s, g) for g in grid]
    best = int(np.argmax(values))
    step = 2.0 * math.pi / n_grid
    gamma, purity = _refine_extremum(
        lambda g: purity_rate(rho_s, g), grid[best] - step, grid[best] + step,
        minimize=False,
    )
    if purity <= INDETERMINATE_PURITY:
        return PhaseScanResult(gamma=None, purity=purity)
    op = Observable(rho_s.layout, conjugate_spin_matrix(gamma), name="S_a")
    if expectation(rho_s, op) < 0.0:
        gamma -= math.pi
    return PhaseScanResult(gamma=float(gamma % (2.0 * math.pi)), purity=purity)


def _check_branches(branches: Sequence[StateVector]) -> tuple[StateVector, StateVector]:
    if len(branches) != 2:
        raise ValueError("exactly two branch states required")
    b1, b2 = branches
    if b1.layout != b2.layout:
        raise ValueError("branch states must share one layout")
    if abs(np.vdot(b1.amplitudes, b2.amplitudes)) > ATOL_ORTHONORMAL:
        raise ValueError("branch states must be orthonormal")
    return b1, b2


def _eigen_triple(
    op: Observable,
    target: StateVector,
    branches: tuple[StateVector, StateVector],
    tol: float,
) -> tuple[float, float, float] | None:
    """Eigenvalues (g0, g1, g2) when all three states pass the eigenstate test."""
    g0 = is_eigenstate(op, target, tol)
    if g0 is None:
        return None
    g1 = is_eigenstate(op, branches[0], tol)
    if g1 is None:
        return None
    g2 = is_eigenstate(op, branches[1], tol)
    if g2 is None:
        return None
    return g0, g1, g2


def eigen_discrimination_test(
    op: Observable,
    target: StateVector,
    branches: Sequence[StateVector],
    tol: float = DEFAULT_EIGENSTATE_TOL,
) -> tuple[float, float, float] | None:
    """Eigenvalue triple when ``op`` separates the target from both branches.

    Present only when target and branches are all eigenstates of ``op`` at
    ``tol`` and the target eigenvalue differs from both branch eigenvalues by
    more than the distinctness threshold.
    """
    b1, b2 = _check_branches(branches)
    triple = _eigen_triple(op, target, (b1, b2), tol)
    if triple is None:
        return None
    g0, g1, g2 = triple
    if min(abs(g0 - g1), abs(g0 - g2)) <= DISTINCTNESS_THRESHOLD:
        return None
    return triple


@dataclass(frozen=True)
class SamplingPlan:
    """Candidate counts for the no-go search: deterministic grid plus random draws."""

    n_grid: int
    n_random: int

    def __post_init__(self):
        if self.n_grid < 0 or self.n_random < 0:
            raise ValueError("sample counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.n_grid + self.n_random


@dataclass(frozen=True)
class ForcingCheck:
    """Numerical record of the identity that forces equal eigenvalues.

    For Hermitian G with both branches as exact eigenvectors,
    G psi = a1 g1 psi_1 + a2 g2 psi_2, so the eigenstate residual of psi
    equals |g1 - g2| |a1| |a2|; whenever psi passes the eigenstate test that
    product is bounded by the tolerance.
    """

    n_samples: int
    max_substitution_residual: float
    max_forced_gap: float


@dataclass(frozen=True)
class DiscriminationVerdict:
    """Result of one no-go scan over an observable family."""

    family_description: str
    n_candidates_tested: int
    found: bool
    witness: tuple | None
    max_min_gap: float
    out_of_regime: bool = False
    forcing: ForcingCheck | None = None


def fibonacci_sphere(n: int) -> np.ndarray:
    """n nearly uniform unit vectors on the 2-sphere, deterministic."""
    k = np.arange(n, dtype=float)
    golden = math.pi * (3.0 - math.sqrt(5.0))
    z = 1.0 - 2.0 * (k + 0.5) / n
    radius = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    theta = golden * k
    return np.stack([z, np.cos(theta) * radius, np.sin(theta) * radius], axis=1)


def _pointer_algebra_matrix(direction: np.ndarray) -> np.ndarray:
    d0, d1, d2 = direction
    return d0 * PAULI_Z + d1 * PAULI_X + d2 * PAULI_Y


def forcing_check(
    states: tuple[StateVector, StateVector, StateVector],
    n_samples: int = 1000,
    seed: int = 0,
    tol: float = DEFAULT_EIGENSTATE_TOL,
) -> ForcingCheck:
    """Sample Hermitian G with the branches as exact eigenvectors and record
    the substitution residual and the forced eigenvalue gap."""
    psi, b1, b2 = states
    dim = psi.layout.total_dim
    a1 = complex(np.vdot(b1.amplitudes, psi.amplitudes))
    a2 = complex(np.vdot(b2.amplitudes, psi.amplitudes))
    p1 = np.outer(b1.amplitudes, b1.amplitudes.conj())
    p2 = np.outer(b2.amplitudes, b2.amplitudes.conj())
    complement = np.eye(dim) - p1 - p2
    rng = np.random.default_rng(seed)
    max_residual = 0.0
    max_gap = 0.0
    for k in range(n_samples):
        g1, g2 = rng.normal(size=2)
        if k % 2 == 0:
            g2 = g1  # exercise the branch where the target passes the test
        raw = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        block = complement @ ((raw + raw.conj().T) / 2.0) @ complement
        matrix = g1 * p1 + g2 * p2 + block
        op = Observable(psi.layout, matrix)
        forced = a1 * g1 * b1.amplitudes + a2 * g2 * b2.amplitudes
        residual = float(np.linalg.norm(op.matrix @ psi.amplitudes - forced))
        max_residual = max(max_residual, residual)
        if is_eigenstate(op, psi, tol) is not None:
            max_gap = max(max_gap, abs(g1 - g2) * abs(a1) * abs(a2))
    return ForcingCheck(n_samples, max_residual, max_gap)


def nogo_search(
    layout_scope: str,
    states: tuple[StateVector, StateVector, StateVector],
    sampling: SamplingPlan,
    tol: float = DEFAULT_EIGENSTATE_TOL,
    seed: int = 0,
    forcing_samples: int = 1000,
) -> DiscriminationVerdict:
    """Scan an observable family for a discriminating operator.

    ``layout_scope`` selects the family: "O" and "D" scan the pointer
    algebra d0 P_z + d1 P_x + d2 P_y of that factor over the unit sphere of
    coefficients (grid plus random points); "MS" scans random Hermitian
    matrices on the whole space together with the structured observable set.
    ``states`` is the entangled chain state followed by its two branches.

    The verdict reports whether any candidate separates the chain state from
    both branches, the largest eigenvalue gap among candidates for which all
    three states passed the eigenstate test, and the forcing-identity record.
    With a vanishing branch amplitude the scan is skipped and flagged
    out of regime, where discrimination is trivially possible.
    """
    if layout_scope not in ("O", "D", "MS"):
        raise ValueError("layout_scope must be one of 'O', 'D', 'MS'")
    if sampling.total < MIN_NOGO_SAMPLES:
        raise ValueError(f"no-go sampling needs at least {MIN_NOGO_SAMPLES} candidates")
    psi, b1, b2 = states
    b1, b2 = _check_branches((b1, b2))
    if psi.layout != b1.layout:
        raise ValueError("target and branches must share one layout")
    a1 = complex(np.vdot(b1.amplitudes, psi.amplitudes))
    a2 = complex(np.vdot(b2.amplitudes, psi.amplitudes))
    if abs(a1 * a2) <= DEGENERATE_AMPLITUDE:
        return DiscriminationVerdict(
            family_description=(
                f"scope {layout_scope}: skipped, branch amplitude vanishes "
                "(out of the no-go regime; a pointer observable discriminates trivially)"
            ),
            n_candidates_tested=0,
            found=False,
            witness=None,
            max_min_gap=0.0,
            out_of_regime=True,
            forcing=None,
        )

    rng = np.random.default_rng(seed)
    dim = psi.layout.total_dim

    def candidates():
        if layout_scope in ("O", "D"):
            label = OBSERVER if layout_scope == "O" else DETECTOR
            sub = SpaceLayout.of(label)
            directions = fibonacci_sphere(sampling.n_grid)
            for row in directions:
                op = Observable(sub, _pointer_algebra_matrix(row), name="A")
                yield embed_operator(op, [label], psi.layout), tuple(row)
            for _ in range(sampling.n_random):
                row = rng.normal(size=3)
                row /= np.linalg.norm(row)
                op = Observable(sub, _pointer_algebra_matrix(row), name="A")
                yield embed_operator(op, [label], psi.layout), tuple(row)
        else:
            structured = dict(zoo(psi.layout).members)
            structured["I"] = Observable(psi.layout, np.eye(dim), name="I")
            for name, op in structured.items():
                yield op, name
            for k in range(sampling.n_random):
                raw = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
                yield Observable(psi.layout, (raw + raw.conj().T) / 2.0), f"random[{k}]"

    if layout_scope == "O":
        family = (
            f"observer pointer algebra on the coefficient sphere "
            f"({sampling.n_grid} grid + {sampling.n_random} random points)"
        )
    elif layout_scope == "D":
        family = (
            f"detector pointer algebra on the coefficient sphere "
            f"({sampling.n_grid} grid + {sampling.n_random} random points)"
        )
    else:
        family = (
            f"random Hermitian matrices of dim {dim} plus the structured "
            f"observable set ({sampling.n_random} random points)"
        )

    n_tested = 0
    found = False
    witness = None
    max_min_gap = 0.0
    for op, params in candidates():
        n_tested += 1
        triple = _eigen_triple(op, psi, (b1, b2), tol)
        if triple is None:
            continue
        g0, g1, g2 = triple
        gap = min(abs(g0 - g1), abs(g0 - g2))
        max_min_gap = max(max_min_gap, gap)
        if gap > DISTINCTNESS_THRESHOLD:
            found = True
            witness = (params, g0, g1, g2)
            break

    forcing = forcing_check((psi, b1, b2), forcing_samples, seed=seed + 1, tol=tol)
    return DiscriminationVerdict(
        family_description=family,
        n_candidates_tested=n_tested,
        found=found,
        witness=witness,
        max_min_gap=max_min_gap,
        out_of_regime=False,
        forcing=forcing,
    )


@dataclass(frozen=True)
class InterferenceReport:
    """Spectrum, expectations and overlap of one interference operator."""

    scope: str
    c1: complex
    b_eigenvalues: tuple[float, ...]
    expectation_pure: float
    expectation_mixed: float
    k_value: float


def _chain_pair(a: tuple[complex, complex], scope: str):
    """Premeasured pure state and matched branch mixture for a scope."""
    a1, a2 = a
    include_observer = scope == "MS"
    pure = measurement_chain_state(a1, a2, include_observer=include_observer)
    layout = pure.layout
    mixture = mixture_density(
        Gemenge(
            (
                (branch_state(1, layout), abs(a1) ** 2),
                (branch_state(2, layout), abs(a2) ** 2),
            )
        )
    )
    return pure, mixture


def interference_analysis(
    c1: complex, a: tuple[complex, complex], scope: str = "MS"
) -> InterferenceReport:
    """Interference-term diagnostics on the premeasured chain.

    Builds the joint flip operator at phase ``c1`` over the chain factors of
    the scope ("MS" or "SD"), and reports its spectrum, its expectation on
    the entangled pure state and on the matched branch mixture, and the
    overlap between the two outcome distributions.
    """
    if scope not in ("MS", "SD"):
        raise ValueError("scope must be 'MS' or 'SD'")
    pure, mixture = _chain_pair(a, scope)
    factors = ("S", "D", "O") if scope == "MS" else ("S", "D")
    op = interference_operator(pure.layout, c1, factors=factors)
    return InterferenceReport(
        scope=scope,
        c1=complex(c1),
        b_eigenvalues=op.eigenvalues,
        expectation_pure=expectation(pure, op),
        expectation_mixed=expectation(mixture, op),
        k_value=overlap(op, pure, mixture).k_value,
    )


def interference_phase_scan(
    a: tuple[complex, complex], scope: str = "MS", n_grid: int = MIN_PHASE_GRID
) -> tuple[float, float]:
    """Phase of the interference term minimizing the pure/mixed overlap.

    Scans c1 = exp(i phase) over a uniform grid with local refinement and
    returns (phase, minimal K).
    """
    if n_grid < MIN_PHASE_GRID:
        raise ValueError(f"phase grid needs at least {MIN_PHASE_GRID} points")
    pure, mixture = _chain_pair(a, scope)
    factors = ("S", "D", "O") if scope == "MS" else ("S", "D")

    def k_of(phase: float) -> float:
        op = interference_operator(pure.layout, np.exp(1j * phase), factors=factors)
        return overlap(op, pure, mixture).k_value

    grid = np.linspace(0.0, 2.0 * math.pi, n_grid, endpoint=False)
    values = [k_of(p) for p in grid]
    best = int(np.argmin(values))
    step = 2.0 * math.pi / n_grid
    phase, k_min = _refine_extremum(
        k_of, grid[best] - step, grid[best] + step, minimize=True
    )
    return float(phase % (2.0 * math.pi)), float(k_min)


@dataclass(frozen=True)
class ChannelInformationReport:
    """Input-side vs detector-side distinguishability of the pure/mixed pair."""

    k_sz_eigenstates: float
    pre_channel_gamma: float
    pre_channel_k_min: float
    post_channel_k_min: float
    n_gamma: int
    n_directions: int


def channel_information(
    a: tuple[complex, complex],
    n_gamma: int = MIN_PHASE_GRID,
    n_directions: int = MIN_DIRECTIONS,
) -> ChannelInformationReport:
    """Overlap accounting across the measurement channel.

    Reports the overlap of the two incoming basis states under the measured
    spin component (zero: one full bit), the minimal input-side overlap of
    the pure state against the matched mixture over the conjugate-spin
    sweep, and the minimal detector-side overlap over a sphere of detector
    observables after premeasurement (one: nothing about purity arrives).
    """
    if n_gamma < MIN_PHASE_GRID:
        raise ValueError(f"phase grid needs at least {MIN_PHASE_GRID} points")
    if n_directions < MIN_DIRECTIONS:
        raise ValueError(f"direction sweep needs at least {MIN_DIRECTIONS} points")
    a1, a2 = a
    system_layout = SpaceLayout.of("S")
    sz = Observable(system_layout, PAULI_Z / 2.0, name="S_z")
    up = prepare_system(1, 0)
    down = prepare_system(0, 1)
    k_sz = overlap(sz, up, down).k_value

    pure = prepare_system(a1, a2)
    mixture = mixture_density(
        Gemenge(((up, abs(a1) ** 2), (down, abs(a2) ** 2)))
    )

    def k_of_gamma(gamma: float) -> float:
        op = Observable(system_layout, conjugate_spin_matrix(gamma), name="S_a")
        return overlap(op, pure, mixture).k_value

    grid = np.linspace(0.0, 2.0 * math.pi, n_gamma, endpoint=False)
    values = [k_of_gamma(g) for g in grid]
    best = int(np.argmin(values))
    step = 2.0 * math.pi / n_gamma
    gamma, pre_k = _refine_extremum(
        k_of_gamma, grid[best] - step, grid[best] + step, minimize=True
    )

    pure_sd, mixed_sd = _chain_pair((a1, a2), "SD")
    pure_d = partial_trace(pure_sd, [DETECTOR])
    mixed_d = partial_trace(mixed_sd, [DETECTOR])
    detector_layout = SpaceLayout.of(DETECTOR)
    post_k = 1.0
    for row in fibonacci_sphere(n_directions):
        op = Observable(detector_layout, _pointer_algebra_matrix(row), name="Q(n)")
        post_k = min(post_k, overlap(op, pure_d, mixed_d).k_value)

    return ChannelInformationReport(
        k_sz_eigenstates=k_sz,
        pre_channel_gamma=float(gamma % (2.0 * math.pi)),
        pre_channel_k_min=float(pre_k),
        post_channel_k_min=float(post_k),
        n_gamma=n_gamma,
        n_directions=n_directions,
    )
