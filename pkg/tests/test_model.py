import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmeas.hilbert import (
    InvariantViolation,
    SpaceLayout,
    expectation,
    is_eigenstate,
    partial_trace,
    tensor_state,
)
from qmeas.model import (
    ModelConfig,
    branch_state,
    decohere,
    interference_operator,
    measurement_chain_state,
    ms_layout,
    pointer_ready,
    premeasure,
    prepare_system,
    zoo,
)

from _helpers import random_amplitude_pair

SQ2 = 1 / math.sqrt(2)
SDO = ms_layout()
SD = SpaceLayout.of("S", "D")


def amplitude_grid():
    thetas = np.linspace(0.05, np.pi / 2 - 0.05, 7)
    phases = [0.0, np.pi / 3, np.pi]
    return [
        (math.cos(t), math.sin(t) * np.exp(1j * p)) for t in thetas for p in phases
    ]


# -------------------------------------------------------------- ModelConfig

def test_config_rejects_non_normalized_amplitudes():
    with pytest.raises(InvariantViolation):
        ModelConfig(a1=1.0, a2=1.0)


def test_config_rejects_bad_env_overlap():
    with pytest.raises(ValueError, match="env_overlap"):
        ModelConfig(a1=1.0, a2=0.0, env_overlap=1.5)


def test_config_born_weights():
    cfg = ModelConfig(a1=0.6, a2=0.8)
    assert cfg.born_weights == pytest.approx((0.36, 0.64))


# ----------------------------------------------------------- prepare_system

def test_prepare_eigenstate():
    assert np.allclose(prepare_system(1, 0).amplitudes, [1, 0])


def test_prepare_symmetric_superposition_has_zero_sz():
    psi = prepare_system(SQ2, SQ2)
    sz = zoo(psi.layout)["S_z"]
    assert expectation(psi, sz) == pytest.approx(0.0, abs=1e-12)


def test_prepare_asymmetric_sz_expectation():
    psi = prepare_system(0.6, 0.8)
    sz = zoo(psi.layout)["S_z"]
    assert expectation(psi, sz) == pytest.approx(-0.14, abs=1e-12)


def test_prepare_rejects_non_normalized():
    with pytest.raises(InvariantViolation):
        prepare_system(0.9, 0.9)


# --------------------------------------------------------------- premeasure

def test_premeasure_eigenstate_gives_product_state():
    state = tensor_state([prepare_system(1, 0), pointer_ready("D")])
    out = premeasure(state, "S", "D")
    assert np.allclose(out.amplitudes, [1, 0, 0, 0], atol=1e-12)


def test_premeasure_superposition_gives_entangled_state():
    a1, a2 = 0.6, 0.8
    state = tensor_state([prepare_system(a1, a2), pointer_ready("D")])
    out = premeasure(state, "S", "D")
    assert np.allclose(out.amplitudes, [a1, 0, 0, a2], atol=1e-12)


def test_premeasure_twice_gives_triple_chain():
    for a1, a2 in [(SQ2, SQ2), (0.6, 0.8), (0.6, 0.8j)]:
        out = measurement_chain_state(a1, a2)
        expected = np.zeros(8, dtype=complex)
        expected[0] = a1
        expected[7] = a2
        assert np.allclose(out.amplitudes, expected, atol=1e-12)


def test_premeasure_requires_ready_pointer():
    state = tensor_state([prepare_system(SQ2, SQ2), pointer_ready("D")])
    once = premeasure(state, "S", "D")
    with pytest.raises(ValueError, match="ready state"):
        premeasure(once, "S", "D")


def test_premeasure_rejects_same_factor():
    state = tensor_state([prepare_system(1, 0), pointer_ready("D")])
    with pytest.raises(ValueError, match="different factors"):
        premeasure(state, "D", "D")


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=40)
def test_premeasure_is_linear_and_norm_preserving(seed):
    rng = np.random.default_rng(seed)
    phi = rng.normal(size=2) + 1j * rng.normal(size=2)
    chi = rng.normal(size=2) + 1j * rng.normal(size=2)
    phi /= np.linalg.norm(phi)
    chi /= np.linalg.norm(chi)
    alpha, beta = rng.normal(size=2) + 1j * rng.normal(size=2)
    combo = alpha * phi + beta * chi
    scale = np.linalg.norm(combo)
    if scale < 1e-6:
        return

    def premeasured(sys_amps):
        state = tensor_state(
            [prepare_system(sys_amps[0], sys_amps[1]), pointer_ready("D")]
        )
        return premeasure(state, "S", "D").amplitudes

    lhs = premeasured(combo / scale) * scale
    rhs = alpha * premeasured(phi) + beta * premeasured(chi)
    assert np.allclose(lhs, rhs, atol=1e-12)
    assert abs(np.linalg.norm(premeasured(phi)) - 1.0) <= 1e-12


# ------------------------------------------------------------- branch_state

def test_branch_states_are_the_extreme_basis_vectors():
    b1 = branch_state(1, SDO)
    b2 = branch_state(2, SDO)
    assert b1.amplitudes[0] == 1.0 and np.count_nonzero(b1.amplitudes) == 1
    assert b2.amplitudes[7] == 1.0 and np.count_nonzero(b2.amplitudes) == 1
    assert np.vdot(b1.amplitudes, b2.amplitudes) == 0.0


def test_branch_states_with_environment_stay_orthogonal():
    layout = ms_layout(3)
    b1 = branch_state(1, layout, env_overlap=0.7)
    b2 = branch_state(2, layout, env_overlap=0.7)
    assert abs(np.vdot(b1.amplitudes, b2.amplitudes)) <= 1e-12


def test_branch_state_requires_env_overlap_for_env_layouts():
    with pytest.raises(ValueError, match="env_overlap"):
        branch_state(1, ms_layout(2))


def test_branch_state_rejects_bad_index():
    with pytest.raises(ValueError, match="branch"):
        branch_state(3, SDO)


def test_chain_state_is_branch_combination():
    for a1, a2 in amplitude_grid():
        psi = measurement_chain_state(a1, a2)
        combo = a1 * branch_state(1, SDO).amplitudes + a2 * branch_state(2, SDO).amplitudes
        assert np.allclose(psi.amplitudes, combo, atol=1e-12)


def test_triple_decomposition_spectra_match_born_weights():
    rng = np.random.default_rng(42)
    for _ in range(20):
        a1, a2 = random_amplitude_pair(rng)
        psi = measurement_chain_state(a1, a2)
        expected = sorted([abs(a1) ** 2, abs(a2) ** 2])
        for label in ("S", "D", "O"):
            reduced = partial_trace(psi, [label])
            spectrum = sorted(np.linalg.eigvalsh(reduced.matrix))
            assert np.allclose(spectrum, expected, atol=1e-12)


def test_sz_q_product_is_degenerate_on_every_entangled_state():
    sz_q = zoo(SD)["SzQ"]
    values = []
    for a1, a2 in amplitude_grid():
        psi = measurement_chain_state(a1, a2, include_observer=False)
        lam = is_eigenstate(sz_q, psi, tol=1e-9)
        assert lam is not None
        values.append(lam)
    assert np.allclose(values, 0.5, atol=1e-12)


# ----------------------------------------------------------------- decohere

def test_decohere_eigenstate_branch_stays_pure():
    psi = measurement_chain_state(1, 0)
    out = decohere(psi, n_env=4, env_overlap=0.3)
    reduced = partial_trace(out, ["S", "D", "O"])
    assert reduced.purity() == pytest.approx(1.0, abs=1e-12)


def test_decohere_scales_coherence_block():
    psi = measurement_chain_state(SQ2, SQ2)
    out = decohere(psi, n_env=5, env_overlap=0.5)
    assert out.layout.labels == ("S", "D", "O", "E1", "E2", "E3", "E4", "E5")

    # oracle: trace out the environment directly with tensordot
    tensor = out.amplitudes.reshape((2,) * 8)
    env_axes = (3, 4, 5, 6, 7)
    rho = np.tensordot(tensor, tensor.conj(), axes=(env_axes, env_axes)).reshape(8, 8)
    factor = rho[0, 7] / (SQ2 * SQ2)
    assert factor == pytest.approx(0.03125, abs=1e-12)

    reduced = partial_trace(out, ["S", "D", "O"])
    assert reduced.matrix[0, 7] / (SQ2 * SQ2) == pytest.approx(0.03125, abs=1e-12)


def test_decohere_with_unit_overlap_is_invisible():
    psi = measurement_chain_state(0.6, 0.8)
    out = decohere(psi, n_env=3, env_overlap=1.0)
    reduced = partial_trace(out, ["S", "D", "O"])
    assert np.allclose(reduced.matrix, psi.density().matrix, atol=1e-12)


@pytest.mark.parametrize("overlap", [0.0, 0.25, 0.5, 0.75, 1.0])
@pytest.mark.parametrize("n_env", [1, 4, 10])
def test_decohere_coherence_factor_formula(n_env, overlap):
    a1, a2 = 0.6, 0.8
    psi = measurement_chain_state(a1, a2)
    reduced = partial_trace(decohere(psi, n_env, overlap), ["S", "D", "O"])
    assert abs(reduced.matrix[0, 7] / (a1 * a2) - overlap**n_env) <= 1e-10


def test_decohere_validates_arguments():
    psi = measurement_chain_state(1, 0)
    with pytest.raises(ValueError, match="n_env"):
        decohere(psi, 0, 0.5)
    with pytest.raises(ValueError, match="env_overlap"):
        decohere(psi, 2, -0.1)
    once = decohere(psi, 2, 0.5)
    with pytest.raises(ValueError, match="already contains"):
        decohere(once, 2, 0.5)


# ------------------------------------------------------------------- zoo

def test_zoo_gamma_zero_matches_sx():
    z = zoo(SDO, gamma=0.0)
    assert np.allclose(z["S_a"].matrix, z["S_x"].matrix, atol=1e-15)


def test_zoo_trivial_direction_matches_v():
    z = zoo(SDO, direction=(1.0, 0.0, 0.0))
    assert np.allclose(z["A"].matrix, z["V"].matrix, atol=1e-15)


def test_zoo_interference_expectation_on_symmetric_chain():
    psi = measurement_chain_state(SQ2, SQ2)
    b = zoo(SDO, c1=1.0)["B"]
    assert expectation(psi, b) == pytest.approx(1.0, abs=1e-12)


def test_zoo_pointer_commutators():
    z = zoo(SpaceLayout.of("O"))
    v, vx, vy = z["V"].matrix, z["V_x"].matrix, z["V_y"].matrix
    assert np.allclose(v @ vx - vx @ v, 2j * vy, atol=1e-12)
    assert np.allclose(v @ vy - vy @ v, -2j * vx, atol=1e-12)


def test_zoo_rejects_bad_parameters():
    with pytest.raises(ValueError, match="d_i"):
        zoo(SDO, direction=(1.0, 1.0, 0.0))
    with pytest.raises(ValueError, match="c1"):
        zoo(SDO, c1=2.0)


def test_zoo_membership_follows_layout():
    z = zoo(SD)
    assert "Q" in z and "B_SD" in z and "SzQ" in z
    assert "V" not in z and "B" not in z
    with pytest.raises(KeyError, match="available"):
        z["B"]


def test_interference_operator_rejects_inconsistent_phases():
    with pytest.raises(ValueError, match="conj"):
        interference_operator(SDO, c1=1.0, c2=1j)
    with pytest.raises(ValueError, match=r"\|c1\|"):
        interference_operator(SDO, c1=0.5)


def test_interference_operator_matches_outer_product_construction():
    # oracle: assemble from explicit dyads on the two extreme basis vectors
    c1 = np.exp(1j * 0.7)
    e0 = np.zeros(8)
    e0[0] = 1.0
    e7 = np.zeros(8)
    e7[7] = 1.0
    direct = c1 * np.outer(e0, e7) + np.conj(c1) * np.outer(e7, e0)
    op = interference_operator(SDO, c1)
    assert np.allclose(op.matrix, direct, atol=1e-15)
