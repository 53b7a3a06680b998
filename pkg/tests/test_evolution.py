import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from schwinger_skqd import bits
from schwinger_skqd.evolution import (
    SectorState,
    apply_trotter_step,
    evolve,
    reference_bitstring,
    reference_state,
    trotter_states,
)
from schwinger_skqd.observables import particle_number_of


def embed(state, n):
    full = np.zeros(2**n, dtype=complex)
    full[state.basis.states] = state.amplitudes
    return full


@pytest.mark.parametrize(
    "kind, n, label",
    [("0011", 4, "0011"), ("mass-ground", 6, "010101"), ("alternating-10", 4, "1010"), (0b0110, 4, "0110")],
)
def test_reference_states(kind, n, label):
    psi = reference_state(kind, n)
    b = int(label, 2)
    assert psi.amplitude(b) == 1
    assert psi.norm() == pytest.approx(1.0)
    assert np.count_nonzero(psi.amplitudes) == 1


def test_reference_particle_numbers():
    assert particle_number_of(reference_bitstring("mass-ground", 6), 6) == 0
    assert particle_number_of(reference_bitstring("alternating-10", 4), 4) == 4


@pytest.mark.parametrize("kind", ["0111", "1111", 0b0001, "nonsense"])
def test_reference_rejects_outside_sector(kind):
    with pytest.raises(ValueError):
        reference_state(kind, 4)


def test_zero_dt_is_identity():
    psi = reference_state("0011", 4)
    out = apply_trotter_step(psi, 0.0)
    np.testing.assert_array_equal(out.amplitudes, psi.amplitudes)


def test_input_not_mutated():
    psi = reference_state("0011", 4)
    before = psi.amplitudes.copy()
    apply_trotter_step(psi, 0.5)
    np.testing.assert_array_equal(psi.amplitudes, before)


@given(st.floats(-6.0, 6.0))
def test_two_site_block(dt):
    out = apply_trotter_step(reference_state("01", 2), dt)
    assert out.amplitude(0b01) == pytest.approx(np.cos(dt / 2), abs=1e-14)
    assert out.amplitude(0b10) == pytest.approx(1j * np.sin(dt / 2), abs=1e-14)


def test_n4_single_step_support():
    # one step from |0011> at dt = 0.77: |0011> dominates, |0101> next, |1001> small
    out = evolve(reference_state("0011", 4), 0.77, 1)
    probs = {bits.label(int(b), 4): p for b, p in zip(out.basis.states, out.probabilities()) if p > 1e-14}
    assert set(probs) <= {"0011", "0101", "1001"}
    assert max(probs, key=probs.get) == "0011"
    assert probs["0011"] == pytest.approx(0.8589, abs=1e-4)
    assert probs["0101"] == pytest.approx(0.1212, abs=1e-4)
    assert probs["1001"] == pytest.approx(0.0199, abs=1e-4)


def test_evolve_k0_returns_input():
    psi = reference_state("mass-ground", 6)
    assert evolve(psi, 0.3, 0) is psi


def test_evolve_recursion():
    psi = reference_state("alternating-10", 8)
    a = evolve(psi, 0.4, 5)
    b = apply_trotter_step(evolve(psi, 0.4, 4), 0.4)
    np.testing.assert_array_equal(a.amplitudes, b.amplitudes)


def test_trotter_states_generator_matches_evolve():
    psi = reference_state("mass-ground", 6)
    gen = trotter_states(psi, 0.3)
    for k in range(1, 5):
        np.testing.assert_array_equal(next(gen).amplitudes, evolve(psi, 0.3, k).amplitudes)


def test_deterministic():
    psi = reference_state("alternating-10", 10)
    np.testing.assert_array_equal(evolve(psi, 0.2, 30).amplitudes, evolve(psi, 0.2, 30).amplitudes)


@pytest.mark.parametrize("n", [2, 4, 6, 8])
@pytest.mark.parametrize("dt", [0.2, 0.77, 1.9])
def test_full_register_cross_check(n, dt):
    psi = reference_state("alternating-10", n)
    sector = evolve(psi, dt, 3)
    full = oracles.trotter_full(n, embed(psi, n), dt, steps=3)
    np.testing.assert_allclose(embed(sector, n), full, atol=1e-10)


def test_trotter_fidelity_against_exact_kinetic():
    # first-order product formula: close to, but not equal to, exp of the summed generator
    psi = reference_state("0011", 4)
    trotter = embed(evolve(psi, 0.77, 1), 4)
    exact = oracles.kinetic_exact(4, embed(psi, 4), 0.77)
    fidelity = abs(np.vdot(exact, trotter)) ** 2
    assert 0.98 < fidelity < 1.0


@settings(max_examples=10, deadline=None)
@given(st.sampled_from([4, 6, 8, 10, 12]), st.floats(0.01, 3.0))
def test_unitarity_and_weight(n, dt):
    psi = reference_state("mass-ground", n)
    state = psi
    for _ in range(100):
        state = apply_trotter_step(state, dt)
    assert abs(state.norm() - 1.0) < 1e-8
    assert all(bits.weight(int(b)) == n // 2 for b in state.basis.states)


def test_sector_state_copy_independent():
    psi = reference_state("0011", 4)
    before = psi.amplitudes.copy()
    c = psi.copy()
    c.amplitudes[:] = 0.5
    np.testing.assert_array_equal(psi.amplitudes, before)
    assert isinstance(c, SectorState)
