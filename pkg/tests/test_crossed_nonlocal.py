import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import seeds
from telelab.crossed_nonlocal import (
    ModularOutcome,
    correction_lookup,
    joint_projection_probabilities,
    modular_sum_probabilities,
    nonlocal_modular_sum,
    product_observable_probabilities,
    staged_commuting_probabilities,
    two_way_outcome_probabilities,
    two_way_teleport,
)
from telelab.quantum_core import (
    BELL_ORDER,
    PAULIS,
    BellLabel,
    InvalidInput,
    apply_gate,
    bell_state,
    fidelity,
    pauli_match,
    qubit,
    random_state,
    tensor,
)

OUTCOMES = [ModularOutcome(z, x) for z in (0, 2) for x in (0, 2)]
ALL_READINGS = list(itertools.product((0, 1), repeat=4))


def _pair(seed):
    rng = np.random.default_rng(seed)
    return random_state(rng, ["x"]), random_state(rng, ["y"])


def test_modular_outcome_domain():
    with pytest.raises(InvalidInput):
        ModularOutcome(1, 0)


def test_aligned_spins_sum_to_two():
    s = tensor(qubit(1, 0, "a"), qubit(1, 0, "b"))
    z, _ = nonlocal_modular_sum(s, "sigma_z", "a", "b", 0)
    assert z == 2


def test_singlet_sums_to_zero():
    s = bell_state(BellLabel.PSI_MINUS, ("a", "b"))
    assert abs(modular_sum_probabilities(s, "sigma_z", "a", "b")[0] - 1) < 1e-12
    z, post = nonlocal_modular_sum(s, "sigma_z", "a", "b", 5)
    assert z == 0 and abs(fidelity(post, s) - 1) < 1e-10


@pytest.mark.parametrize("obs", ["sigma_z", "sigma_x"])
@pytest.mark.parametrize("ancilla", BELL_ORDER)
def test_modular_sum_matches_product_projection(obs, ancilla):
    rng = np.random.default_rng(0)
    for _ in range(100):
        s = random_state(rng, ["a", "b"])
        got = modular_sum_probabilities(s, obs, "a", "b", ancilla)
        want = product_observable_probabilities(s, obs, "a", "b")
        assert max(abs(got[k] - want[k]) for k in (0, 2)) < 1e-10


@given(seeds, st.sampled_from(["sigma_z", "sigma_x"]))
def test_modular_sum_leaves_ideal_projection(seed, obs):
    # The post-measurement state must lie in the measured parity sector unchanged.
    s = random_state(np.random.default_rng(seed), ["a", "b", "c"])
    value, post = nonlocal_modular_sum(s, obs, "a", "b", seed)
    o = PAULIS["Z" if obs == "sigma_z" else "X"]
    sign = 1 if value == 2 else -1
    proj = (np.eye(4) + sign * np.kron(o, o)) / 2
    amps = np.kron(proj, np.eye(2)) @ s.amplitudes
    amps /= np.linalg.norm(amps)
    assert abs(abs(np.vdot(amps, post.amplitudes)) ** 2 - 1) < 1e-10


def test_staged_statistics_match_joint_projection():
    rng = np.random.default_rng(1)
    for _ in range(100):
        s = random_state(rng, ["a", "b"])
        got = staged_commuting_probabilities(s, "a", "b")
        want = joint_projection_probabilities(s, "a", "b")
        tv = 0.5 * sum(abs(got.get(k, 0) - want.get(k, 0)) for k in OUTCOMES)
        assert tv < 1e-10


@pytest.mark.parametrize("readings", ALL_READINGS)
def test_up_down_swap_every_branch(readings):
    s1, s2 = qubit(1, 0, "x"), qubit(0, 1, "y")
    probs = two_way_outcome_probabilities(s1, s2)
    res = two_way_teleport(s1, s2, readings=readings)
    assert probs[res.outcome] > 0
    f1, f2 = res.fidelities(s1, s2)
    assert f1 > 1 - 1e-10 and f2 > 1 - 1e-10


def test_random_swaps():
    rng = np.random.default_rng(2)
    for k in range(100):
        s1, s2 = random_state(rng, ["x"]), random_state(rng, ["y"])
        res = two_way_teleport(s1, s2, rng)
        f1, f2 = res.fidelities(s1, s2)
        assert min(f1, f2) > 1 - 1e-10


@given(seeds, st.sampled_from(BELL_ORDER), st.sampled_from(ALL_READINGS))
def test_swap_exact_for_every_ancilla(seed, ancilla, readings):
    s1, s2 = _pair(seed)
    res = two_way_teleport(s1, s2, readings=readings, ancilla=ancilla)
    assert min(res.fidelities(s1, s2)) > 1 - 1e-10


def test_two_singlets_consumed():
    s1, s2 = _pair(3)
    res = two_way_teleport(s1, s2, 3)
    assert res.trace.singlets_consumed == 2
    stages = [e[0] for e in res.trace.events]
    assert stages == sorted(stages)


@given(seeds)
def test_outcomes_uniform(seed):
    s1, s2 = _pair(seed)
    probs = two_way_outcome_probabilities(s1, s2)
    assert max(abs(probs[k] - 0.25) for k in OUTCOMES) < 1e-10


@given(seeds, st.sampled_from(ALL_READINGS))
def test_entanglement_is_transported(seed, readings):
    rng = np.random.default_rng(seed)
    s1 = random_state(rng, ["x", "ext"])
    s2 = random_state(rng, ["y"])
    res = two_way_teleport(s1, s2, readings=readings)
    assert min(res.fidelities(s1, s2)) > 1 - 1e-10


@pytest.mark.parametrize("ancilla", BELL_ORDER)
def test_correction_table_against_bruteforce(ancilla):
    s1, s2 = _pair(4)
    target_1, target_2 = s2.amplitudes, s1.amplitudes
    for readings in ALL_READINGS:
        res = two_way_teleport(s1, s2, readings=readings, ancilla=ancilla)
        winners = []
        for n1, n2 in itertools.product(PAULIS, repeat=2):
            out = apply_gate(apply_gate(res.uncorrected, PAULIS[n1], "p1"), PAULIS[n2], "p2")
            want = np.kron(target_1, target_2)
            if abs(abs(np.vdot(want, out.reorder(["p1", "p2"]).amplitudes)) ** 2 - 1) < 1e-10:
                winners.append((n1, n2))
        assert winners == [correction_lookup(res.outcome, ancilla).names]


def test_singlet_table_has_no_identity_pair():
    names = {correction_lookup(o).names for o in OUTCOMES}
    assert ("I", "I") not in names
    for o in OUTCOMES:
        c = correction_lookup(o)
        assert pauli_match(c.rotation_1.matrix) and pauli_match(c.rotation_2.matrix)


@pytest.mark.parametrize("ancilla", [BellLabel.PSI_PLUS, BellLabel.PHI_PLUS])
def test_some_outcome_needs_no_rotation(ancilla):
    names = [correction_lookup(o, ancilla).names for o in OUTCOMES]
    assert names.count(("I", "I")) == 1


def test_lookup_is_pure():
    assert all(correction_lookup(o).names == correction_lookup(o).names for o in OUTCOMES)
