"""Two-way teleportation by nonlocal measurements crossed in time.

Each nonlocal modular sum is read out through one ancilla singlet whose
halves sit at the two particle sites.  A coupling of observable sigma_k of
a particle to its local ancilla is a controlled flip of the ancilla, with
the particle as control in the sigma_k eigenbasis.  Reading both ancillas
in the computational basis and combining the bits classically reveals only
the parity of the two particle values, which is the sum mod 4 for spin 1/2.

Crossed schedule for particles 1 and 2::

    T1:  sigma_z(1) -> ancilla a1      sigma_x(2) -> ancilla b2
    T2:  sigma_z(2) -> ancilla a2      sigma_x(1) -> ancilla b1
"""

from __future__ import annotations

import enum
import functools
import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .quantum_core import (
    CNOT,
    HADAMARD,
    IDENTITY_2,
    PAULIS,
    SIGMA_Z,
    SIGMA_X,
    BellLabel,
    InvalidInput,
    StateVector,
    UnitaryOp,
    apply_gate,
    bell_state,
    bell_vector,
    condition,
    fidelity,
    outcome_probabilities,
    partial_trace,
    qubit,
    random_state,
    rng_from,
    tensor,
    tensor_all,
)

# Controlled flip with the control read in the sigma_x eigenbasis.
X_CONTROLLED_NOT = np.kron(HADAMARD, IDENTITY_2) @ CNOT @ np.kron(HADAMARD, IDENTITY_2)
_COUPLINGS = {"sigma_z": CNOT, "sigma_x": X_CONTROLLED_NOT}
_OBSERVABLES = {"sigma_z": SIGMA_Z, "sigma_x": SIGMA_X}

# Default ancilla pair: the singlet.  Any Bell state works; the decoding
# offset and the correction table follow from the choice.
ANCILLA_STATE = BellLabel.PSI_MINUS


class Stage(enum.IntEnum):
    T1 = 1
    T2 = 2


@dataclass(frozen=True)
class ModularOutcome:
    """Values of the two nonlocal sums, each in {0, 2} for spin 1/2."""

    z_value: int
    x_value: int

    def __post_init__(self):
        for v in (self.z_value, self.x_value):
            if v not in (0, 2):
                raise InvalidInput(f"modular outcome {v} not in {{0, 2}}")


@dataclass(frozen=True)
class SwapCorrection:
    rotation_1: UnitaryOp
    rotation_2: UnitaryOp

    @property
    def names(self) -> tuple[str, str]:
        return self.rotation_1.name, self.rotation_2.name


@dataclass
class ProtocolTrace:
    """Execution log: couplings in order, and ancilla pairs allocated."""

    events: list = field(default_factory=list)
    ancilla_pairs: list = field(default_factory=list)

    def couple(self, stage: Stage, observable: str, particle: str, ancilla: str) -> None:
        if self.events and stage < self.events[-1][0]:
            raise RuntimeError("stage order violated: T1 must precede T2")
        self.events.append((stage, observable, particle, ancilla))

    @property
    def singlets_consumed(self) -> int:
        return len(self.ancilla_pairs)


def parity_to_modular(parity: int) -> int:
    """Sum of two +-1 values mod 4: equal values give 2, opposite give 0."""
    return 2 if parity == 0 else 0


def _decode(bit_1: int, bit_2: int, ancilla: BellLabel = ANCILLA_STATE) -> int:
    # Psi pairs have anticorrelated z readings, Phi pairs correlated ones.
    offset = 1 if ancilla in (BellLabel.PSI_MINUS, BellLabel.PSI_PLUS) else 0
    return parity_to_modular(bit_1 ^ bit_2 ^ offset)


def _allocate_pair(
    s: StateVector,
    names: tuple[str, str],
    trace: ProtocolTrace | None,
    ancilla: BellLabel = ANCILLA_STATE,
):
    clash = set(names) & set(s.labels)
    if clash:
        raise InvalidInput(f"ancilla labels {sorted(clash)} already in use")
    if trace is not None:
        trace.ancilla_pairs.append(names)
    return tensor(s, bell_state(ancilla, names))


def _couple(s, observable, particle, ancilla, stage, trace):
    if trace is not None:
        trace.couple(stage, observable, particle, ancilla)
    return apply_gate(s, _COUPLINGS[observable], particle, ancilla)


def _readout_vector(bits: Sequence[int]) -> np.ndarray:
    v = np.zeros(2 ** len(bits), dtype=complex)
    v[int("".join(map(str, bits)), 2)] = 1
    return v


def _check_particles(s: StateVector, p1: str, p2: str) -> None:
    if p1 == p2:
        raise InvalidInput("the two particles must be distinct")
    for lab in (p1, p2):
        if s.layout.dim(lab) != 2:
            raise InvalidInput(f"{lab!r} is not a qubit")


@functools.lru_cache(maxsize=None)
def _back_rotation(observable: str, ancilla: BellLabel = ANCILLA_STATE) -> str:
    """Pauli on the first particle that turns the ancilla readout into a Lueders projection.

    Found by enumeration on random inputs: the singlet's x (or z)
    anticorrelation leaves exactly one known pi rotation behind.
    """
    rng = np.random.default_rng(12345)
    obs = _OBSERVABLES[observable]
    pp = np.kron(obs, obs)
    candidates = set(PAULIS)
    for _ in range(3):
        s = random_state(rng, ["p1", "p2"])
        joint = _allocate_pair(s, ("m1", "m2"), None, ancilla)
        joint = apply_gate(joint, _COUPLINGS[observable], "p1", "m1")
        joint = apply_gate(joint, _COUPLINGS[observable], "p2", "m2")
        for bits in itertools.product((0, 1), repeat=2):
            _, rest = condition(joint, _readout_vector(bits), ["m1", "m2"])
            eps = 1 if _decode(*bits, ancilla) == 2 else -1
            ideal = (np.eye(4) + eps * pp) @ s.amplitudes
            ideal = StateVector(s.layout, ideal / np.linalg.norm(ideal))
            candidates = {
                n for n in candidates
                if fidelity(apply_gate(rest, PAULIS[n], "p1"), ideal) > 1 - 1e-10
            }
    if len(candidates) != 1:
        raise RuntimeError(f"no unique back-rotation for {observable}: {candidates}")
    return candidates.pop()


def nonlocal_modular_sum(
    s: StateVector,
    obs: str,
    particle_at_t1: str,
    particle_at_t2: str,
    rng_seed=None,
    *,
    ancilla_labels: tuple[str, str] = ("anc1", "anc2"),
    readings: tuple[int, int] | None = None,
    ancilla: BellLabel = ANCILLA_STATE,
) -> tuple[int, StateVector]:
    """Measure (sigma(p1) + sigma(p2)) mod 4 without learning either term.

    A fresh singlet is allocated on ``ancilla_labels``, each particle is
    coupled to its local half, and the halves are read out locally.  The
    known pi rotation left by the singlet is undone, so the returned state
    (on the original layout) is the ideal projection onto the measured
    parity sector.  ``readings`` forces the two ancilla bits.
    """
    if obs not in _COUPLINGS:
        raise InvalidInput(f"observable must be one of {sorted(_COUPLINGS)}")
    _check_particles(s, particle_at_t1, particle_at_t2)
    joint = _allocate_pair(s, tuple(ancilla_labels), None, ancilla)
    joint = _couple(joint, obs, particle_at_t1, ancilla_labels[0], Stage.T1, None)
    joint = _couple(joint, obs, particle_at_t2, ancilla_labels[1], Stage.T2, None)
    if readings is None:
        probs = outcome_probabilities(joint, np.eye(4), ancilla_labels)
        rng = rng_from(rng_seed)
        idx = int(rng.choice(4, p=probs / probs.sum()))
        readings = (idx >> 1, idx & 1)
    _, rest = condition(joint, _readout_vector(readings), ancilla_labels)
    rest = apply_gate(rest, PAULIS[_back_rotation(obs, ancilla)], particle_at_t1)
    return _decode(*readings, ancilla), rest


def modular_sum_probabilities(
    s: StateVector, obs: str, p1: str, p2: str, ancilla: BellLabel = ANCILLA_STATE
) -> dict:
    """Exact distribution of the modular sum, by enumeration of ancilla readings."""
    _check_particles(s, p1, p2)
    joint = _allocate_pair(s, ("anc1", "anc2"), None, ancilla)
    joint = apply_gate(joint, _COUPLINGS[obs], p1, "anc1")
    joint = apply_gate(joint, _COUPLINGS[obs], p2, "anc2")
    probs = outcome_probabilities(joint, np.eye(4), ["anc1", "anc2"])
    out = {0: 0.0, 2: 0.0}
    for idx, p in enumerate(probs):
        out[_decode(idx >> 1, idx & 1, ancilla)] += float(p)
    return out


def product_observable_probabilities(s: StateVector, obs: str, p1: str, p2: str) -> dict:
    """Oracle: direct projection onto the eigenspaces of sigma (x) sigma."""
    o = _OBSERVABLES[obs]
    w, v = np.linalg.eigh(np.kron(o, o))
    probs = outcome_probabilities(s, v.T, [p1, p2])
    out = {0: 0.0, 2: 0.0}
    for eig, p in zip(w, probs):
        out[2 if eig > 0 else 0] += float(p)
    return out


def staged_commuting_probabilities(
    s: StateVector, p1: str, p2: str, ancilla: BellLabel = ANCILLA_STATE
) -> dict:
    """Exact joint distribution of the sigma_z sum followed by the sigma_x sum.

    Both observables are measured through their own ancilla singlets, the
    z pair first; the branches are enumerated.
    """
    out = {}
    for zr in itertools.product((0, 1), repeat=2):
        joint = _allocate_pair(s, ("za1", "za2"), None, ancilla)
        joint = apply_gate(joint, CNOT, p1, "za1")
        joint = apply_gate(joint, CNOT, p2, "za2")
        pz = float(outcome_probabilities(joint, np.eye(4), ["za1", "za2"])[zr[0] * 2 + zr[1]])
        if pz < 1e-15:
            continue
        z, after = nonlocal_modular_sum(s, "sigma_z", p1, p2, readings=zr, ancilla=ancilla)
        x_probs = modular_sum_probabilities(after, "sigma_x", p1, p2, ancilla)
        for x, px in x_probs.items():
            key = ModularOutcome(z, x)
            out[key] = out.get(key, 0.0) + pz * px
    return out


def joint_projection_probabilities(s: StateVector, p1: str, p2: str) -> dict:
    """Oracle: projection onto the joint eigenbasis of sigma_z sigma_z and sigma_x sigma_x."""
    # Bell states are the joint eigenvectors: (zz, xx) signs.
    signs = {
        BellLabel.PHI_PLUS: (1, 1),
        BellLabel.PHI_MINUS: (1, -1),
        BellLabel.PSI_PLUS: (-1, 1),
        BellLabel.PSI_MINUS: (-1, -1),
    }
    labels = list(signs)
    probs = outcome_probabilities(s, [bell_vector(lab) for lab in labels], [p1, p2])
    return {
        ModularOutcome(2 if signs[lab][0] > 0 else 0, 2 if signs[lab][1] > 0 else 0): float(p)
        for lab, p in zip(labels, probs)
    }


# -- two-way teleportation ---------------------------------------------------

_ANCILLAS = ("a1", "a2", "b1", "b2")


def _crossed_circuit(
    s: StateVector, p1: str, p2: str, trace: ProtocolTrace | None, ancilla: BellLabel
):
    s = _allocate_pair(s, ("a1", "a2"), trace, ancilla)
    s = _allocate_pair(s, ("b1", "b2"), trace, ancilla)
    s = _couple(s, "sigma_z", p1, "a1", Stage.T1, trace)
    s = _couple(s, "sigma_x", p2, "b2", Stage.T1, trace)
    s = _couple(s, "sigma_z", p2, "a2", Stage.T2, trace)
    s = _couple(s, "sigma_x", p1, "b1", Stage.T2, trace)
    return s


def _outcome_from_readings(readings: Sequence[int], ancilla: BellLabel) -> ModularOutcome:
    a1, a2, b1, b2 = readings
    return ModularOutcome(_decode(a1, a2, ancilla), _decode(b1, b2, ancilla))


def _readings_for(outcome: ModularOutcome, ancilla: BellLabel) -> tuple[int, int, int, int]:
    for r in itertools.product((0, 1), repeat=4):
        if _outcome_from_readings(r, ancilla) == outcome:
            return r
    raise InvalidInput(f"unreachable outcome {outcome}")


def _swap_target(state_1: StateVector, state_2: StateVector) -> StateVector:
    """What a perfect swap produces: state_2 on particle 1, state_1 on particle 2."""
    s2 = state_2.relabel({state_2.labels[0]: "p1"})
    s1 = state_1.relabel({state_1.labels[0]: "p2"})
    return tensor(s2, s1)


def _initial(state_1: StateVector, state_2: StateVector) -> StateVector:
    return tensor(
        state_1.relabel({state_1.labels[0]: "p1"}), state_2.relabel({state_2.labels[0]: "p2"})
    )


@functools.lru_cache(maxsize=None)
def _correction_names(ancilla: BellLabel = ANCILLA_STATE) -> dict:
    """Pauli pair per outcome, found by enumerating all readings and Paulis."""
    inputs = [qubit(1, 0, "x"), qubit(0, 1, "x"), qubit(1, 1, "x"), qubit(1, 1j, "x")]
    table: dict = {}
    for readings in itertools.product((0, 1), repeat=4):
        outcome = _outcome_from_readings(readings, ancilla)
        ok = set(itertools.product(PAULIS, repeat=2))
        for s1, s2 in itertools.product(inputs, repeat=2):
            s2 = s2.relabel({"x": "y"})
            circuit = _crossed_circuit(_initial(s1, s2), "p1", "p2", None, ancilla)
            idx = int("".join(map(str, readings)), 2)
            if outcome_probabilities(circuit, np.eye(16), _ANCILLAS)[idx] < 1e-12:
                continue
            _, rest = condition(circuit, _readout_vector(readings), _ANCILLAS)
            target = _swap_target(s1, s2)
            ok = {
                (n1, n2) for n1, n2 in ok
                if fidelity(
                    apply_gate(apply_gate(rest, PAULIS[n1], "p1"), PAULIS[n2], "p2"), target
                ) > 1 - 1e-10
            }
        if outcome in table and table[outcome] != ok:
            raise RuntimeError("correction depends on more than the modular sums")
        table[outcome] = ok
    resolved = {}
    for outcome, ok in table.items():
        if len(ok) != 1:
            raise RuntimeError(f"ambiguous correction for {outcome}: {ok}")
        resolved[outcome] = ok.pop()
    return resolved


def correction_lookup(
    outcome: ModularOutcome, ancilla: BellLabel = ANCILLA_STATE
) -> SwapCorrection:
    """pi rotations (Paulis up to phase) completing the swap for this outcome."""
    if not isinstance(outcome, ModularOutcome):
        outcome = ModularOutcome(*outcome)
    n1, n2 = _correction_names(BellLabel(ancilla))[outcome]
    return SwapCorrection(
        UnitaryOp(PAULIS[n1], ("p1",), name=n1), UnitaryOp(PAULIS[n2], ("p2",), name=n2)
    )


@dataclass(frozen=True)
class TwoWayResult:
    outcome: ModularOutcome
    readings: tuple[int, int, int, int]
    probability: float
    correction: SwapCorrection
    uncorrected: StateVector
    final: StateVector
    trace: ProtocolTrace

    def fidelities(self, state_1: StateVector, state_2: StateVector) -> tuple[float, float]:
        """(fidelity of particle 1 with state_2, fidelity of particle 2 with state_1).

        Each compares the joint state of the particle and whatever the input
        was entangled with; inputs must not share subsystems.
        """
        target = _swap_target(state_1, state_2).reorder(self.final.labels)
        f = []
        for particle, original in (("p1", state_2), ("p2", state_1)):
            keep = [particle] + list(original.labels[1:])
            rho = partial_trace(self.final, keep)
            sigma = partial_trace(target, keep)
            # sigma is pure; fidelity = <psi|rho|psi>
            w, v = np.linalg.eigh(sigma)
            psi = v[:, -1]
            f.append(float(np.real(psi.conj() @ rho @ psi)))
        return f[0], f[1]


def two_way_teleport(
    state_1: StateVector,
    state_2: StateVector,
    rng_seed=None,
    *,
    readings: tuple[int, int, int, int] | None = None,
    outcome: ModularOutcome | None = None,
    ancilla: BellLabel = ANCILLA_STATE,
) -> TwoWayResult:
    """Swap the states of two distant qubits by crossed nonlocal measurements.

    The first label of each input is its particle; further labels are
    systems the particle may be entangled with.  Particles are renamed
    ``p1`` and ``p2``.  After the correction ``p1`` carries ``state_2`` and
    ``p2`` carries ``state_1``.
    """
    base = _initial(state_1, state_2)
    trace = ProtocolTrace()
    circuit = _crossed_circuit(base, "p1", "p2", trace, ancilla)
    if outcome is not None and readings is None:
        readings = _readings_for(outcome, ancilla)
    if readings is None:
        probs = outcome_probabilities(circuit, np.eye(16), _ANCILLAS)
        rng = rng_from(rng_seed)
        idx = int(rng.choice(16, p=probs / probs.sum()))
        readings = tuple((idx >> k) & 1 for k in (3, 2, 1, 0))
    readings = tuple(int(r) for r in readings)
    p, rest = condition(circuit, _readout_vector(readings), _ANCILLAS)
    result_outcome = _outcome_from_readings(readings, ancilla)
    corr = correction_lookup(result_outcome, ancilla)
    final = apply_gate(rest, corr.rotation_1.matrix, "p1")
    final = apply_gate(final, corr.rotation_2.matrix, "p2")
    return TwoWayResult(result_outcome, readings, p, corr, rest, final, trace)


def two_way_outcome_probabilities(
    state_1: StateVector, state_2: StateVector, ancilla: BellLabel = ANCILLA_STATE
) -> dict:
    circuit = _crossed_circuit(_initial(state_1, state_2), "p1", "p2", None, ancilla)
    probs = outcome_probabilities(circuit, np.eye(16), _ANCILLAS)
    out: dict = {}
    for idx, p in enumerate(probs):
        key = _outcome_from_readings([(idx >> k) & 1 for k in (3, 2, 1, 0)], ancilla)
        out[key] = out.get(key, 0.0) + float(p)
    return out
