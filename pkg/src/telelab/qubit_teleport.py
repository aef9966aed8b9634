"""Discrete-variable teleportation: complete and degenerate Bell measurements,
the three-stage protocol, probabilistic teleportation and entanglement swapping.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .quantum_core import (
    BELL_ORDER,
    CNOT,
    DOWN,
    HADAMARD,
    PAULIS,
    UP,
    BellLabel,
    InvalidInput,
    StateVector,
    UnitaryOp,
    _apply_matrix,
    apply_gate,
    apply_raw,
    bell_basis,
    bell_state,
    bell_vector,
    condition,
    fidelity,
    outcome_probabilities,
    partial_trace,
    project,
    qubit,
    rng_from,
    tensor,
    tensor_all,
)

# Output of CNOT(first -> second) followed by H(first), read as (first, second) bits.
CIRCUIT_OUTCOMES = {
    (0, 0): BellLabel.PHI_PLUS,
    (1, 0): BellLabel.PHI_MINUS,
    (0, 1): BellLabel.PSI_PLUS,
    (1, 1): BellLabel.PSI_MINUS,
}
_BITS_FOR = {label: bits for bits, label in CIRCUIT_OUTCOMES.items()}

SPANNING_INPUTS = (
    (1, 0),
    (0, 1),
    (1 / np.sqrt(2), 1 / np.sqrt(2)),
    (1 / np.sqrt(2), 1j / np.sqrt(2)),
)


class DegenerateMode(str, enum.Enum):
    TWO_STATE = "two_state"
    INNSBRUCK = "innsbruck"


@dataclass(frozen=True)
class DegenerateOutcome:
    """``label`` is ``None`` for a failed (ambiguous) outcome."""

    label: BellLabel | None
    raw_outcome_index: int

    @property
    def identified(self) -> bool:
        return self.label is not None


@dataclass(frozen=True)
class CorrectionTable:
    channel: BellLabel
    entries: dict

    def __post_init__(self):
        missing = set(BELL_ORDER) - set(self.entries)
        if missing:
            raise InvalidInput(f"correction table misses {sorted(map(str, missing))}")

    def __getitem__(self, label: BellLabel) -> UnitaryOp:
        return self.entries[BellLabel(label)]

    def pauli_names(self) -> dict:
        return {lab: self.entries[lab].name for lab in BELL_ORDER}


@dataclass(frozen=True)
class TeleportResult:
    outcome: BellLabel
    probability: float
    final: StateVector


def _check_qubits(s: StateVector, labels: Sequence[str]) -> tuple[str, str]:
    if len(labels) != 2 or labels[0] == labels[1]:
        raise InvalidInput("need two distinct subsystem labels")
    for lab in labels:
        if s.layout.dim(lab) != 2:
            raise InvalidInput(f"subsystem {lab!r} is not a qubit")
    return labels[0], labels[1]


def bell_circuit(s: StateVector, labels: Sequence[str]) -> StateVector:
    """Conditional spin flip then a Hadamard: maps the Bell basis to product states."""
    first, second = _check_qubits(s, labels)
    s = apply_gate(s, CNOT, first, second)
    return apply_gate(s, HADAMARD, first)


def circuit_bell_probabilities(s: StateVector, labels: Sequence[str]) -> dict:
    """Outcome distribution of the circuit route, keyed by BellLabel."""
    out = bell_circuit(s, labels)
    computational = np.eye(4, dtype=complex)
    probs = outcome_probabilities(out, computational, labels)
    return {CIRCUIT_OUTCOMES[(i >> 1, i & 1)]: float(probs[i]) for i in range(4)}


def direct_bell_probabilities(s: StateVector, labels: Sequence[str]) -> dict:
    """Outcome distribution of a direct projection onto the Bell basis."""
    _check_qubits(s, labels)
    probs = outcome_probabilities(s, bell_basis(), labels)
    return {lab: float(p) for lab, p in zip(BELL_ORDER, probs)}


def bell_measure_complete(
    s: StateVector, labels: Sequence[str], rng_seed=None, *, outcome: BellLabel | None = None
) -> tuple[BellLabel, StateVector]:
    """Complete Bell measurement by a quantum-quantum interaction.

    The pair is put through the conditional spin flip and a single-qubit
    rotation, then each qubit is measured on its own.  The returned state is
    the collapsed post-circuit state (the measured pair sits in the product
    state of its two readout bits).  ``outcome`` forces a branch.
    """
    first, second = _check_qubits(s, labels)
    out = bell_circuit(s, labels)
    if outcome is None:
        rng = rng_from(rng_seed)
        bits = []
        for lab in (first, second):
            probs = outcome_probabilities(out, [UP, DOWN], [lab])
            bit = int(rng.choice(2, p=probs / probs.sum()))
            _, out = project(out, UP if bit == 0 else DOWN, [lab])
            bits.append(bit)
        return CIRCUIT_OUTCOMES[tuple(bits)], out
    b0, b1 = _BITS_FOR[BellLabel(outcome)]
    _, out = project(out, np.kron(UP if b0 == 0 else DOWN, UP if b1 == 0 else DOWN), [first, second])
    return BellLabel(outcome), out


def _readout_vector(label: BellLabel) -> np.ndarray:
    b0, b1 = _BITS_FOR[label]
    return np.kron(UP if b0 == 0 else DOWN, UP if b1 == 0 else DOWN)


def _teleport_layout_labels(s: StateVector, input_label: str) -> tuple[str, str]:
    s.layout.index(input_label)
    pair = ("epr_alice", "epr_bob")
    clash = set(pair) & set(s.labels)
    if clash:
        raise InvalidInput(f"labels {sorted(clash)} are reserved for the EPR pair")
    return pair


def _teleport_branch(
    s: StateVector, input_label: str, channel: BellLabel, outcome: BellLabel
) -> tuple[float, StateVector]:
    """Uncorrected state of the remaining systems after a forced Bell outcome.

    The output qubit is relabeled to ``input_label`` and put in its place.
    """
    alice, bob = _teleport_layout_labels(s, input_label)
    joint = tensor(s, bell_state(channel, (alice, bob)))
    circuit = bell_circuit(joint, [input_label, alice])
    p, rest = condition(circuit, _readout_vector(outcome), [input_label, alice])
    order = [bob if lab == input_label else lab for lab in s.labels]
    return p, rest.reorder(order).relabel({bob: input_label})


@functools.lru_cache(maxsize=None)
def derive_correction_table(channel: BellLabel = BellLabel.PSI_MINUS) -> CorrectionTable:
    """Find, per Bell outcome, the Pauli that restores the input exactly.

    Every candidate Pauli is tried against a spanning set of inputs; exactly
    one must give unit fidelity on all of them.
    """
    channel = BellLabel(channel)
    entries = {}
    for outcome in BELL_ORDER:
        winners = []
        for name, pauli in PAULIS.items():
            ok = True
            for alpha, beta in SPANNING_INPUTS:
                psi = qubit(alpha, beta, "x")
                _, out = _teleport_branch(psi, "x", channel, outcome)
                out = apply_gate(out, pauli, "x")
                if abs(fidelity(out, psi) - 1) > 1e-10:
                    ok = False
                    break
            if ok:
                winners.append(name)
        if len(winners) != 1:
            raise RuntimeError(f"no unique correction for {channel}/{outcome}: {winners}")
        entries[outcome] = UnitaryOp(PAULIS[winners[0]], ("out",), name=winners[0])
    return CorrectionTable(channel, entries)


def bbcjpw_teleport(
    s: StateVector,
    input_label: str,
    channel: BellLabel = BellLabel.PSI_MINUS,
    rng_seed=None,
    *,
    outcome: BellLabel | None = None,
) -> TeleportResult:
    """Teleport qubit ``input_label`` of ``s`` through a fresh EPR pair.

    ``s`` may contain further subsystems entangled with the input.  The
    returned ``final`` state lives on the same layout as ``s``, with the
    corrected output qubit standing in for the input qubit, so
    ``fidelity(result.final, s)`` measures the transfer of the state and of
    its correlations.
    """
    channel = BellLabel(channel)
    if s.layout.dim(input_label) != 2:
        raise InvalidInput(f"{input_label!r} is not a qubit")
    if outcome is None:
        probs = teleport_outcome_probabilities(s, input_label, channel)
        rng = rng_from(rng_seed)
        p = np.array([probs[lab] for lab in BELL_ORDER])
        outcome = BELL_ORDER[int(rng.choice(4, p=p / p.sum()))]
    outcome = BellLabel(outcome)
    p, out = _teleport_branch(s, input_label, channel, outcome)
    table = derive_correction_table(channel)
    out = apply_gate(out, table[outcome].matrix, input_label)
    return TeleportResult(outcome, p, out)


def teleport_outcome_probabilities(
    s: StateVector, input_label: str, channel: BellLabel = BellLabel.PSI_MINUS
) -> dict:
    alice, bob = _teleport_layout_labels(s, input_label)
    joint = tensor(s, bell_state(channel, (alice, bob)))
    return direct_bell_probabilities(joint, [input_label, alice])


def alice_residual_state(
    s: StateVector, input_label: str, outcome: BellLabel, channel: BellLabel = BellLabel.PSI_MINUS
) -> np.ndarray:
    """Reduced state left at the input position after the Bell measurement."""
    alice, bob = _teleport_layout_labels(s, input_label)
    joint = tensor(s, bell_state(channel, (alice, bob)))
    _, post = bell_measure_complete(joint, [input_label, alice], outcome=outcome)
    return partial_trace(post, [input_label])


# -- degenerate measurements -------------------------------------------------


def _degenerate_projectors(mode: DegenerateMode) -> list[tuple[BellLabel | None, np.ndarray]]:
    vecs = {lab: bell_vector(lab) for lab in BELL_ORDER}

    def proj(*labels):
        return sum(np.outer(vecs[lab], vecs[lab].conj()) for lab in labels)

    mode = DegenerateMode(mode)
    if mode is DegenerateMode.INNSBRUCK:
        return [
            (BellLabel.PSI_MINUS, proj(BellLabel.PSI_MINUS)),
            (None, proj(BellLabel.PSI_PLUS, BellLabel.PHI_MINUS, BellLabel.PHI_PLUS)),
        ]
    return [
        (BellLabel.PSI_MINUS, proj(BellLabel.PSI_MINUS)),
        (BellLabel.PSI_PLUS, proj(BellLabel.PSI_PLUS)),
        (None, proj(BellLabel.PHI_MINUS, BellLabel.PHI_PLUS)),
    ]


def _mode(mode) -> DegenerateMode:
    try:
        return DegenerateMode(mode)
    except ValueError:
        raise InvalidInput(f"unknown degenerate-measurement mode {mode!r}") from None


def degenerate_probabilities(s: StateVector, labels: Sequence[str], mode) -> list[float]:
    _check_qubits(s, labels)
    out = []
    for _, proj in _degenerate_projectors(_mode(mode)):
        amps = _apply_matrix(s, proj, labels)
        out.append(float(np.vdot(amps, amps).real))
    return out


def bell_measure_degenerate(
    s: StateVector,
    labels: Sequence[str],
    mode,
    rng_seed=None,
    *,
    outcome: int | None = None,
) -> tuple[DegenerateOutcome, StateVector]:
    """Measure a degenerate Bell operator.

    ``two_state`` resolves Psi- and Psi+ and lumps the Phi subspace into a
    failure; ``innsbruck`` resolves only Psi-.  Pass ``outcome`` (index into
    the projector list) to force a branch.
    """
    mode = _mode(mode)
    projectors = _degenerate_projectors(mode)
    probs = degenerate_probabilities(s, labels, mode)
    if outcome is None:
        rng = rng_from(rng_seed)
        p = np.array(probs)
        outcome = int(rng.choice(len(p), p=p / p.sum()))
    label, proj = projectors[outcome]
    amps = _apply_matrix(s, proj, labels)
    post = StateVector(s.layout, amps / np.linalg.norm(amps))
    return DegenerateOutcome(label, int(outcome)), post


def degenerate_success_probability(mode) -> float:
    """Success probability for a uniformly random Bell-state input, by direct evaluation."""
    total = 0.0
    for lab in BELL_ORDER:
        probs = degenerate_probabilities(bell_state(lab), ["L", "R"], mode)
        total += 0.25 * sum(
            p for (ident, _), p in zip(_degenerate_projectors(_mode(mode)), probs) if ident
        )
    return total


@dataclass(frozen=True)
class ProbabilisticResult:
    success: bool
    outcome: DegenerateOutcome
    probability: float
    final: StateVector | None


def probabilistic_teleport(
    s: StateVector,
    input_label: str,
    mode="innsbruck",
    rng_seed=None,
    *,
    channel: BellLabel = BellLabel.PSI_MINUS,
    outcome: int | None = None,
) -> ProbabilisticResult:
    """Teleportation that only completes when the degenerate measurement succeeds."""
    mode = _mode(mode)
    alice, bob = _teleport_layout_labels(s, input_label)
    joint = tensor(s, bell_state(channel, (alice, bob)))
    probs = degenerate_probabilities(joint, [input_label, alice], mode)
    result, post = bell_measure_degenerate(
        joint, [input_label, alice], mode, rng_seed, outcome=outcome
    )
    prob = probs[result.raw_outcome_index]
    if not result.identified:
        return ProbabilisticResult(False, result, prob, None)
    # The identified pair is in a known Bell state; condition it away.
    _, rest = condition(post, bell_vector(result.label), [input_label, alice])
    order = [bob if lab == input_label else lab for lab in s.labels]
    rest = rest.reorder(order).relabel({bob: input_label})
    table = derive_correction_table(channel)
    rest = apply_gate(rest, table[result.label].matrix, input_label)
    return ProbabilisticResult(True, result, prob, rest)


def probabilistic_success_probability(
    s: StateVector, input_label: str, mode="innsbruck", channel: BellLabel = BellLabel.PSI_MINUS
) -> float:
    alice, bob = _teleport_layout_labels(s, input_label)
    joint = tensor(s, bell_state(channel, (alice, bob)))
    probs = degenerate_probabilities(joint, [input_label, alice], mode)
    projectors = _degenerate_projectors(_mode(mode))
    return float(sum(p for (ident, _), p in zip(projectors, probs) if ident))


def chain_success_probability(inputs: Sequence[StateVector], mode="innsbruck") -> float:
    """Exact probability that every qubit of a product input teleports.

    All input qubits and their EPR pairs are simulated jointly; the
    probability is the squared norm of the all-success projection.
    """
    if not 1 <= len(inputs) <= 6:
        raise InvalidInput("chain length must be between 1 and 6")
    parts = []
    for k, q in enumerate(inputs):
        parts.append(q.relabel({q.labels[0]: f"x{k}"}))
        parts.append(bell_state(BellLabel.PSI_MINUS, (f"a{k}", f"b{k}")))
    joint = tensor_all(parts)
    success = [proj for ident, proj in _degenerate_projectors(_mode(mode)) if ident]
    amps = joint.amplitudes
    for k in range(len(inputs)):
        amps = apply_raw(joint.layout, amps, sum(success), [f"x{k}", f"a{k}"])
    return float(np.vdot(amps, amps).real)


# -- entanglement swapping ---------------------------------------------------


@dataclass(frozen=True)
class SwapResult:
    outcome: BellLabel
    probability: float
    outer: StateVector


def entanglement_swap(rng_seed=None, *, outcome: BellLabel | None = None) -> SwapResult:
    """Bell-measure the inner particles of two singlets (1,2) and (3,4).

    The outer particles 1 and 4, which never interacted, end up in the Bell
    state named by the outcome (returned on labels ``("p1", "p4")``).
    """
    joint = tensor(
        bell_state(BellLabel.PSI_MINUS, ("p1", "p2")),
        bell_state(BellLabel.PSI_MINUS, ("p3", "p4")),
    )
    if outcome is None:
        probs = direct_bell_probabilities(joint, ["p2", "p3"])
        rng = rng_from(rng_seed)
        p = np.array([probs[lab] for lab in BELL_ORDER])
        outcome = BELL_ORDER[int(rng.choice(4, p=p / p.sum()))]
    outcome = BellLabel(outcome)
    circuit = bell_circuit(joint, ["p2", "p3"])
    p, outer = condition(circuit, _readout_vector(outcome), ["p2", "p3"])
    return SwapResult(outcome, p, outer)
