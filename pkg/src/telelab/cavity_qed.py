"""Teleportation of an atomic state through a single microwave cavity.

Atoms are qubits with basis index 0 = |g>, 1 = |e>.  The cavity is a photon
register |0>..|n_max>; the protocol only ever populates |0> and |1>, and a
larger ``n_max`` is accepted so that this can be audited.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .quantum_core import (
    HADAMARD,
    PAULIS,
    SIGMA_X,
    SIGMA_Y,
    BellLabel,
    InvalidInput,
    StateVector,
    UnitaryOp,
    apply_gate,
    bell_state,
    bell_vector,
    condition,
    outcome_probabilities,
    qubit,
    rng_from,
    tensor_all,
)

G, E = 0, 1
MANIFOLD_TOL = 1e-12

# Microwave-zone phase: with theta = pi/2 this axis sends (g+e)/sqrt2 to |g>
# and (g-e)/sqrt2 to -|e>, so a detector in {g, e} reads the +/- basis.
DETECTION_PHI = -np.pi / 2

CHANNEL_ATOM = "channel_atom"
CAVITY = "cavity"
AUX_ATOM = "aux_atom"


def atom(amp_g: complex, amp_e: complex, label: str = "atom") -> StateVector:
    return qubit(amp_g, amp_e, label)


def cavity_fock(n: int, label: str = CAVITY, n_max: int = 1) -> StateVector:
    if not 0 <= n <= n_max:
        raise InvalidInput(f"photon number {n} outside 0..{n_max}")
    amp = np.zeros(n_max + 1, dtype=complex)
    amp[n] = 1
    return StateVector.from_amplitudes(amp, (label,), (n_max + 1,))


def _check_pair(s: StateVector, atom_label: str, cavity_label: str) -> int:
    if s.layout.dim(atom_label) != 2:
        raise InvalidInput(f"{atom_label!r} is not a two-level atom")
    dim = s.layout.dim(cavity_label)
    if dim < 2:
        raise InvalidInput("cavity register needs at least |0> and |1>")
    if leakage(s, cavity_label) > MANIFOLD_TOL:
        raise InvalidInput("cavity populated above one photon")
    return dim


def leakage(s: StateVector, cavity_label: str) -> float:
    """Largest amplitude magnitude on photon numbers >= 2."""
    dim = s.layout.dim(cavity_label)
    if dim <= 2:
        return 0.0
    axis = s.labels.index(cavity_label)
    t = np.moveaxis(s.tensor(), axis, 0)
    return float(np.abs(t[2:]).max())


def photon_amplitude(s: StateVector, cavity_label: str, n: int) -> float:
    """Norm of the component with exactly ``n`` photons."""
    axis = s.labels.index(cavity_label)
    t = np.moveaxis(s.tensor(), axis, 0)
    return float(np.linalg.norm(t[n]))


def resonant_matrix(theta: float, n_max: int = 1) -> np.ndarray:
    """Pulse on (atom, cavity) acting as a reflection on span{|e,0>, |g,1>}."""
    dim = 2 * (n_max + 1)
    u = np.eye(dim, dtype=complex)
    e0 = E * (n_max + 1) + 0
    g1 = G * (n_max + 1) + 1
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    u[e0, e0], u[g1, e0] = c, s
    u[e0, g1], u[g1, g1] = s, -c
    return u


def dispersive_matrix(n_max: int = 1) -> np.ndarray:
    u = np.eye(2 * (n_max + 1), dtype=complex)
    e1 = E * (n_max + 1) + 1
    u[e1, e1] = -1
    return u


def rotation_matrix(theta: float, phi: float) -> np.ndarray:
    axis = np.cos(phi) * SIGMA_X + np.sin(phi) * SIGMA_Y
    return np.cos(theta / 2) * np.eye(2) - 1j * np.sin(theta / 2) * axis


def resonant_interaction(
    s: StateVector, atom_label: str, cavity_label: str, theta: float
) -> StateVector:
    dim = _check_pair(s, atom_label, cavity_label)
    return apply_gate(s, resonant_matrix(theta, dim - 1), atom_label, cavity_label)


def dispersive_interaction(s: StateVector, atom_label: str, cavity_label: str) -> StateVector:
    dim = _check_pair(s, atom_label, cavity_label)
    return apply_gate(s, dispersive_matrix(dim - 1), atom_label, cavity_label)


def microwave_rotation(s: StateVector, atom_label: str, theta: float, phi: float) -> StateVector:
    if s.layout.dim(atom_label) != 2:
        raise InvalidInput(f"{atom_label!r} is not a two-level atom")
    return apply_gate(s, rotation_matrix(theta, phi), atom_label)


def cavity_bell_basis(
    labels: Sequence[str] = ("atom", CAVITY), n_max: int = 1
) -> dict[BellLabel, StateVector]:
    """Bell states of an atom and the cavity that the phase flip disentangles."""
    r = 1 / np.sqrt(2)
    e, g = np.eye(2)[E], np.eye(2)[G]
    plus, minus = np.array([r, r]), np.array([r, -r])
    vecs = {
        BellLabel.PSI_PLUS: r * (np.kron(e, minus) + np.kron(g, plus)),
        BellLabel.PSI_MINUS: r * (np.kron(e, minus) - np.kron(g, plus)),
        BellLabel.PHI_PLUS: r * (np.kron(e, plus) - np.kron(g, minus)),
        BellLabel.PHI_MINUS: r * (np.kron(e, plus) + np.kron(g, minus)),
    }
    out = {}
    for lab, v in vecs.items():
        full = np.zeros((2, n_max + 1), dtype=complex)
        full[:, :2] = v.reshape(2, 2)
        out[lab] = StateVector.from_amplitudes(full.reshape(-1), tuple(labels), (2, n_max + 1))
    return out


# Identification of atom and cavity states with spin states: e -> up,
# g -> down for the atom; (|0>+|1>)/sqrt2 -> up, (|0>-|1>)/sqrt2 -> down for
# the cavity.  Rows map spin-basis amplitudes into the physical basis.
_ATOM_TO_SPIN = np.array([[0, 1], [1, 0]], dtype=complex)
_CAVITY_TO_SPIN = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


@functools.lru_cache(maxsize=None)
def cavity_label_map() -> dict[BellLabel, BellLabel]:
    """Which spin Bell state each cavity Bell state becomes under the identification."""
    to_spin = np.kron(_ATOM_TO_SPIN, _CAVITY_TO_SPIN)
    out = {}
    for lab, st in cavity_bell_basis().items():
        spin = to_spin @ st.amplitudes
        match = [b for b in BellLabel if abs(abs(np.vdot(bell_vector(b), spin)) - 1) < 1e-12]
        if len(match) != 1:
            raise RuntimeError(f"{lab} has no spin counterpart")
        out[lab] = match[0]
    return out


def _bell_measure_circuit(s: StateVector, atom_label: str, aux_label: str) -> StateVector:
    s = dispersive_interaction(s, atom_label, CAVITY)
    s = microwave_rotation(s, atom_label, np.pi / 2, DETECTION_PHI)
    s = resonant_interaction(s, aux_label, CAVITY, np.pi)
    return microwave_rotation(s, aux_label, np.pi / 2, DETECTION_PHI)


@functools.lru_cache(maxsize=None)
def detection_map() -> dict[tuple[int, int], BellLabel]:
    """Detection bits (input atom, auxiliary atom) announcing each cavity Bell state."""
    out = {}
    for lab, st in cavity_bell_basis(("atom", CAVITY)).items():
        s = tensor_all([st, atom(1, 0, AUX_ATOM)])
        s = _bell_measure_circuit(s, "atom", AUX_ATOM)
        probs = outcome_probabilities(s, np.eye(4), ("atom", AUX_ATOM))
        k = int(np.argmax(probs))
        if abs(probs[k] - 1) > 1e-10:
            raise RuntimeError(f"{lab} is not mapped onto a detection pattern")
        out[(k >> 1, k & 1)] = lab
    return out


def bell_detection_probabilities(s: StateVector, atom_label: str) -> dict[tuple[int, int], float]:
    """Detection statistics of phase flip + rotations + cavity readout on (atom, cavity)."""
    if AUX_ATOM in s.labels:
        raise InvalidInput(f"label {AUX_ATOM!r} is reserved")
    joint = tensor_all([s, atom(1, 0, AUX_ATOM)])
    joint = _bell_measure_circuit(joint, atom_label, AUX_ATOM)
    probs = outcome_probabilities(joint, np.eye(4), (atom_label, AUX_ATOM))
    return {(k >> 1, k & 1): float(p) for k, p in enumerate(probs)}


@dataclass(frozen=True)
class CavityTeleportResult:
    outcome: tuple[int, int]
    probability: float
    final: StateVector
    cavity_excitation: float
    max_leakage: float
    correction: UnitaryOp


def _channel(n_max: int) -> StateVector:
    s = tensor_all([atom(0, 1, CHANNEL_ATOM), cavity_fock(0, CAVITY, n_max)])
    return resonant_interaction(s, CHANNEL_ATOM, CAVITY, np.pi / 2)


def _run_branch(
    s_in: StateVector, label: str, outcome: tuple[int, int], n_max: int
) -> tuple[float, StateVector, float, float]:
    """One detection branch; ``s_in`` may hold systems entangled with the input atom."""
    if set(s_in.labels) & {CHANNEL_ATOM, CAVITY, AUX_ATOM}:
        raise InvalidInput("labels channel_atom, cavity and aux_atom are reserved")
    steps = []
    s = tensor_all([_channel(n_max), s_in])
    steps.append(s)
    s = dispersive_interaction(s, label, CAVITY)
    steps.append(s)
    s = microwave_rotation(s, label, np.pi / 2, DETECTION_PHI)
    p1, s = condition(s, np.eye(2)[outcome[0]], (label,))
    s = tensor_all([s, atom(1, 0, AUX_ATOM)])
    s = resonant_interaction(s, AUX_ATOM, CAVITY, np.pi)
    steps.append(s)
    s = microwave_rotation(s, AUX_ATOM, np.pi / 2, DETECTION_PHI)
    p2, s = condition(s, np.eye(2)[outcome[1]], (AUX_ATOM,))
    excitation = photon_amplitude(s, CAVITY, 1)
    max_leak = max(leakage(st, CAVITY) for st in steps + [s])
    # The cavity is left empty, so the channel atom carries the whole state.
    _, remote = condition(s, np.eye(n_max + 1)[0], (CAVITY,))
    remote = remote.relabel({CHANNEL_ATOM: label}).reorder(s_in.labels)
    return p1 * p2, remote, excitation, max_leak


def _named(u: np.ndarray) -> str:
    """Name of ``u`` as P or P.H for a Pauli P, up to phase; 'U' otherwise."""
    for pn, p in PAULIS.items():
        if abs(abs(np.vdot(p, u)) - 2) < 1e-10:
            return pn
        if abs(abs(np.vdot(p @ HADAMARD, u)) - 2) < 1e-10:
            return "H" if pn == "I" else pn + "H"
    return "U"


@functools.lru_cache(maxsize=None)
def derive_cavity_corrections() -> dict[tuple[int, int], UnitaryOp]:
    """Correction per detection pattern, read off from the branch map.

    The input atom is run entangled with a reference qubit; the remote
    (atom, reference) state is then (M x I)|Phi+>, which fixes the branch map
    M and its inverse, up to a global phase.
    """
    choi = bell_state(BellLabel.PHI_PLUS, ("x", "ref"))
    table = {}
    for outcome in itertools.product((0, 1), repeat=2):
        _, remote, _, _ = _run_branch(choi, "x", outcome, 1)
        m = remote.amplitudes.reshape(2, 2) * np.sqrt(2)
        u = np.linalg.inv(m)
        u = u / np.sqrt(abs(np.linalg.det(u)))
        if not np.allclose(u.conj().T @ u, np.eye(2), atol=1e-10):
            raise RuntimeError(f"branch {outcome} is not unitarily correctable")
        table[outcome] = UnitaryOp(u, ("remote",), name=_named(u))
    return table


def single_cavity_teleport(
    input_atom: StateVector,
    rng_seed=None,
    *,
    outcome: tuple[int, int] | None = None,
    n_max: int = 1,
) -> CavityTeleportResult:
    """Channel preparation, phase flip, cavity readout and correction.

    ``outcome`` forces a detection branch; otherwise both detections are
    sampled in order.  The corrected state is returned on the input's label.
    """
    if len(input_atom.labels) != 1 or input_atom.layout.dims != (2,):
        raise InvalidInput("input must be a single two-level atom")
    if n_max < 1:
        raise InvalidInput("n_max must be at least 1")
    if outcome is None:
        rng = rng_from(rng_seed)
        (label,) = input_atom.labels
        s = tensor_all([_channel(n_max), input_atom])
        probs = bell_detection_probabilities(s.reorder((label, CAVITY, CHANNEL_ATOM)), label)
        keys = list(probs)
        p = np.array([probs[k] for k in keys])
        outcome = keys[int(rng.choice(4, p=p / p.sum()))]
    outcome = tuple(int(b) for b in outcome)
    (label,) = input_atom.labels
    p, remote, excitation, max_leak = _run_branch(input_atom, label, outcome, n_max)
    corr = derive_cavity_corrections()[outcome]
    final = apply_gate(remote, corr.matrix, label)
    return CavityTeleportResult(outcome, p, final, excitation, max_leak, corr)
