"""Finite-dimensional state-vector engine.

Basis ordering: amplitudes are stored in Kronecker order over the layout's
labels, so the first label is the most significant digit.  For two qubits
``(L, R)`` the basis runs ``|00>, |01>, |10>, |11>``.  Qubit index 0 is
spin up, index 1 is spin down.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

NORM_TOL = 1e-10
UNITARY_TOL = 1e-10

UP = np.array([1.0, 0.0], dtype=complex)
DOWN = np.array([0.0, 1.0], dtype=complex)

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)

PAULIS = {"I": IDENTITY_2, "X": SIGMA_X, "Y": SIGMA_Y, "Z": SIGMA_Z}


class InvalidInput(ValueError):
    """Raised when an operation receives arguments violating its contract."""


class BellLabel(enum.Enum):
    PSI_MINUS = "PsiMinus"
    PSI_PLUS = "PsiPlus"
    PHI_MINUS = "PhiMinus"
    PHI_PLUS = "PhiPlus"

    def __str__(self) -> str:
        return self.value


BELL_ORDER = (
    BellLabel.PSI_MINUS,
    BellLabel.PSI_PLUS,
    BellLabel.PHI_MINUS,
    BellLabel.PHI_PLUS,
)


def rng_from(seed) -> np.random.Generator:
    """Accept an int, a SeedSequence, a Generator or None."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class SubsystemLayout:
    dims: tuple[int, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.dims) != len(self.labels):
            raise InvalidInput("dims and labels must have equal length")
        if len(set(self.labels)) != len(self.labels):
            raise InvalidInput(f"duplicate subsystem labels in {self.labels}")
        if any(d < 2 for d in self.dims):
            raise InvalidInput("every subsystem needs dimension >= 2")

    @property
    def size(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64))

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise InvalidInput(f"unknown subsystem label {label!r}") from None

    def dim(self, label: str) -> int:
        return self.dims[self.index(label)]


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized pure state on a labeled composite system."""

    layout: SubsystemLayout
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != self.layout.size:
            raise InvalidInput(
                f"{amps.size} amplitudes do not fit layout of size {self.layout.size}"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise InvalidInput(f"state is not normalized (norm {norm:.3e})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_amplitudes(cls, amplitudes, labels, dims=None, normalize=False):
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        if dims is None:
            dims = (2,) * len(labels)
        if normalize:
            norm = np.linalg.norm(amps)
            if norm == 0:
                raise InvalidInput("cannot normalize the zero vector")
            amps = amps / norm
        return cls(SubsystemLayout(tuple(dims), tuple(labels)), amps)

    @classmethod
    def basis(cls, label: str, index: int, dim: int = 2) -> "StateVector":
        amps = np.zeros(dim, dtype=complex)
        amps[index] = 1.0
        return cls(SubsystemLayout((dim,), (label,)), amps)

    @property
    def labels(self) -> tuple[str, ...]:
        return self.layout.labels

    def tensor(self) -> np.ndarray:
        """Amplitudes reshaped to one axis per subsystem."""
        return self.amplitudes.reshape(self.layout.dims)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def relabel(self, mapping: dict[str, str]) -> "StateVector":
        labels = tuple(mapping.get(lab, lab) for lab in self.labels)
        return StateVector(SubsystemLayout(self.layout.dims, labels), self.amplitudes)

    def reorder(self, labels: Sequence[str]) -> "StateVector":
        """Permute subsystems into the given label order."""
        if sorted(labels) != sorted(self.labels):
            raise InvalidInput(f"cannot reorder {self.labels} into {tuple(labels)}")
        axes = [self.layout.index(lab) for lab in labels]
        dims = tuple(self.layout.dims[a] for a in axes)
        amps = np.transpose(self.tensor(), axes).reshape(-1)
        return StateVector(SubsystemLayout(dims, tuple(labels)), amps)

    def __repr__(self) -> str:
        return f"StateVector(labels={self.labels}, dims={self.layout.dims})"


@dataclass(frozen=True, eq=False)
class UnitaryOp:
    matrix: np.ndarray
    target_labels: tuple[str, ...]
    name: str = ""

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidInput("unitary must be a square matrix")
        err = np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0])))
        if err > UNITARY_TOL:
            raise InvalidInput(f"matrix is not unitary (max |U^dag U - I| = {err:.2e})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        targets = (
            (self.target_labels,)
            if isinstance(self.target_labels, str)
            else tuple(self.target_labels)
        )
        object.__setattr__(self, "target_labels", targets)


@dataclass(frozen=True)
class MeasurementRecord:
    observable_name: str
    outcome_index: int
    outcome_value: float
    probability: float

    def __post_init__(self):
        if not -1e-12 <= self.probability <= 1 + 1e-12:
            raise InvalidInput(f"probability {self.probability} outside [0, 1]")


def tensor(a: StateVector, b: StateVector) -> StateVector:
    clash = set(a.labels) & set(b.labels)
    if clash:
        raise InvalidInput(f"label collision: {sorted(clash)}")
    layout = SubsystemLayout(a.layout.dims + b.layout.dims, a.labels + b.labels)
    return StateVector(layout, np.kron(a.amplitudes, b.amplitudes))


def tensor_all(states: Iterable[StateVector]) -> StateVector:
    states = list(states)
    out = states[0]
    for s in states[1:]:
        out = tensor(out, s)
    return out


def apply_raw(
    layout: SubsystemLayout, amplitudes: np.ndarray, matrix: np.ndarray, targets: Sequence[str]
) -> np.ndarray:
    """Apply any operator (not necessarily unitary) to raw amplitudes."""
    axes = [layout.index(lab) for lab in targets]
    if len(set(axes)) != len(axes):
        raise InvalidInput("repeated target label")
    dims = [layout.dims[a] for a in axes]
    tdim = int(np.prod(dims))
    if matrix.shape != (tdim, tdim):
        raise InvalidInput(
            f"operator of shape {matrix.shape} does not match targets {tuple(targets)} "
            f"of dimension {tdim}"
        )
    psi = np.moveaxis(np.asarray(amplitudes).reshape(layout.dims), axes, list(range(len(axes))))
    rest = psi.shape[len(axes):]
    psi = matrix @ psi.reshape(tdim, -1)
    psi = np.moveaxis(psi.reshape(tuple(dims) + rest), list(range(len(axes))), axes)
    return psi.reshape(-1)


def _apply_matrix(s: StateVector, matrix: np.ndarray, targets: Sequence[str]) -> np.ndarray:
    return apply_raw(s.layout, s.amplitudes, matrix, targets)


def apply(u: UnitaryOp, s: StateVector) -> StateVector:
    return StateVector(s.layout, _apply_matrix(s, u.matrix, u.target_labels))


def apply_gate(s: StateVector, matrix, *targets: str) -> StateVector:
    """Shorthand: validate ``matrix`` as a unitary and apply it to ``targets``."""
    return apply(UnitaryOp(matrix, targets), s)


def _check_basis(basis: np.ndarray, dim: int) -> None:
    if basis.shape != (dim, dim):
        raise InvalidInput(
            f"basis must contain {dim} vectors of length {dim}, got shape {basis.shape}"
        )
    gram = basis.conj() @ basis.T
    if np.max(np.abs(gram - np.eye(dim))) > NORM_TOL:
        raise InvalidInput("basis vectors are not orthonormal")


def _as_basis(basis, s: StateVector, targets: Sequence[str]) -> np.ndarray:
    b = np.array([np.asarray(v, dtype=complex).reshape(-1) for v in basis])
    dim = int(np.prod([s.layout.dim(t) for t in targets]))
    _check_basis(b, dim)
    return b


def outcome_probabilities(s: StateVector, basis, targets: Sequence[str]) -> np.ndarray:
    """Born probabilities of a complete orthonormal measurement on ``targets``.

    ``basis`` is a sequence of vectors on the joint space of ``targets``
    (taken in the given order).
    """
    targets = _targets(targets)
    b = _as_basis(basis, s, targets)
    psi = _moved(s, targets)
    amps = b.conj() @ psi
    return np.sum(np.abs(amps) ** 2, axis=1)


def _targets(targets) -> tuple[str, ...]:
    return (targets,) if isinstance(targets, str) else tuple(targets)


def _moved(s: StateVector, targets: Sequence[str]) -> np.ndarray:
    axes = [s.layout.index(t) for t in targets]
    tdim = int(np.prod([s.layout.dims[a] for a in axes]))
    return np.moveaxis(s.tensor(), axes, list(range(len(axes)))).reshape(tdim, -1)


def project(s: StateVector, vector, targets: Sequence[str]) -> tuple[float, StateVector]:
    """Collapse ``targets`` onto ``vector``; returns (probability, full-layout state)."""
    targets = _targets(targets)
    v = np.asarray(vector, dtype=complex).reshape(-1)
    v = v / np.linalg.norm(v)
    proj = np.outer(v, v.conj())
    amps = _apply_matrix(s, proj, targets)
    p = float(np.vdot(amps, amps).real)
    if p < 1e-300:
        raise InvalidInput("projection onto a zero-probability outcome")
    return p, StateVector(s.layout, amps / np.sqrt(p))


def condition(s: StateVector, vector, targets: Sequence[str]) -> tuple[float, StateVector]:
    """Contract ``targets`` with ``<vector|`` and drop them from the layout.

    Returns the outcome probability and the normalized state of the
    remaining subsystems, phase included.
    """
    targets = _targets(targets)
    v = np.asarray(vector, dtype=complex).reshape(-1)
    v = v / np.linalg.norm(v)
    rest = [lab for lab in s.labels if lab not in targets]
    if not rest:
        raise InvalidInput("condition() needs at least one remaining subsystem")
    psi = v.conj() @ _moved(s, targets)
    p = float(np.vdot(psi, psi).real)
    if p < 1e-300:
        raise InvalidInput("conditioning on a zero-probability outcome")
    dims = tuple(s.layout.dim(lab) for lab in rest)
    return p, StateVector(SubsystemLayout(dims, tuple(rest)), psi / np.sqrt(p))


def measure_projective(
    s: StateVector,
    basis,
    targets: Sequence[str],
    rng_seed=None,
    *,
    observable_name: str = "",
    values: Sequence[float] | None = None,
    outcome: int | None = None,
) -> tuple[MeasurementRecord, StateVector]:
    """Sample a complete projective measurement and collapse the state.

    Pass ``outcome`` to force a branch instead of sampling.  The returned
    record carries the Born probability of the realized branch.
    """
    targets = _targets(targets)
    b = _as_basis(basis, s, targets)
    probs = outcome_probabilities(s, b, targets)
    if outcome is None:
        rng = rng_from(rng_seed)
        outcome = int(rng.choice(len(probs), p=probs / probs.sum()))
    _, post = project(s, b[outcome], targets)
    value = float(values[outcome]) if values is not None else float(outcome)
    record = MeasurementRecord(
        observable_name or "/".join(targets), int(outcome), value, float(probs[outcome])
    )
    return record, post


def fidelity(a: StateVector, b: StateVector) -> float:
    if a.layout != b.layout:
        raise InvalidInput(f"layout mismatch: {a.layout} vs {b.layout}")
    return float(min(1.0, abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2))


def partial_trace(s: StateVector, keep_labels: Sequence[str]) -> np.ndarray:
    """Reduced density matrix of ``keep_labels`` (in the given order)."""
    keep = _targets(keep_labels)
    for lab in keep:
        s.layout.index(lab)
    psi = _moved(s, keep)
    return psi @ psi.conj().T


def von_neumann_entropy(rho: np.ndarray) -> float:
    """Entropy in bits."""
    w = np.linalg.eigvalsh(rho)
    w = w[w > 1e-15]
    return float(-np.sum(w * np.log2(w)))


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(rho - sigma))))


def bell_vector(label: BellLabel) -> np.ndarray:
    """Two-qubit Bell vector in (L, R) Kronecker order."""
    r = 1 / np.sqrt(2)
    up_down, down_up = np.kron(UP, DOWN), np.kron(DOWN, UP)
    up_up, down_down = np.kron(UP, UP), np.kron(DOWN, DOWN)
    return {
        BellLabel.PSI_MINUS: r * (up_down - down_up),
        BellLabel.PSI_PLUS: r * (up_down + down_up),
        BellLabel.PHI_MINUS: r * (up_up - down_down),
        BellLabel.PHI_PLUS: r * (up_up + down_down),
    }[BellLabel(label)]


def bell_basis() -> np.ndarray:
    """Rows are the Bell vectors in ``BELL_ORDER``."""
    return np.array([bell_vector(lab) for lab in BELL_ORDER])


def bell_state(label: BellLabel, labels: Sequence[str] = ("L", "R")) -> StateVector:
    return StateVector(SubsystemLayout((2, 2), tuple(labels)), bell_vector(label))


def qubit(alpha: complex, beta: complex, label: str = "q") -> StateVector:
    return StateVector.from_amplitudes([alpha, beta], [label], normalize=True)


def random_state(rng, labels: Sequence[str], dims: Sequence[int] | None = None) -> StateVector:
    """Haar-random pure state."""
    rng = rng_from(rng)
    dims = tuple(dims) if dims is not None else (2,) * len(labels)
    n = int(np.prod(dims))
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return StateVector.from_amplitudes(v, labels, dims, normalize=True)


def pauli_match(matrix: np.ndarray, tol: float = 1e-10) -> str | None:
    """Name of the Pauli equal to ``matrix`` up to global phase, if any."""
    for name, p in PAULIS.items():
        overlap = np.trace(p.conj().T @ matrix) / 2
        if abs(abs(overlap) - 1) < tol:
            return name
    return None
