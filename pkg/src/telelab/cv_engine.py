"""Continuous-variable teleportation on Gaussian moments.

Convention: hbar = 1, quadratures ordered (q1, p1, q2, p2, ...), vacuum
covariance I/2.  Squeezing ``r`` scales q by e^{-r} and p by e^{r}.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .quantum_core import InvalidInput, rng_from

SYMPLECTIC_TOL = 1e-10
UNCERTAINTY_TOL = 1e-9
CONVENTION = {"hbar": 1.0, "vacuum_cov": "I/2", "ordering": "q1,p1,q2,p2,..."}


def omega(n_modes: int) -> np.ndarray:
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


@dataclass(frozen=True)
class CVOutcome:
    a: float  # position difference
    b: float  # momentum sum of the measured pair

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise InvalidInput("outcomes must be finite")


@dataclass(frozen=True)
class GaussianState:
    mean: np.ndarray
    cov: np.ndarray
    labels: tuple[str, ...] = ()
    # Largest covariance entry this state was computed from.  Conditioning
    # cancels such entries, so rounding error scales with it, not with cov.
    history_scale: float = 0.0

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = np.asarray(self.cov, dtype=float)
        n2 = mean.size
        if n2 % 2 or cov.shape != (n2, n2):
            raise InvalidInput("mean must have length 2n and cov shape 2n x 2n")
        scale = max(1.0, float(np.abs(cov).max()), self.history_scale)
        if np.abs(cov - cov.T).max() > 1e-10 * scale:
            raise InvalidInput("covariance is not symmetric")
        cov = (cov + cov.T) / 2
        tol = max(UNCERTAINTY_TOL, 64 * np.finfo(float).eps * scale)
        eig = np.linalg.eigvalsh(cov + 0.5j * omega(n2 // 2))
        if eig.min() < -tol:
            raise InvalidInput(f"uncertainty relation violated (min eigenvalue {eig.min():.3g})")
        labels = tuple(self.labels) or tuple(f"m{k}" for k in range(n2 // 2))
        if len(labels) != n2 // 2 or len(set(labels)) != len(labels):
            raise InvalidInput("need one distinct label per mode")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "history_scale", scale)

    @property
    def n_modes(self) -> int:
        return self.mean.size // 2

    def mode(self, m) -> int:
        if isinstance(m, str):
            if m not in self.labels:
                raise InvalidInput(f"no mode {m!r}")
            return self.labels.index(m)
        if not 0 <= int(m) < self.n_modes:
            raise InvalidInput(f"mode index {m} out of range")
        return int(m)

    def with_labels(self, labels: Sequence[str]) -> GaussianState:
        return GaussianState(self.mean, self.cov, tuple(labels), self.history_scale)

    def reduced(self, modes: Sequence) -> GaussianState:
        idx = [self.mode(m) for m in modes]
        sel = np.array([[2 * k, 2 * k + 1] for k in idx]).reshape(-1)
        return GaussianState(
            self.mean[sel],
            self.cov[np.ix_(sel, sel)],
            tuple(self.labels[k] for k in idx),
            self.history_scale,
        )


def vacuum(n_modes: int = 1, labels: Sequence[str] = ()) -> GaussianState:
    return GaussianState(np.zeros(2 * n_modes), np.eye(2 * n_modes) / 2, tuple(labels))


def coherent(q: float, p: float, label: str = "m0") -> GaussianState:
    return GaussianState(np.array([q, p]), np.eye(2) / 2, (label,))


def product(*states: GaussianState) -> GaussianState:
    mean = np.concatenate([s.mean for s in states])
    cov = np.zeros((mean.size, mean.size))
    k = 0
    for s in states:
        n = s.mean.size
        cov[k : k + n, k : k + n] = s.cov
        k += n
    scale = max(s.history_scale for s in states)
    return GaussianState(mean, cov, sum((s.labels for s in states), ()), scale)


def is_symplectic(s: np.ndarray, tol: float = SYMPLECTIC_TOL) -> bool:
    """S^T Omega S = Omega, to ``tol`` relative to max|S|^2 (absolute for O(1) maps)."""
    w = omega(s.shape[0] // 2)
    scale = max(1.0, float(np.abs(s).max()) ** 2)
    return bool(np.abs(s.T @ w @ s - w).max() < tol * scale)


def _embed(n_modes: int, modes: Sequence[int], block: np.ndarray) -> np.ndarray:
    s = np.eye(2 * n_modes)
    idx = np.array([[2 * k, 2 * k + 1] for k in modes]).reshape(-1)
    s[np.ix_(idx, idx)] = block
    return s


def beamsplitter_matrix(n_modes: int, theta: float, j: int, k: int) -> np.ndarray:
    """q_j -> cos q_j + sin q_k, q_k -> -sin q_j + cos q_k (same for p)."""
    c, s = np.cos(theta), np.sin(theta)
    return _embed(n_modes, (j, k), np.kron(np.array([[c, s], [-s, c]]), np.eye(2)))


def squeeze_matrix(n_modes: int, r: float, mode: int) -> np.ndarray:
    return _embed(n_modes, (mode,), np.diag([np.exp(-r), np.exp(r)]))


def phase_matrix(n_modes: int, phi: float, mode: int) -> np.ndarray:
    c, s = np.cos(phi), np.sin(phi)
    return _embed(n_modes, (mode,), np.array([[c, s], [-s, c]]))


def qnd_matrix(n_modes: int, control: int, quadrature: str, target: int, gain: float) -> np.ndarray:
    """q_target += gain * x_control, x being q or p of the control.

    The conjugate back-action keeps the map symplectic: p_control -= gain * p_target
    when x = q, q_control += gain * p_target when x = p.
    """
    if control == target:
        raise InvalidInput("control and target must differ")
    s = np.eye(2 * n_modes)
    qt, pt = 2 * target, 2 * target + 1
    if quadrature == "q":
        s[qt, 2 * control] += gain
        s[2 * control + 1, pt] -= gain
    elif quadrature == "p":
        s[qt, 2 * control + 1] += gain
        s[2 * control, pt] += gain
    else:
        raise InvalidInput("quadrature must be 'q' or 'p'")
    return s


def apply_symplectic(st: GaussianState, s: np.ndarray) -> GaussianState:
    if not is_symplectic(s):
        raise InvalidInput("transformation is not symplectic")
    return GaussianState(s @ st.mean, s @ st.cov @ s.T, st.labels, st.history_scale)


def gaussian_symplectic(st: GaussianState, which: str, *args) -> GaussianState:
    """Apply ``beamsplitter(theta, j, k)``, ``squeeze(r, mode)``, ``phase(phi, mode)``
    or ``qnd(control, quadrature, target, gain)``."""
    n = st.n_modes
    if which == "beamsplitter":
        theta, j, k = args
        j, k = st.mode(j), st.mode(k)
        if j == k:
            raise InvalidInput("beamsplitter needs two distinct modes")
        s = beamsplitter_matrix(n, theta, j, k)
    elif which == "squeeze":
        r, m = args
        s = squeeze_matrix(n, r, st.mode(m))
    elif which == "phase":
        phi, m = args
        s = phase_matrix(n, phi, st.mode(m))
    elif which == "qnd":
        c, quad, t, g = args
        s = qnd_matrix(n, st.mode(c), quad, st.mode(t), g)
    else:
        raise InvalidInput(f"unknown transformation {which!r}")
    return apply_symplectic(st, s)


def displace(st: GaussianState, mode, dq: float, dp: float) -> GaussianState:
    k = st.mode(mode)
    mean = st.mean.copy()
    mean[2 * k] += dq
    mean[2 * k + 1] += dp
    return GaussianState(mean, st.cov, st.labels, st.history_scale)


def homodyne_condition(
    st: GaussianState, mode, quadrature: str, rng_seed=None, *, outcome: float | None = None
) -> tuple[float, GaussianState]:
    """Measure one quadrature, condition the rest (Schur complement), drop the mode."""
    k = st.mode(mode)
    if quadrature not in ("q", "p"):
        raise InvalidInput("quadrature must be 'q' or 'p'")
    i = 2 * k + (quadrature == "p")
    var = st.cov[i, i]
    if not var > 0:
        raise InvalidInput(f"measured variance {var} is not positive; cannot condition")
    if outcome is None:
        outcome = float(rng_from(rng_seed).normal(st.mean[i], np.sqrt(var)))
    rest = [j for j in range(2 * st.n_modes) if j // 2 != k]
    c_rm = st.cov[rest, i]
    mean = st.mean[rest] + c_rm * (outcome - st.mean[i]) / var
    cov = st.cov[np.ix_(rest, rest)] - np.outer(c_rm, c_rm) / var
    labels = tuple(lab for j, lab in enumerate(st.labels) if j != k)
    return float(outcome), GaussianState(mean, cov, labels, st.history_scale)


def fidelity(a: GaussianState, b: GaussianState) -> float:
    """Single-mode fidelity; exact when at least one of the states is pure."""
    if a.n_modes != 1 or b.n_modes != 1:
        raise InvalidInput("fidelity is implemented for single modes")
    s = a.cov + b.cov
    d = a.mean - b.mean
    return float(np.exp(-0.5 * d @ np.linalg.solve(s, d)) / np.sqrt(np.linalg.det(s)))


def _check_r(r: float) -> float:
    r = float(r)
    if not r >= 0:
        raise InvalidInput("squeezing r must be >= 0")
    return r


def epr_symplectic(r: float, anti: bool = False) -> np.ndarray:
    """Squeeze the two modes oppositely, then mix them on a 50:50 beamsplitter."""
    sign = -1 if anti else 1
    return (
        beamsplitter_matrix(2, np.pi / 4, 0, 1)
        @ squeeze_matrix(2, -sign * r, 1)
        @ squeeze_matrix(2, sign * r, 0)
    )


def epr_pair(r: float, labels: Sequence[str] = ("A", "B"), anti: bool = False) -> GaussianState:
    """Two-mode squeezed pair: Var(qA - qB) = Var(pA + pB) = e^{-2r}.

    With ``anti`` the correlations are Var(qA + qB) = Var(pA - pB) = e^{-2r}.
    """
    return apply_symplectic(vacuum(2, labels), epr_symplectic(_check_r(r), anti))


def _embed_pair(n_modes: int, j: int, block: np.ndarray) -> np.ndarray:
    s = np.eye(2 * n_modes)
    s[2 * j : 2 * j + 4, 2 * j : 2 * j + 4] = block
    return s


def _linear_output(initial: GaussianState, s: np.ndarray, lin: np.ndarray, labels) -> GaussianState:
    # Compose before propagating: the e^{r} factors then cancel inside lin @ s
    # instead of between e^{2r}-sized covariance entries.
    g = lin @ s
    return GaussianState(g @ initial.mean, g @ initial.cov @ g.T, tuple(labels))


@dataclass(frozen=True)
class BKResult:
    outcome: CVOutcome
    output: GaussianState
    ensemble: GaussianState

    def fidelity(self, target: GaussianState) -> float:
        """Outcome-averaged fidelity; equals the mean per-shot fidelity for a pure target."""
        return fidelity(self.ensemble, target)


def _bk_network(inp: GaussianState, r: float) -> tuple[GaussianState, np.ndarray]:
    """Vacuum-level initial state (in, A, B) and the symplectic map up to the homodynes."""
    initial = product(inp.with_labels(["in"]), vacuum(2, ("A", "B")))
    s = beamsplitter_matrix(3, np.pi / 4, 0, 1) @ _embed_pair(3, 1, epr_symplectic(r))
    return initial, s


def bk_teleport(
    inp: GaussianState, r: float, rng_seed=None, *, outcome: CVOutcome | None = None
) -> BKResult:
    """One-way teleportation of a single mode through an EPR pair at squeezing r.

    After mixing input and A on a beamsplitter, q of A gives a = q_A - q_in
    and p of the input port gives b = p_in + p_A.  Bob's mode then sits at
    (q_in + a, p_in - b), so the unity-gain correction is displace(-a, +b).
    """
    if inp.n_modes != 1:
        raise InvalidInput("input must be a single mode")
    r = _check_r(r)
    st = apply_symplectic(*_bk_network(inp, r))
    rng = rng_from(rng_seed)
    forced = (None, None) if outcome is None else (outcome.a / np.sqrt(2), outcome.b / np.sqrt(2))
    x1, st = homodyne_condition(st, "A", "q", rng, outcome=forced[0])
    x2, st = homodyne_condition(st, "in", "p", rng, outcome=forced[1])
    out = CVOutcome(np.sqrt(2) * x1, np.sqrt(2) * x2)
    bob = displace(st, "B", -out.a, out.b)
    bob = bob.with_labels(inp.labels)
    return BKResult(out, bob, bk_ensemble(inp, r))


def bk_ensemble(inp: GaussianState, r: float) -> GaussianState:
    """Output averaged over outcomes: the corrected Bob quadratures are a linear
    function of the pre-measurement quadratures, so their moments follow exactly."""
    initial, s = _bk_network(inp, _check_r(r))
    # rows: q_B - sqrt2 * q_A', p_B + sqrt2 * p_in'   (columns q_in, p_in, q_A, p_A, q_B, p_B)
    lin = np.zeros((2, 6))
    lin[0, 4], lin[0, 2] = 1, -np.sqrt(2)
    lin[1, 5], lin[1, 1] = 1, np.sqrt(2)
    return _linear_output(initial, s, lin, inp.labels)


@dataclass(frozen=True)
class CrossedCVResult:
    outcome: CVOutcome
    readings: tuple[float, float, float, float]
    uncorrected: GaussianState
    corrected: GaussianState
    ensemble: GaussianState
    ancilla_pairs: int
    schedule: tuple = field(default=())


def crossed_tolerance(r_ancilla: float) -> float:
    return 5 * np.exp(-2 * r_ancilla) + 1e-9


# Stage T1 reads q1 and p2; stage T2 reads q2 and p1 on the partner halves.
CROSSED_SCHEDULE = (
    ("T1", "1", "q", "a1", 1.0),
    ("T1", "2", "p", "b2", -1.0),
    ("T2", "2", "q", "a2", -1.0),
    ("T2", "1", "p", "b1", 1.0),
)
_CROSSED_MODES = ("1", "2", "a1", "a2", "b1", "b2")


def _crossed_network(state_1: GaussianState, state_2: GaussianState, r: float):
    initial = product(
        state_1.with_labels(["1"]), state_2.with_labels(["2"]), vacuum(4, _CROSSED_MODES[2:])
    )
    anti = epr_symplectic(r, anti=True)
    s = _embed_pair(6, 4, anti) @ _embed_pair(6, 2, anti)
    for _, c, quad, t, g in CROSSED_SCHEDULE:
        s = qnd_matrix(6, _CROSSED_MODES.index(c), quad, _CROSSED_MODES.index(t), g) @ s
    return initial, s


def crossed_cv_teleport(
    state_1: GaussianState,
    state_2: GaussianState,
    r_ancilla: float,
    rng_seed=None,
    *,
    readings: Sequence[float] | None = None,
) -> CrossedCVResult:
    """Two-way teleportation by a crossed measurement of q1 - q2 and p1 - p2.

    Ancilla pairs have qa1 + qa2 ~ 0 and pa1 ~ pa2.  Each particle is coupled
    to one half at the first stage and to the partner half at the second,
    then all four ancilla q are read: a = qa1 + qa2 ~ q1 - q2 and
    b = qb1 + qb2 ~ p1 - p2.  The back-action leaves mode 1 at
    (q2 + a, p2 + b) and mode 2 at (q1 - a, p1 - b).
    """
    if state_1.n_modes != 1 or state_2.n_modes != 1:
        raise InvalidInput("both inputs must be single modes")
    r = _check_r(r_ancilla)
    st = apply_symplectic(*_crossed_network(state_1, state_2, r))
    rng = rng_from(rng_seed)
    names = ("a1", "a2", "b1", "b2")
    forced = [None] * 4 if readings is None else [float(x) for x in readings]
    vals = []
    for name, x in zip(names, forced):
        v, st = homodyne_condition(st, name, "q", rng, outcome=x)
        vals.append(v)
    out = CVOutcome(vals[0] + vals[1], vals[2] + vals[3])
    corrected = displace(displace(st, "1", -out.a, -out.b), "2", out.a, out.b)
    ens = crossed_ensemble(state_1, state_2, r)
    return CrossedCVResult(out, tuple(vals), st, corrected, ens, 2, CROSSED_SCHEDULE)


def crossed_ensemble(state_1: GaussianState, state_2: GaussianState, r_ancilla: float):
    """Corrected two-mode output averaged over outcomes (exact linear map)."""
    initial, s = _crossed_network(state_1, state_2, _check_r(r_ancilla))
    # columns: q1 p1 q2 p2 | qa1 pa1 qa2 pa2 | qb1 pb1 qb2 pb2
    lin = np.zeros((4, 12))
    lin[0, 0] = lin[1, 1] = lin[2, 2] = lin[3, 3] = 1
    lin[0, [4, 6]] = -1
    lin[1, [8, 10]] = -1
    lin[2, [4, 6]] = 1
    lin[3, [8, 10]] = 1
    return _linear_output(initial, s, lin, ("1", "2"))
