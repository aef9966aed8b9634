"""Wavefunctions on a periodic position grid, and one-way teleportation of
arbitrary (non-Gaussian) single-mode states through a finitely squeezed EPR pair.

Points q_j = q_min + j*h, h = (q_max - q_min)/N, with N a power of two.  The
joint (input, A, B) array has N^3 entries.  The Bell measurement of
q_in - q_A and p_in + p_A is exact on the grid: outcome k is an index
difference and m a discrete momentum, so the correcting shift and kick are
exact lattice operations.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cv_engine import CVOutcome, _check_r
from .quantum_core import InvalidInput, rng_from

NORM_TOL = 1e-8
MAX_POINTS = 128
VACUUM_WIDTH = 1 / np.sqrt(2)
_MAGIC = b"TLGRID01"


@dataclass(frozen=True)
class GridSpec:
    q_min: float
    q_max: float
    points: int

    def __post_init__(self):
        n = int(self.points)
        if n < 2 or n & (n - 1):
            raise InvalidInput(f"grid points must be a power of two, got {n}")
        if not self.q_max > self.q_min:
            raise InvalidInput("q_max must exceed q_min")

    @property
    def h(self) -> float:
        return (self.q_max - self.q_min) / self.points

    @property
    def q(self) -> np.ndarray:
        return self.q_min + self.h * np.arange(self.points)

    @property
    def dp(self) -> float:
        return 2 * np.pi / (self.points * self.h)

    @property
    def p(self) -> np.ndarray:
        return self.dp * np.fft.fftfreq(self.points, d=1 / self.points)


@dataclass(frozen=True)
class GridWavefunction:
    grid: GridSpec
    amplitudes: np.ndarray
    n_modes: int = 1

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex)
        shape = (self.grid.points,) * self.n_modes
        if amp.shape != shape:
            amp = amp.reshape(shape)
        norm = float(np.sum(np.abs(amp) ** 2) * self.grid.h**self.n_modes)
        if abs(norm - 1) > NORM_TOL:
            raise InvalidInput(f"Riemann norm {norm:.12g} differs from 1")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @classmethod
    def normalized(cls, grid: GridSpec, amplitudes, n_modes: int = 1) -> GridWavefunction:
        amp = np.asarray(amplitudes, dtype=complex)
        norm = np.sqrt(np.sum(np.abs(amp) ** 2) * grid.h**n_modes)
        if norm == 0:
            raise InvalidInput("zero wavefunction")
        return cls(grid, amp / norm, n_modes)

    def unit_vector(self) -> np.ndarray:
        """Amplitudes rescaled to a unit vector in C^(N^n)."""
        return self.amplitudes * self.grid.h ** (self.n_modes / 2)


def gaussian_packet(grid: GridSpec, q0: float = 0.0, p0: float = 0.0, width: float = VACUUM_WIDTH):
    """Minimum-uncertainty packet; ``width`` is the position standard deviation."""
    q = grid.q
    return GridWavefunction.normalized(grid, np.exp(-((q - q0) ** 2) / (4 * width**2) + 1j * p0 * q))


def cat_state(grid: GridSpec, separation: float = 2.0, sign: int = 1):
    """Vacuum-width packets at +separation and -separation, added with ``sign``."""
    q = grid.q
    amp = np.exp(-((q - separation) ** 2) / 2) + sign * np.exp(-((q + separation) ** 2) / 2)
    return GridWavefunction.normalized(grid, amp)


def _single(psi: GridWavefunction) -> None:
    if psi.n_modes != 1:
        raise InvalidInput("a single-mode wavefunction is required")


def fidelity(a: GridWavefunction, b: GridWavefunction) -> float:
    if a.grid != b.grid or a.n_modes != b.n_modes:
        raise InvalidInput("wavefunctions live on different grids")
    return float(abs(np.vdot(a.unit_vector(), b.unit_vector())) ** 2)


def mean_q(psi: GridWavefunction) -> float:
    _single(psi)
    w = np.abs(psi.amplitudes) ** 2 * psi.grid.h
    return float(w @ psi.grid.q)


def var_q(psi: GridWavefunction) -> float:
    m = mean_q(psi)
    w = np.abs(psi.amplitudes) ** 2 * psi.grid.h
    return float(w @ (psi.grid.q - m) ** 2)


def _momentum_weights(psi: GridWavefunction) -> np.ndarray:
    phi = np.fft.fft(psi.amplitudes)
    w = np.abs(phi) ** 2
    return w / w.sum()


def mean_p(psi: GridWavefunction) -> float:
    _single(psi)
    return float(_momentum_weights(psi) @ psi.grid.p)


def var_p(psi: GridWavefunction) -> float:
    m = mean_p(psi)
    return float(_momentum_weights(psi) @ (psi.grid.p - m) ** 2)


def parity(psi: GridWavefunction) -> float:
    """<psi|P|psi> about q = 0; pi times the Wigner function at the origin.

    Needs a grid symmetric about 0 (q_min = -q_max), so that q -> -q maps
    index j to (N - j) mod N.
    """
    _single(psi)
    g = psi.grid
    if not np.isclose(g.q_min, -g.q_max):
        raise InvalidInput("parity needs a grid symmetric about 0")
    v = psi.unit_vector()
    mirrored = v[(-np.arange(g.points)) % g.points]
    return float(np.vdot(v, mirrored).real)


@dataclass(frozen=True)
class Displacement:
    psi: GridWavefunction
    shift_points: int
    rounding: float


def displace(psi: GridWavefunction, dq: float, dp: float) -> Displacement:
    """psi(q) -> e^{i dp q} psi(q - dq), dq rounded to the nearest grid multiple."""
    _single(psi)
    g = psi.grid
    k = int(np.rint(dq / g.h))
    out = np.roll(psi.amplitudes, k) * np.exp(1j * dp * g.q)
    return Displacement(GridWavefunction(g, out), k, float(k * g.h - dq))


def _oversampling(grid: GridSpec, r: float) -> int:
    m = 1
    while grid.h / m > np.exp(-r) / 3 and m < 16:
        m *= 2
    return m


def grid_epr(grid: GridSpec, r: float) -> tuple[np.ndarray, dict]:
    """EPR pair (q_A ~ q_B, p_A ~ -p_B) as a unit vector on the N x N grid.

    The two-mode squeezed vacuum is sampled on an oversampled grid, then
    restricted to the grid's band of momenta.  Reports the effective
    squeezing achieved.
    """
    r = _check_r(r)
    n, m = grid.points, _oversampling(grid, r)
    length = grid.q_max - grid.q_min
    qf = grid.q_min + grid.h / m * np.arange(n * m)
    qa, qb = np.meshgrid(qf, qf, indexing="ij")
    fine = np.exp(-((qa - qb) ** 2) * np.exp(2 * r) / 4 - (qa + qb) ** 2 * np.exp(-2 * r) / 4)
    spec = np.fft.fft2(fine)
    band = np.r_[0 : n // 2, n * m - n // 2 : n * m]
    coarse = np.fft.ifft2(spec[np.ix_(band, band)])
    coarse /= np.linalg.norm(coarse)
    w = np.abs(coarse) ** 2
    q = grid.q
    diff = (q[:, None] - q[None, :] + length / 2) % length - length / 2
    var_diff = float(np.sum(w * diff**2))
    phi = np.abs(np.fft.fft2(coarse)) ** 2
    phi /= phi.sum()
    psum = grid.p[:, None] + grid.p[None, :]
    var_psum = float(np.sum(phi * psum**2))
    meta = {
        "oversampling": m,
        "var_q_difference": var_diff,
        "var_p_sum": var_psum,
        "effective_r_q": float(-0.5 * np.log(var_diff)),
        "effective_r_p": float(-0.5 * np.log(var_psum)),
    }
    return coarse, meta


@dataclass(frozen=True)
class GridTeleportResult:
    outcome: CVOutcome
    indices: tuple[int, int]
    probability: float
    uncorrected: GridWavefunction
    output: GridWavefunction
    average_fidelity: float
    metadata: dict = field(default_factory=dict)


def check_grid(grid: GridSpec) -> None:
    if grid.points > MAX_POINTS:
        raise InvalidInput(f"{grid.points}^3 joint grid exceeds the {MAX_POINTS}^3 limit")
    if grid.h > VACUUM_WIDTH:
        raise InvalidInput(
            f"grid spacing {grid.h:.3g} exceeds the vacuum width {VACUUM_WIDTH:.3g}; "
            "use more points or a smaller box"
        )


def _signed(i: int, n: int) -> int:
    return i - n if i >= n // 2 else i


def bell_outcome_amplitudes(psi: GridWavefunction, epr: np.ndarray) -> np.ndarray:
    """Bob's unnormalized state for every Bell outcome: array [k, m, b]."""
    n = psi.grid.points
    v = psi.unit_vector()
    j = np.arange(n)
    shifted = v[(j[None, :] + j[:, None]) % n]  # [k, j] = psi[(j + k) mod n]
    t = shifted[:, :, None] * epr[None, :, :]
    return np.fft.fft(t, axis=1) / np.sqrt(n)


def grid_teleport(
    psi: GridWavefunction,
    r: float,
    rng_seed=None,
    *,
    outcome: tuple[int, int] | None = None,
) -> GridTeleportResult:
    """Teleport a single-mode wavefunction; ``outcome`` forces grid indices (k, m).

    Outcomes are sampled by inverse-CDF sampling, first k from its marginal
    and then m given k.  The detector resolution is one grid cell in each
    quadrature.  ``average_fidelity`` is the exact mean over all outcomes.
    """
    _single(psi)
    g = psi.grid
    check_grid(g)
    epr, meta = grid_epr(g, r)
    n = g.points
    bob = bell_outcome_amplitudes(psi, epr)
    probs = np.sum(np.abs(bob) ** 2, axis=2)
    if outcome is None:
        rng = rng_from(rng_seed)
        pk = probs.sum(axis=1)
        k = int(min(np.searchsorted(np.cumsum(pk) / pk.sum(), rng.random(), side="right"), n - 1))
        row = probs[k]
        m = int(min(np.searchsorted(np.cumsum(row) / row.sum(), rng.random(), side="right"), n - 1))
    else:
        k, m = (int(x) % n for x in outcome)
    out = CVOutcome(-_signed(k, n) * g.h, _signed(m, n) * g.dp)
    p = float(probs[k, m])
    if p < 1e-300:
        raise InvalidInput("outcome has zero probability")
    uncorrected = GridWavefunction.normalized(g, bob[k, m])
    corrected = displace(uncorrected, -out.a, out.b).psi

    idx = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n  # [k, b] -> b - k
    rolled = np.take_along_axis(bob, idx[:, None, :], axis=2)
    kick = np.exp(2j * np.pi * np.outer(np.arange(n), np.arange(n)) / n)
    overlaps = np.einsum("kmb,mb->km", rolled, kick * psi.unit_vector().conj()[None, :])
    meta.update(
        {
            "detector_resolution_q": g.h,
            "detector_resolution_p": g.dp,
            "total_probability": float(probs.sum()),
        }
    )
    return GridTeleportResult(
        out, (k, m), p, uncorrected, corrected, float(np.sum(np.abs(overlaps) ** 2)), meta
    )


def save_text(psi: GridWavefunction, path) -> None:
    """Header line with the grid, then one 're im' row per amplitude (C order)."""
    g = psi.grid
    header = f"grid q_min={g.q_min!r} q_max={g.q_max!r} points={g.points} n_modes={psi.n_modes}"
    flat = psi.amplitudes.reshape(-1)
    np.savetxt(path, np.column_stack([flat.real, flat.imag]), header=header, fmt="%.17g")


def load_text(path) -> GridWavefunction:
    with open(path) as f:
        header = f.readline().lstrip("#").split()
    fields = dict(item.split("=") for item in header[1:])
    grid = GridSpec(float(fields["q_min"]), float(fields["q_max"]), int(fields["points"]))
    data = np.loadtxt(path, ndmin=2)
    return GridWavefunction(grid, data[:, 0] + 1j * data[:, 1], int(fields["n_modes"]))


def save_binary(psi: GridWavefunction, path) -> None:
    """8-byte magic, <ddqq header (q_min, q_max, points, n_modes), little-endian complex128."""
    g = psi.grid
    head = _MAGIC + struct.pack("<ddqq", g.q_min, g.q_max, g.points, psi.n_modes)
    Path(path).write_bytes(head + psi.amplitudes.astype("<c16").tobytes())


def load_binary(path) -> GridWavefunction:
    raw = Path(path).read_bytes()
    if raw[:8] != _MAGIC:
        raise InvalidInput("not a grid wavefunction file")
    q_min, q_max, points, n_modes = struct.unpack("<ddqq", raw[8:40])
    amp = np.frombuffer(raw[40:], dtype="<c16")
    return GridWavefunction(GridSpec(q_min, q_max, points), amp.copy(), n_modes)
