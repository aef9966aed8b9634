"""Numerical checker and search for Bell-state discrimination by linear
single-particle evolution followed by local detection.

The two particles enter through four orthonormal input modes (up/down for
each of L and R).  A linear evolution maps them to vectors a, b, c, d over
``n_local`` detector modes, so each Bell state becomes a two-particle
amplitude array over detector pairs (i, j).  An outcome identifies a Bell
state only when no other Bell state has support there.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import jax
import jax.numpy as jnp
import numpy as np
import scipy.linalg
import scipy.optimize

from .quantum_core import BELL_ORDER, BellLabel, InvalidInput, bell_vector

jax.config.update("jax_enable_x64", True)

EPS_SUPPORT = 1e-9
SHARPNESS = 1e3
ORTHO_TOL = 1e-10
OPTIMIZER = "L-BFGS-B (scipy) on jax gradients, sharpness annealed 10 -> 100 -> final"


class ParticleStatistics(str, enum.Enum):
    DISTINGUISHABLE = "distinguishable"
    BOSONIC = "bosonic"


@dataclass(frozen=True)
class LinearEvolution:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        vecs = [np.asarray(v, dtype=complex).reshape(-1) for v in (self.a, self.b, self.c, self.d)]
        n = vecs[0].size
        if n < 4 or any(v.size != n for v in vecs):
            raise InvalidInput("need four vectors of equal length n_local >= 4")
        v = np.stack(vecs, axis=1)
        if np.abs(v.conj().T @ v - np.eye(4)).max() > ORTHO_TOL:
            raise InvalidInput("a, b, c, d are not orthonormal")
        for name, vec in zip("abcd", vecs):
            vec.setflags(write=False)
            object.__setattr__(self, name, vec)

    @property
    def n_local(self) -> int:
        return self.a.size

    @property
    def isometry(self) -> np.ndarray:
        return np.stack([self.a, self.b, self.c, self.d], axis=1)

    @classmethod
    def from_isometry(cls, v: np.ndarray) -> LinearEvolution:
        v = np.asarray(v)
        return cls(v[:, 0], v[:, 1], v[:, 2], v[:, 3])

    @classmethod
    def identity(cls, n_local: int = 4) -> LinearEvolution:
        return cls.from_isometry(np.eye(n_local)[:, :4])

    @classmethod
    def random(cls, rng, n_local: int = 4) -> LinearEvolution:
        return cls.from_isometry(random_isometries(rng, 1, n_local)[0])


@dataclass(frozen=True)
class CoefficientMatrices:
    """Amplitude arrays for Psi-, Psi+, Phi-, Phi+ (alpha, beta, gamma, delta).

    With bosonic statistics entry (i, j), i <= j, holds the amplitude of the
    unordered detector pair and the lower triangle is zero.
    """

    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray
    stats: ParticleStatistics = ParticleStatistics.DISTINGUISHABLE

    def stacked(self) -> np.ndarray:
        return np.stack([self.alpha, self.beta, self.gamma, self.delta])

    def by_label(self) -> dict[BellLabel, np.ndarray]:
        return dict(zip(BELL_ORDER, self.stacked()))


def random_isometries(rng, count: int, n_local: int) -> np.ndarray:
    """Haar-random n_local x 4 isometries, shape (count, n_local, 4)."""
    z = rng.normal(size=(count, n_local, 4)) + 1j * rng.normal(size=(count, n_local, 4))
    q, r = np.linalg.qr(z)
    ph = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (ph / np.abs(ph))[:, None, :]


def _outer_products(v, xp=np):
    """Stacked coefficient arrays for isometries v of shape (..., n, 4)."""
    a, b, c, d = (v[..., k] for k in range(4))
    ad = a[..., :, None] * d[..., None, :]
    bc = b[..., :, None] * c[..., None, :]
    ac = a[..., :, None] * c[..., None, :]
    bd = b[..., :, None] * d[..., None, :]
    s = 1 / np.sqrt(2)
    return xp.stack([s * (ad - bc), s * (ad + bc), s * (ac - bd), s * (ac + bd)], axis=-3)


def _symmetrize(m, xp=np):
    """Amplitudes over unordered detector pairs for two identical bosons."""
    n = m.shape[-1]
    upper = xp.triu(m + xp.swapaxes(m, -1, -2), 1)
    diag = np.sqrt(2) * xp.diagonal(m, axis1=-2, axis2=-1)
    return upper + diag[..., None] * xp.eye(n)


def coefficient_matrices(
    u: LinearEvolution, stats: ParticleStatistics = ParticleStatistics.DISTINGUISHABLE
) -> CoefficientMatrices:
    stats = ParticleStatistics(stats)
    m = _outer_products(u.isometry)
    if stats is ParticleStatistics.BOSONIC:
        m = _symmetrize(m)
    return CoefficientMatrices(*m, stats=stats)


def tensor_evolution(u: LinearEvolution) -> dict[BellLabel, np.ndarray]:
    """Independent route: evolve each two-qubit Bell vector by V_L (x) V_R."""
    v_left = np.stack([u.a, u.b], axis=1)
    v_right = np.stack([u.c, u.d], axis=1)
    full = np.kron(v_left, v_right)
    n = u.n_local
    return {lab: (full @ bell_vector(lab)).reshape(n, n) for lab in BELL_ORDER}


@dataclass(frozen=True)
class DiscriminationReport:
    supports: dict
    unambiguous: dict
    success_probability: float
    is_nondegenerate: bool
    eps_support: float

    def identified_labels(self) -> list[BellLabel]:
        return [lab for lab, p in self.unambiguous.items() if p > 0]


def _identify(weights, eps: float, xp=np):
    present = weights > eps
    alone = xp.sum(present, axis=-3, keepdims=True) == 1
    return xp.sum(weights * (present & alone), axis=(-1, -2))


def analyze_discrimination(m: CoefficientMatrices, eps_support: float = EPS_SUPPORT):
    if not 0 < eps_support <= 1e-3:
        raise InvalidInput("eps_support must lie in (0, 1e-3]")
    w = np.abs(m.stacked()) ** 2
    per_label = _identify(w, eps_support)
    supports = {}
    for i, j in zip(*np.nonzero((w > eps_support).any(axis=0))):
        supports[(int(i), int(j))] = [BELL_ORDER[k].value for k in range(4) if w[k, i, j] > eps_support]
    unambiguous = {lab: float(p) for lab, p in zip(BELL_ORDER, per_label)}
    success = float(np.clip(per_label.sum() / 4, 0, 1))
    nondeg = bool(all(abs(p - 1) < 1e-9 for p in per_label))
    return DiscriminationReport(supports, unambiguous, success, nondeg, eps_support)


def exact_success(v: np.ndarray, stats, eps_support: float = EPS_SUPPORT) -> np.ndarray:
    """Vectorized success probability and nondegeneracy flag for isometries (..., n, 4)."""
    m = _outer_products(v)
    if ParticleStatistics(stats) is ParticleStatistics.BOSONIC:
        m = _symmetrize(m)
    per_label = _identify(np.abs(m) ** 2, eps_support)
    return per_label.sum(axis=-1) / 4, np.all(np.abs(per_label - 1) < 1e-9, axis=-1)


def n_params(n_local: int) -> int:
    return n_local * n_local


def _generator(params, n: int, xp=np):
    """Anti-Hermitian n x n matrix from n^2 reals: i*diag, then upper-triangle re/im."""
    iu = np.triu_indices(n, 1)
    k = len(iu[0])
    diag = params[:n]
    re, im = params[n : n + k], params[n + k : n + 2 * k]
    upper = xp.zeros((n, n), dtype=complex)
    if xp is np:
        upper[iu] = re + 1j * im
    else:
        upper = upper.at[iu].set(re + 1j * im)
    return upper - upper.conj().T + 1j * xp.diag(diag)


def isometry_from_params(params, n_local: int) -> np.ndarray:
    params = np.asarray(params, dtype=float)
    if params.size != n_params(n_local):
        raise InvalidInput(f"expected {n_params(n_local)} parameters")
    return scipy.linalg.expm(_generator(params, n_local))[:, :4]


def _smoothed(params, n_local: int, stats: ParticleStatistics, sharpness):
    v = jax.scipy.linalg.expm(_generator(params, n_local, jnp))[:, :4]
    m = _outer_products(v, jnp)
    if stats is ParticleStatistics.BOSONIC:
        m = _symmetrize(m, jnp)
    w = jnp.abs(m) ** 2
    others = jnp.sum(w, axis=0, keepdims=True) - w
    return jnp.sum(w * jnp.exp(-sharpness * others)) / 4


_COMPILED: dict = {}


def _compiled(n_local: int, stats: ParticleStatistics):
    key = (n_local, stats)
    if key not in _COMPILED:
        f = lambda p, s: _smoothed(p, n_local, stats, s)  # noqa: E731
        _COMPILED[key] = (jax.jit(f), jax.jit(jax.value_and_grad(f)))
    return _COMPILED[key]


def success_objective(
    params,
    n_local: int = 4,
    stats: ParticleStatistics = ParticleStatistics.DISTINGUISHABLE,
    sharpness: float = SHARPNESS,
) -> float:
    """Smoothed success probability: the support test becomes exp(-sharpness * weight of rivals)."""
    value, _ = _compiled(n_local, ParticleStatistics(stats))
    return float(value(jnp.asarray(params, dtype=float), float(sharpness)))


@dataclass
class SearchReport:
    seed: int
    n_local: int
    stats: str
    restarts: int
    best_value: float
    best_params: list
    history: list
    smoothed_history: list
    nondegenerate_found: int
    optimizer: str = OPTIMIZER
    sharpness: float = SHARPNESS
    eps_support: float = EPS_SUPPORT
    wall_time: float = field(default=0.0, compare=False)

    def record(self) -> dict:
        return {
            "seed": self.seed,
            "n_local": self.n_local,
            "stats": self.stats,
            "restarts": self.restarts,
            "best_value": self.best_value,
            "best_params": self.best_params,
            "history": self.history,
            "smoothed_history": self.smoothed_history,
            "nondegenerate_found": self.nondegenerate_found,
            "optimizer": self.optimizer,
            "sharpness": self.sharpness,
            "eps_support": self.eps_support,
            "wall_time": self.wall_time,
        }


def _local_search(x0, n_local, stats, sharpness):
    _, vg = _compiled(n_local, stats)
    x = x0
    for s in (10.0, 100.0, float(sharpness)):
        if s > sharpness:
            continue

        def fun(p, s=s):
            val, grad = vg(jnp.asarray(p), s)
            return -float(val), -np.asarray(grad, dtype=float)

        x = scipy.optimize.minimize(fun, x, jac=True, method="L-BFGS-B", options={"maxiter": 200}).x
    return x


def search_maximum(
    n_local: int = 4,
    restarts: int = 200,
    seed: int = 0,
    stats: ParticleStatistics = ParticleStatistics.DISTINGUISHABLE,
    sharpness: float = SHARPNESS,
    eps_support: float = EPS_SUPPORT,
) -> SearchReport:
    """Multi-restart ascent of the smoothed objective; candidates scored exactly.

    Restart k starts from normal(0, 1) parameters drawn from
    SeedSequence([seed, k]), so any restart can be replayed alone.
    """
    if restarts < 1:
        raise InvalidInput("restarts must be >= 1")
    if not 4 <= n_local <= 8:
        raise InvalidInput("n_local must lie in 4..8")
    stats = ParticleStatistics(stats)
    t0 = time.perf_counter()
    history, smooth, best, nondeg = [], [], None, 0
    for k in range(restarts):
        rng = np.random.default_rng(np.random.SeedSequence([seed, k]))
        x = _local_search(rng.normal(size=n_params(n_local)), n_local, stats, sharpness)
        value, flag = exact_success(isometry_from_params(x, n_local), stats, eps_support)
        history.append(float(value))
        smooth.append(success_objective(x, n_local, stats, sharpness))
        nondeg += int(flag)
        if best is None or value > best[0]:
            best = (float(value), x)
    return SearchReport(
        seed, n_local, stats.value, restarts, best[0], [float(p) for p in best[1]],
        history, smooth, nondeg, sharpness=sharpness, eps_support=eps_support,
        wall_time=time.perf_counter() - t0,
    )


def random_audit(count: int, n_local: int, rng, stats, eps_support: float = EPS_SUPPORT, chunk=10_000):
    """Success probabilities of Haar-random isometries; returns (max success, nondegenerate count)."""
    best, flagged = 0.0, 0
    done = 0
    while done < count:
        size = min(chunk, count - done)
        values, flags = exact_success(random_isometries(rng, size, n_local), stats, eps_support)
        best = max(best, float(values.max()))
        flagged += int(flags.sum())
        done += size
    return best, flagged
