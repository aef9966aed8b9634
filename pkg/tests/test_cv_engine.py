import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import seeds
from telelab.cv_engine import (
    CROSSED_SCHEDULE,
    GaussianState,
    InvalidInput,
    beamsplitter_matrix,
    bk_ensemble,
    bk_teleport,
    coherent,
    crossed_cv_teleport,
    crossed_ensemble,
    crossed_tolerance,
    displace,
    epr_pair,
    fidelity,
    gaussian_symplectic,
    homodyne_condition,
    is_symplectic,
    omega,
    phase_matrix,
    product,
    qnd_matrix,
    squeeze_matrix,
    vacuum,
)

squeezing = st.floats(0, 3)
angles = st.floats(-np.pi, np.pi)
coords = st.floats(-5, 5)


def _uncertainty_ok(g):
    return np.linalg.eigvalsh(g.cov + 0.5j * omega(g.n_modes)).min() > -1e-9


def test_invalid_states_rejected():
    with pytest.raises(InvalidInput):
        GaussianState(np.zeros(2), np.eye(2) * 0.1)
    with pytest.raises(InvalidInput):
        GaussianState(np.zeros(2), np.array([[1, 0.2], [0, 1]]))


def test_squeezed_vacuum():
    r = 0.8
    out = gaussian_symplectic(vacuum(1), "squeeze", r, 0)
    assert np.allclose(out.cov, np.diag([np.exp(-2 * r) / 2, np.exp(2 * r) / 2]), atol=1e-12)


def test_beamsplitter_on_squeezed_pair_makes_epr_correlations():
    r = 1.1
    st_ = gaussian_symplectic(vacuum(2), "squeeze", r, 0)
    st_ = gaussian_symplectic(st_, "squeeze", -r, 1)
    st_ = gaussian_symplectic(st_, "beamsplitter", np.pi / 4, 0, 1)
    c = st_.cov
    var_q_diff = c[0, 0] + c[2, 2] - 2 * c[0, 2]
    var_p_sum = c[1, 1] + c[3, 3] + 2 * c[1, 3]
    assert abs(var_q_diff - np.exp(-2 * r)) < 1e-12
    assert abs(var_p_sum - np.exp(-2 * r)) < 1e-12


def test_epr_pair_matches_hyperbolic_form():
    r = 0.7
    c = epr_pair(r).cov
    ch, sh = np.cosh(2 * r) / 2, np.sinh(2 * r) / 2
    want = np.array([[ch, 0, sh, 0], [0, ch, 0, -sh], [sh, 0, ch, 0], [0, -sh, 0, ch]])
    assert np.max(np.abs(c - want)) < 1e-12


@given(angles)
def test_beamsplitter_inverse(theta):
    s = beamsplitter_matrix(2, theta, 0, 1) @ beamsplitter_matrix(2, -theta, 0, 1)
    assert np.max(np.abs(s - np.eye(4))) < 1e-12


@given(angles, squeezing, angles, st.floats(-3, 3))
def test_generators_are_symplectic(theta, r, phi, g):
    for s in (
        beamsplitter_matrix(3, theta, 0, 2),
        squeeze_matrix(3, r, 1),
        phase_matrix(3, phi, 2),
        qnd_matrix(3, 0, "q", 1, g),
        qnd_matrix(3, 2, "p", 0, g),
    ):
        assert is_symplectic(s)


@given(seeds)
def test_random_network_preserves_uncertainty(seed):
    rng = np.random.default_rng(seed)
    g = product(coherent(*rng.normal(size=2), "a"), epr_pair(rng.uniform(0, 2), ("b", "c")))
    for _ in range(5):
        kind = rng.integers(3)
        if kind == 0:
            g = gaussian_symplectic(g, "beamsplitter", rng.uniform(-3, 3), "a", "c")
        elif kind == 1:
            g = gaussian_symplectic(g, "squeeze", rng.uniform(-1, 1), "b")
        else:
            g = gaussian_symplectic(g, "phase", rng.uniform(-3, 3), "a")
        assert _uncertainty_ok(g)
        assert np.max(np.abs(g.cov - g.cov.T)) < 1e-10


def test_vacuum_homodyne_marginal():
    rng = np.random.default_rng(0)
    xs = np.array([homodyne_condition(vacuum(2), 0, "q", rng)[0] for _ in range(4000)])
    assert abs(xs.mean()) < 4 * np.sqrt(0.5 / 4000)
    assert abs(xs.var() - 0.5) < 0.05


@given(coords)
def test_conditioning_product_leaves_other_mode(x):
    g = product(coherent(1.0, -2.0, "a"), gaussian_symplectic(vacuum(1, ["b"]), "squeeze", 0.3, 0))
    _, rest = homodyne_condition(g, "a", "q", outcome=x)
    assert np.allclose(rest.mean, [0, 0]) and np.allclose(rest.cov, g.reduced(["b"]).cov)


@given(squeezing, coords)
def test_epr_conditioning_formula(r, a):
    _, rest = homodyne_condition(epr_pair(r), "A", "q", outcome=a)
    ch, sh = np.cosh(2 * r) / 2, np.sinh(2 * r) / 2
    assert abs(rest.mean[0] - a * sh / ch) < 1e-9
    assert abs(rest.cov[0, 0] - (ch - sh**2 / ch)) < 1e-9


@given(coords, coords)
def test_displace_and_inverse(dq, dp):
    g = displace(vacuum(1), 0, 1, 0)
    assert np.allclose(g.mean, [1, 0]) and np.allclose(g.cov, np.eye(2) / 2)
    back = displace(displace(g, 0, dq, dp), 0, -dq, -dp)
    assert np.max(np.abs(back.mean - g.mean)) < 1e-10


def test_bk_classical_limit():
    inp = coherent(0.3, -1.2)
    assert abs(bk_teleport(inp, 0.0, 1).fidelity(inp) - 0.5) < 1e-10


def test_bk_high_squeezing():
    inp = coherent(0.3, -1.2)
    assert bk_teleport(inp, 10.0, 1).fidelity(inp) > 0.9999


@given(squeezing, coords, coords)
def test_bk_fidelity_formula(r, q, p):
    inp = coherent(q, p)
    assert abs(bk_teleport(inp, r, 0).fidelity(inp) - 1 / (1 + np.exp(-2 * r))) < 1e-10


@given(squeezing, coords, coords)
def test_bk_added_noise(r, q, p):
    inp = coherent(q, p)
    ens = bk_ensemble(inp, r)
    assert np.max(np.abs(ens.cov - (inp.cov + np.exp(-2 * r) * np.eye(2)))) < 1e-9
    assert np.max(np.abs(ens.mean - inp.mean)) < 1e-9


def test_bk_ensemble_matches_sampled_shots():
    # Law of total covariance over sampled outcomes reproduces the exact ensemble.
    inp, r, n = coherent(0.5, 0.2), 0.6, 4000
    rng = np.random.default_rng(5)
    shots = [bk_teleport(inp, r, rng).output for _ in range(n)]
    means = np.array([s.mean for s in shots])
    cov = shots[0].cov + np.cov(means.T)
    want = bk_ensemble(inp, r)
    assert np.max(np.abs(means.mean(axis=0) - want.mean)) < 4 * np.sqrt(np.diag(want.cov).max() / n)
    assert np.max(np.abs(cov - want.cov)) < 0.06


def test_bk_fidelity_monotone():
    inputs = [coherent(q, p) for q, p in np.random.default_rng(2).normal(size=(10, 2))]
    rs = np.arange(0, 2.0001, 0.25)
    f = [np.mean([bk_teleport(i, r, 0).fidelity(i) for i in inputs]) for r in rs]
    assert np.all(np.diff(f) >= -1e-6)


def test_crossed_resources():
    res = crossed_cv_teleport(coherent(1, 0, "x"), coherent(0, 1, "y"), 2.0, 0)
    assert res.ancilla_pairs == 2
    assert [s[0] for s in res.schedule] == ["T1", "T1", "T2", "T2"]
    assert res.schedule == CROSSED_SCHEDULE


def test_crossed_swap_at_high_squeezing():
    s1, s2 = coherent(1, 0, "x"), coherent(0, 1, "y")
    rng = np.random.default_rng(3)
    for _ in range(20):
        res = crossed_cv_teleport(s1, s2, 10.0, rng)
        c = res.corrected
        assert np.max(np.abs(c.mean - [0, 1, 1, 0])) < 1e-3
        assert np.max(np.abs(c.cov - np.eye(4) / 2)) < 1e-3


@given(st.floats(0, 10), coords, coords)
def test_crossed_ensemble_within_tolerance(r, q, p):
    s1, s2 = coherent(q, p, "x"), coherent(-p, q, "y")
    ens = crossed_ensemble(s1, s2, r)
    want_mean = np.concatenate([s2.mean, s1.mean])
    assert np.max(np.abs(ens.mean - want_mean)) <= crossed_tolerance(r)
    assert np.max(np.abs(ens.cov - np.eye(4) / 2)) <= crossed_tolerance(r)


@given(st.floats(0, 6))
def test_crossed_excess_noise_scales_as_squeezed_variance(r):
    # Added noise is e^{-2r} times a fixed pattern; its largest entry is 2 e^{-2r}.
    pattern = np.array([[2, 0, -1, 0], [0, 1, 0, -1], [-1, 0, 1, 0], [0, -1, 0, 2]])
    ens = crossed_ensemble(coherent(0, 0, "x"), coherent(0, 0, "y"), r)
    assert np.max(np.abs(ens.cov - np.eye(4) / 2 - np.exp(-2 * r) * pattern)) < 1e-9


def test_crossed_shift_law_regression():
    s1, s2 = coherent(1, 0, "x"), coherent(0, 1, "y")
    rng = np.random.default_rng(4)
    rows = []
    for _ in range(100):
        res = crossed_cv_teleport(s1, s2, 10.0, rng)
        rows.append((res.outcome.a, res.outcome.b, *res.uncorrected.mean))
    a, b, q1, p1, q2, p2 = np.array(rows).T
    for shift, moved in ((-a, q2 - 1), (-b, p2 - 0), (a, q1 - 0), (b, p1 - 1)):
        slope = np.polyfit(shift, moved, 1)[0]
        assert abs(slope - 1) < 1e-3


def test_fidelity_is_symmetric_and_unit_on_self():
    a, b = coherent(0.1, 0.4), coherent(-0.3, 0.2)
    assert abs(fidelity(a, a) - 1) < 1e-12
    assert abs(fidelity(a, b) - fidelity(b, a)) < 1e-12
