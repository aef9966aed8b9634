import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import seeds
from telelab import cv_engine
from telelab.cv_grid import (
    GridSpec,
    GridWavefunction,
    InvalidInput,
    cat_state,
    displace,
    fidelity,
    gaussian_packet,
    grid_epr,
    grid_teleport,
    load_binary,
    load_text,
    mean_p,
    mean_q,
    parity,
    save_binary,
    save_text,
    var_p,
    var_q,
)

G128 = GridSpec(-8.0, 8.0, 128)
G32 = GridSpec(-6.0, 6.0, 32)


def test_grid_must_be_power_of_two():
    with pytest.raises(InvalidInput):
        GridSpec(-1, 1, 100)


def test_riemann_norm_enforced():
    with pytest.raises(InvalidInput):
        GridWavefunction(G32, np.ones(32))
    psi = gaussian_packet(G32)
    assert abs(np.sum(np.abs(psi.amplitudes) ** 2) * G32.h - 1) < 1e-8


def test_packet_moments():
    psi = gaussian_packet(G128, 0.7, -0.4)
    assert abs(mean_q(psi) - 0.7) < 1e-9 and abs(var_q(psi) - 0.5) < 1e-9
    assert abs(mean_p(psi) + 0.4) < 1e-9 and abs(var_p(psi) - 0.5) < 1e-9


def test_displacement_moves_centroid():
    psi = gaussian_packet(G128)
    moved = displace(psi, 0.5, 0.0).psi
    assert abs(mean_q(moved) - mean_q(psi) - 0.5) < G128.h


@given(st.integers(-20, 20), st.floats(-3, 3))
def test_displacement_inverse(k, dp):
    psi = cat_state(G128, 1.5)
    dq = k * G128.h
    back = displace(displace(psi, dq, dp).psi, -dq, -dp).psi
    # Amplitude that wraps around the periodic box picks up a relative phase.
    assert fidelity(back, psi) > 1 - 1e-8


def test_parity_of_cats():
    assert abs(parity(cat_state(G128, 2.0, 1)) - 1) < 1e-10
    assert abs(parity(cat_state(G128, 2.0, -1)) + 1) < 1e-10


def test_coarse_grids_rejected():
    with pytest.raises(InvalidInput):
        grid_teleport(gaussian_packet(GridSpec(-8, 8, 16)), 1.0, 0)
    with pytest.raises(InvalidInput):
        grid_teleport(gaussian_packet(GridSpec(-64, 64, 256)), 1.0, 0)


def test_epr_squeezing_reported():
    _, meta = grid_epr(G128, 1.0)
    assert abs(meta["effective_r_q"] - 1.0) < 0.05
    assert abs(meta["effective_r_p"] - 1.0) < 0.05


def test_unsqueezed_channel_is_classical():
    res = grid_teleport(gaussian_packet(G128), 0.0, 0)
    assert abs(res.average_fidelity - 0.5) < 1e-6


@pytest.mark.parametrize("r", [0.5, 1.0, 2.0, 3.0])
def test_packet_matches_gaussian_fidelity_law(r):
    res = grid_teleport(gaussian_packet(G128, 0.3, -0.2), r, 0)
    exact = 1 / (1 + np.exp(-2 * r))
    assert abs(res.average_fidelity - exact) < 1e-3


def test_high_squeezing_packet():
    assert grid_teleport(gaussian_packet(G128), 3.0, 1).average_fidelity > 0.99


def test_cat_keeps_fringes():
    cat = cat_state(G128, 2.0)
    res = grid_teleport(cat, 3.0, 2)
    assert res.average_fidelity > 0.98
    assert np.sign(parity(res.output)) == np.sign(parity(cat))


@pytest.mark.parametrize("r", [1.0, 2.0, 3.0])
@pytest.mark.parametrize("state", ["packet", "cat"])
def test_fidelity_calibration(r, state):
    psi = gaussian_packet(G128) if state == "packet" else cat_state(G128, 2.0)
    assert 1 - grid_teleport(psi, r, 0).average_fidelity <= 4 * np.exp(-2 * r) + 1e-3


def test_average_fidelity_is_outcome_average():
    psi = cat_state(G32, 1.2)
    base = grid_teleport(psi, 0.8, 0)
    total = 0.0
    for k in range(32):
        for m in range(32):
            try:
                res = grid_teleport(psi, 0.8, outcome=(k, m))
            except InvalidInput:
                continue
            total += res.probability * fidelity(res.output, psi)
    assert abs(total - base.average_fidelity) < 1e-10
    assert abs(base.metadata["total_probability"] - 1) < 1e-10


@given(seeds)
def test_sampling_is_seeded(seed):
    psi = gaussian_packet(G32)
    a, b = grid_teleport(psi, 1.0, seed), grid_teleport(psi, 1.0, seed)
    assert a.indices == b.indices


@pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
def test_agrees_with_gaussian_engine(r):
    psi = gaussian_packet(G128, 0.4, 0.3)
    for outcome in [(0, 0), (3, 125), (124, 2)]:
        res = grid_teleport(psi, r, outcome=outcome)
        ref = cv_engine.bk_teleport(cv_engine.coherent(0.4, 0.3), r, outcome=res.outcome).output
        assert abs(mean_q(res.output) - ref.mean[0]) < 2 * G128.h
        assert abs(mean_p(res.output) - ref.mean[1]) < 2 * G128.dp
        assert abs(var_q(res.output) / ref.cov[0, 0] - 1) < 0.05
        assert abs(var_p(res.output) / ref.cov[1, 1] - 1) < 0.05


def test_full_size_runtime():
    t0 = time.perf_counter()
    grid_teleport(cat_state(G128, 2.0), 3.0, 0)
    assert time.perf_counter() - t0 < 60


def test_text_and_binary_round_trip(tmp_path):
    psi = cat_state(G32, 1.0, -1)
    save_text(psi, tmp_path / "psi.txt")
    save_binary(psi, tmp_path / "psi.bin")
    for loaded in (load_text(tmp_path / "psi.txt"), load_binary(tmp_path / "psi.bin")):
        assert loaded.grid == psi.grid
        assert np.max(np.abs(loaded.amplitudes - psi.amplitudes)) < 1e-15


def test_binary_rejects_foreign_file(tmp_path):
    (tmp_path / "x.bin").write_bytes(b"nonsense" * 8)
    with pytest.raises(InvalidInput):
        load_binary(tmp_path / "x.bin")
