from dataclasses import replace

import numpy as np
import pytest

from conftest import small_ensemble_config, small_model_config
from src.ensemble import sample_models
from src.errors import SingularPropagator
from src.model_core import sample_realization
from src.scattering import (
    decoupled_backscatter,
    green_functions,
    s_ab_resummed,
    s_matrix_direct,
    side_propagator,
    solve_symmetric,
    transmission_analytic_oracle,
    transmission_from_average,
)

ENERGIES = (-0.2, -0.05, 0.0, 0.07, 0.2)


@pytest.mark.parametrize("energy", ENERGIES)
def test_s_matrix_unitary_and_symmetric(model, energy):
    s = s_matrix_direct(model, energy)
    assert s.s.shape == (9, 9)
    assert s.unitarity_defect() < 1e-10
    assert s.symmetry_defect() < 1e-10


def test_s_matrix_blocks(model):
    s = s_matrix_direct(model, 0.0)
    assert s.ab.shape == (4, 5)
    assert s.ba.shape == (5, 4)
    assert np.allclose(s.ab, s.ba.T, atol=1e-12)
    assert s.block_index[4] == (2, 0)
    assert s.n_channels_2 == 5


@pytest.mark.parametrize("energy", ENERGIES)
def test_resummed_block_equals_direct(model, energy):
    direct = s_matrix_direct(model, energy).ab
    resummed = s_ab_resummed(model, energy)
    assert np.max(np.abs(direct - resummed)) < 1e-10


def test_single_channel_per_side():
    cfg = small_model_config(n_channels=(1, 1))
    m = sample_realization(cfg, np.random.default_rng(3))
    s = s_matrix_direct(m, 0.05)
    assert s.s.shape == (2, 2)
    assert s.unitarity_defect() < 1e-10


@pytest.mark.parametrize("energy", (-0.3, 0.05, 0.4))
def test_single_level_closed_form(energy):
    # N = 1, un canal : S = (E - h - i pi v^2) / (E - h + i pi v^2)
    cfg = small_model_config(n_dim=1, k=1, n_channels=(1, 1), sv=(0.0,), htr=(0.7,))
    m = sample_realization(cfg, np.random.default_rng(5))
    s = s_matrix_direct(m, energy)
    for side, h, w in ((1, m.h1.matrix[0, 0], m.w1), (2, m.h2.matrix[0, 0], m.w2)):
        width = np.pi * w.strengths[0]
        expected = (energy - h - 1j * width) / (energy - h + 1j * width)
        assert decoupled_backscatter(m, energy, side)[0, 0] == pytest.approx(expected, abs=1e-12)
        assert s.s[side - 1, side - 1] == pytest.approx(expected, abs=1e-12)
    assert abs(s.ab[0, 0]) < 1e-14


def test_decoupled_spaces_do_not_transmit():
    cfg = small_model_config(sv=(0.0, 0.0, 0.0))
    m = sample_realization(cfg, np.random.default_rng(4))
    assert not np.any(s_ab_resummed(m, 0.0))
    assert np.max(np.abs(s_matrix_direct(m, 0.0).ab)) < 1e-14


@pytest.mark.parametrize("side", (1, 2))
def test_decoupled_backscatter_unitary(model, side):
    s = decoupled_backscatter(model, 0.03, side)
    n = model.w1.n_channels if side == 1 else model.w2.n_channels
    assert s.shape == (n, n)
    assert np.allclose(s.conj().T @ s, np.eye(n), atol=1e-10)
    assert np.allclose(s, s.T, atol=1e-12)


def test_decoupled_backscatter_rejects_bad_side(model):
    with pytest.raises(ValueError):
        decoupled_backscatter(model, 0.0, 3)


def test_green_functions(model):
    g = green_functions(model, 0.01)
    d1 = side_propagator(model.h1.matrix, model.gamma1(), 0.01)
    assert np.allclose(d1 @ g.g1, np.eye(model.n_dim), atol=1e-9)
    assert np.allclose(g.g1, g.g1.T, atol=1e-10)
    assert g.gtr_exact.shape == (model.k, model.k)
    # partie anti-hermitienne de G^-1 : Im G <= 0 sur la diagonale
    assert np.all(np.diagonal(g.g1).imag <= 1e-12)


def test_solve_symmetric_detects_singular_matrix():
    with pytest.raises(SingularPropagator) as err:
        solve_symmetric(np.zeros((2, 2), dtype=complex), np.eye(2, dtype=complex), 0.25)
    assert err.value.energy == 0.25


def test_solve_symmetric_empty_rhs():
    x = solve_symmetric(np.eye(3, dtype=complex), np.zeros((3, 0), dtype=complex), 0.0)
    assert x.shape == (3, 0)


# --- coefficients de transmission ---

def test_transmission_limits():
    t = transmission_from_average([0.0, 1.0, 0.6j])
    assert np.allclose(t.t_values, [1.0, 0.0, 0.64])
    assert t.sum_t == pytest.approx(1.64)
    assert np.allclose(t.relative(), t.t_values / 1.64)


def test_transmission_clamped():
    t = transmission_from_average([1.0 + 1e-9])
    assert t.t_values[0] == 0.0


def test_oracle_perfect_coupling():
    lam = 1.3
    assert transmission_analytic_oracle(lam / np.pi, lam) == pytest.approx(1.0, abs=1e-15)


def test_oracle_vectorized():
    t = transmission_analytic_oracle(np.array([0.0, 1.0 / np.pi, 3.0 / np.pi]), 1.0)
    assert np.allclose(t, [0.0, 1.0, 0.75])


@pytest.mark.slow
def test_average_backscatter_matches_oracle():
    # x = 0.5 : <S_aa> = 1/3 au centre de bande, T = 8/9
    model = replace(small_model_config(n_dim=400, n_channels=(25, 25)), channel_strengths_1=(0.5 / np.pi,) * 25)
    cfg = small_ensemble_config(model=model, n_realizations=200, energies=(0.0,))
    mean_s = np.mean([np.diagonal(decoupled_backscatter(m, 0.0, 1)) for m in sample_models(cfg)], axis=0)
    t = transmission_from_average(mean_s)
    assert transmission_analytic_oracle(0.5 / np.pi, 1.0) == pytest.approx(8.0 / 9.0)
    assert np.mean(t.t_values) == pytest.approx(8.0 / 9.0, rel=0.05)
