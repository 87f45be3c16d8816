"""
Fixtures partagées : petits modèles (N <= 80) pour les tests rapides.
"""

import sys
import os

import numpy as np
import pytest

# Ajouter le répertoire racine au path pour les imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.ensemble import EnsembleConfig
from src.model_core import ModelConfig, sample_realization


def small_model_config(n_dim=40, k=3, n_channels=(4, 5), sv=(0.1, 0.05, 0.025), htr=None, lam=1.0, seed=7):
    """H_tr eigenvalues stay off the usual check energies (0, +-0.1, +-0.2)."""
    strengths_1 = tuple(np.full(n_channels[0], lam / np.pi))
    strengths_2 = tuple(np.full(n_channels[1], lam / np.pi))
    return ModelConfig(
        n_dim=n_dim,
        k_trans=k,
        lam=lam,
        channel_strengths_1=strengths_1,
        channel_strengths_2=strengths_2,
        htr_spec=htr if htr is not None else tuple(np.linspace(-0.13, 0.11, k)),
        sv_1=tuple(sv[:k]),
        sv_2=tuple(sv[:k]),
        seed=seed,
    )


def small_ensemble_config(model=None, n_realizations=8, energies=(-0.1, 0.0, 0.1), workers=1, resample=True, seed=11):
    return EnsembleConfig(
        model=model if model is not None else small_model_config(),
        n_realizations=n_realizations,
        energy_grid=tuple(energies),
        resample_frames=resample,
        master_seed=seed,
        worker_hint=workers,
    )


@pytest.fixture
def model_cfg():
    return small_model_config()


@pytest.fixture
def model(model_cfg):
    return sample_realization(model_cfg, np.random.default_rng(2024))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
