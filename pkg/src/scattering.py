"""
Scattering - matrice S exacte pour une réalisation.
散射模块 - 单次实现的精确 S 矩阵

Vue d'ensemble / 功能概述 :
  - D(E) = E - H + (i/2) Gamma sur l'espace complet 2N+k
  - S = 1 - 2 i pi W D^-1 W^T, blocs aa', ab, ba, bb'
  - forme resommée S_ab = -2 i pi W_a G1 V1 G_tr V2^T G2 W_b (complément de Schur)
  - matrices de rétrodiffusion découplées S1, S2 (V1 = V2 = 0)
  - coefficients de transmission T = 1 - |<S_aa>|^2

Flux / 执行顺序 :
  s_matrix_direct | green_functions → s_ab_resummed | decoupled_backscatter
  → transmission_from_average
"""

import sys
import os
from dataclasses import dataclass

import numpy as np
from scipy import linalg

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from config import SOLVE_RESIDUAL_TOL
from src.errors import SingularPropagator
from src.model_core import assemble_full_hamiltonian, total_width_matrix


# ============================================================
# 1. Types
# ============================================================

@dataclass(frozen=True)
class ScatteringMatrix:
    """Full (Lambda1 + Lambda2) S(E); channels of side 1 come first."""
    s: np.ndarray
    energy: float
    n_channels_1: int

    @property
    def n_channels_2(self):
        return self.s.shape[0] - self.n_channels_1

    @property
    def block_index(self):
        """channel -> (side, offset)"""
        n1 = self.n_channels_1
        return {c: (1, c) if c < n1 else (2, c - n1) for c in range(self.s.shape[0])}

    @property
    def aa(self):
        n1 = self.n_channels_1
        return self.s[:n1, :n1]

    @property
    def ab(self):
        n1 = self.n_channels_1
        return self.s[:n1, n1:]

    @property
    def ba(self):
        n1 = self.n_channels_1
        return self.s[n1:, :n1]

    @property
    def bb(self):
        n1 = self.n_channels_1
        return self.s[n1:, n1:]

    def unitarity_defect(self):
        eye = np.eye(self.s.shape[0])
        return float(np.max(np.abs(self.s.conj().T @ self.s - eye), initial=0.0))

    def symmetry_defect(self):
        return float(np.max(np.abs(self.s - self.s.T), initial=0.0))


@dataclass(frozen=True)
class GreenFunctions:
    g1: np.ndarray
    g2: np.ndarray
    gtr_exact: np.ndarray
    energy: float


@dataclass(frozen=True)
class TransmissionCoefficients:
    t_values: np.ndarray
    sum_t: float

    def relative(self):
        """T_c / sum T (formation or decay probability of each channel)."""
        return self.t_values / self.sum_t


# ============================================================
# 2. Résolutions linéaires / 线性求解
# ============================================================

def solve_symmetric(d, rhs, energy):
    """Solve D X = B for complex symmetric D, checking the residual."""
    if rhs.size == 0:
        return np.zeros(rhs.shape, dtype=complex)
    try:
        x = linalg.solve(d, rhs, assume_a="sym", check_finite=False)
    except (linalg.LinAlgError, ValueError) as e:
        raise SingularPropagator(energy, float("inf")) from e
    scale = max(float(np.max(np.abs(rhs))), np.finfo(float).tiny)
    residual = float(np.max(np.abs(d @ x - rhs))) / scale
    if not np.isfinite(residual) or residual > SOLVE_RESIDUAL_TOL:
        raise SingularPropagator(energy, residual)
    return x


def side_propagator(h, gamma, energy):
    """E - H + (i/2) Gamma on one GOE space."""
    d = -h.astype(complex)
    d[np.diag_indices_from(d)] += energy
    return d + 0.5j * gamma


# ============================================================
# 3. Matrice S complète (solve contre D(E), jamais D^-1 explicite)
# 3. 完整 S 矩阵
# ============================================================

def s_matrix_direct(model, energy):
    """S(E) from D(E) = E - H + (i/2) Gamma on the full 2N+k space."""
    n, k = model.n_dim, model.k
    h = assemble_full_hamiltonian(model)
    d = -h.astype(complex)
    d[np.diag_indices_from(d)] += energy
    d += 0.5j * total_width_matrix(model).gamma

    n1, n2 = model.w1.n_channels, model.w2.n_channels
    couplings = np.zeros((2 * n + k, n1 + n2))
    couplings[:n, :n1] = model.w1.rows.T
    couplings[n + k:, n1:] = model.w2.rows.T

    x = solve_symmetric(d, couplings, energy)
    s = np.eye(n1 + n2, dtype=complex) - 2j * np.pi * (couplings.T @ x)
    return ScatteringMatrix(s=s, energy=float(energy), n_channels_1=n1)


def green_functions(model, energy):
    """G1, G2 and the exact (realization-dependent) G_tr at energy E."""
    n = model.n_dim
    d1 = side_propagator(model.h1.matrix, model.gamma1(), energy)
    d2 = side_propagator(model.h2.matrix, model.gamma2(), energy)
    eye = np.eye(n, dtype=complex)
    g1 = solve_symmetric(d1, eye, energy)
    g2 = solve_symmetric(d2, eye, energy)
    v1, v2 = model.v1.v_matrix, model.v2.v_matrix
    dtr = -model.htr.astype(complex) - v1.T @ g1 @ v1 - v2.T @ g2 @ v2
    dtr[np.diag_indices_from(dtr)] += energy
    gtr = solve_symmetric(dtr, np.eye(model.k, dtype=complex), energy)
    return GreenFunctions(g1=g1, g2=g2, gtr_exact=gtr, energy=float(energy))


def s_ab_resummed(model, energy):
    """
    S_ab = -2 i pi W_a G1 V1 G_tr V2^T G2 W_b with the exact G_tr.
    Only Lambda + k right-hand sides are solved per side.
    """
    w1, w2 = model.w1.rows, model.w2.rows
    v1, v2 = model.v1.v_matrix, model.v2.v_matrix
    d1 = side_propagator(model.h1.matrix, model.gamma1(), energy)
    d2 = side_propagator(model.h2.matrix, model.gamma2(), energy)

    # G symétrique : W G V = (G W^T)^T V
    x1 = solve_symmetric(d1, np.hstack([w1.T, v1]).astype(complex), energy)
    x2 = solve_symmetric(d2, np.hstack([w2.T, v2]).astype(complex), energy)
    n1, n2 = w1.shape[0], w2.shape[0]
    g1w, g1v = x1[:, :n1], x1[:, n1:]
    g2w, g2v = x2[:, :n2], x2[:, n2:]

    dtr = -model.htr.astype(complex) - v1.T @ g1v - v2.T @ g2v
    dtr[np.diag_indices_from(dtr)] += energy
    left = g1w.T @ v1                      # W_a G1 V1   (Lambda1 x k)
    right = v2.T @ g2w                     # V2^T G2 W_b (k x Lambda2)
    middle = solve_symmetric(dtr, right, energy)
    return -2j * np.pi * (left @ middle)


def decoupled_backscatter(model, energy, side):
    """S1(E) or S2(E): backscattering of one space with V1 = V2 = 0."""
    if side == 1:
        h, gamma, w = model.h1.matrix, model.gamma1(), model.w1.rows
    elif side == 2:
        h, gamma, w = model.h2.matrix, model.gamma2(), model.w2.rows
    else:
        raise ValueError(f"side must be 1 or 2 (got {side!r})")
    d = side_propagator(h, gamma, energy)
    x = solve_symmetric(d, w.T.astype(complex), energy)
    return np.eye(w.shape[0], dtype=complex) - 2j * np.pi * (w @ x)


# ============================================================
# 4. Coefficients de transmission / 透射系数
# ============================================================

def transmission_from_average(avg_diag):
    """T = 1 - |<S_cc>|^2, clamped to [0, 1]."""
    avg = np.asarray(avg_diag, dtype=complex)
    t = np.clip(1.0 - np.abs(avg) ** 2, 0.0, 1.0)
    return TransmissionCoefficients(t_values=t, sum_t=float(t.sum()))


def transmission_analytic_oracle(v_sq, lam):
    """Cross-check only: T = 4x / (1 + x)^2 with x = pi v^2 / lambda."""
    x = np.pi * np.asarray(v_sq, dtype=float) / lam
    t = 4.0 * x / (1.0 + x) ** 2
    return float(t) if np.ndim(t) == 0 else t
