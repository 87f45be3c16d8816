"""
Transition - théorie analytique de la transmission à travers l'espace de transition.
过渡空间透射的解析理论

Vue d'ensemble / 功能概述 :
  - G_tr déterministe = (E - H_eff)^-1, H_eff = H_tr - i sum_j z_j^T z_j
  - diagonalisation complexe-symétrique H_eff = O diag(E_l) O^T (O^T O = 1)
  - amplitudes zeta_j = z_j O, facteur de transport Y (direct, résonant,
    isolé, décomposition diagonale / interférences)
  - probabilité factorisée P_ab = (T_a / sum T) Y (T_b / sum T)
  - diagnostic Monte Carlo des corrélateurs X_a (canal x transition)

Flux / 执行顺序 :
  effective_hamiltonian → diagonalize_complex_symmetric → resonance_amplitudes
  → transport_factor_* → analytic_transmission / total_transmission
"""

import sys
import os
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from config import (
    CONDITION_WARNING,
    CORRELATOR_FLUX_FACTOR,
    CORRELATOR_REL_TOL,
    DEFECTIVE_TOL,
    ORTHOGONALITY_TOL,
    PRESET_SPACING,
)
from src.errors import DefectiveMatrix, IllConditioned, SingularAtEnergy
from src.scattering import side_propagator, solve_symmetric, transmission_from_average


# ============================================================
# 1. Types
# ============================================================

@dataclass(frozen=True)
class EffectiveHamiltonian:
    h_eff: np.ndarray
    z1: np.ndarray
    z2: np.ndarray

    @property
    def widths(self):
        """Anti-Hermitian part: sum_j z_j^T z_j (positive semidefinite)."""
        return self.z1.T @ self.z1 + self.z2.T @ self.z2


@dataclass(frozen=True)
class ResonanceSet:
    """Complex resonance energies E_l = eps_l - i gamma_l, frame O and amplitudes zeta."""
    eigenvalues: np.ndarray
    eigenframe: np.ndarray
    zeta1: np.ndarray = None
    zeta2: np.ndarray = None
    condition: float = 1.0

    @property
    def k(self):
        return self.eigenvalues.shape[0]

    @property
    def positions(self):
        return self.eigenvalues.real

    @property
    def widths(self):
        return -self.eigenvalues.imag

    def _amplitudes(self):
        if self.zeta1 is None or self.zeta2 is None:
            raise ValueError("resonance set built without amplitudes; use build_resonances")
        return self.zeta1, self.zeta2

    def to_dict(self):
        return {
            "positions": self.positions.tolist(),
            "widths": self.widths.tolist(),
            "condition": float(self.condition),
            "overlap": classify_overlap(self),
        }


@dataclass
class CorrelatorReport:
    """
    Monte Carlo X_{c, m'm''} against delta_{m'm''} (f/lambda) T_c / sum T.

    The gate uses the channel sums (sum_c X_{c, mm} = f/lambda); per-channel
    deviations are reported alongside.
    """
    energy: float
    side: int
    x_mean: np.ndarray
    x_error: np.ndarray
    prediction: np.ndarray
    n: int
    identity_defect: float = 0.0
    max_diag_deviation: float = field(init=False)
    pooled_diag_deviation: float = field(init=False)
    pooled_offdiag_ratio: float = field(init=False)
    passed: bool = field(init=False)

    def __post_init__(self):
        k = self.x_mean.shape[1]
        diag = np.real(np.einsum("cmm->cm", self.x_mean))
        expected = self.prediction[:, None]
        self.max_diag_deviation = float(np.max(np.abs(diag - expected) / expected))
        pooled = self.x_mean.sum(axis=0)
        total = float(self.prediction.sum())
        self.pooled_diag_deviation = float(np.max(np.abs(np.real(np.diagonal(pooled)) - total)) / total)
        off = ~np.eye(k, dtype=bool)
        self.pooled_offdiag_ratio = float(np.max(np.abs(pooled[off]), initial=0.0)) / total
        self.passed = bool(
            self.pooled_diag_deviation < CORRELATOR_REL_TOL and self.pooled_offdiag_ratio < CORRELATOR_REL_TOL
        )

    def to_dict(self):
        return {
            "check": "channel_resonance_correlator",
            "passed": self.passed,
            "energy": self.energy,
            "side": self.side,
            "n": self.n,
            "max_diag_deviation": self.max_diag_deviation,
            "pooled_diag_deviation": self.pooled_diag_deviation,
            "pooled_offdiag_ratio": self.pooled_offdiag_ratio,
            "identity_defect": self.identity_defect,
            "flux_factor": CORRELATOR_FLUX_FACTOR,
        }


# ============================================================
# 2. Hamiltonien effectif et G_tr déterministe
# 2. 有效哈密顿量与确定性 G_tr
# ============================================================

def effective_hamiltonian(htr, z1, z2):
    """H_eff = H_tr - i sum_j sum_m z_{j,m}^T z_{j,m} (rows of z are the z_{j,m})."""
    htr = np.asarray(htr, dtype=float)
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    h_eff = htr - 1j * (z1.T @ z1 + z2.T @ z2)
    # symétrie exacte malgré l'arrondi des produits
    h_eff = 0.5 * (h_eff + h_eff.T)
    return EffectiveHamiltonian(h_eff=h_eff, z1=z1, z2=z2)


def gtr_deterministic(htr, z1, z2, energy):
    """(E - H_tr + i sum Z^T Z / lambda)^-1 = (E - H_eff)^-1."""
    h_eff = effective_hamiltonian(htr, z1, z2).h_eff
    d = -h_eff
    d[np.diag_indices_from(d)] += energy
    try:
        g = linalg.solve(d, np.eye(d.shape[0], dtype=complex), assume_a="sym")
    except linalg.LinAlgError as e:
        raise SingularAtEnergy(f"E - H_eff singular at E={energy!r}") from e
    if not np.all(np.isfinite(g)):
        raise SingularAtEnergy(f"E - H_eff singular at E={energy!r}")
    return g


# ============================================================
# 3. Diagonalisation complexe-symétrique / 复对称矩阵对角化
# ============================================================

def _bilinear_orthonormalize(vectors, groups):
    """Gram-Schmidt with the bilinear product u^T v inside clusters of close eigenvalues."""
    out = vectors.copy()
    for group in groups:
        for pos, col in enumerate(group):
            v = out[:, col]
            for prev in group[:pos]:
                u = out[:, prev]
                v = v - (u @ v) * u
            norm_sq = v @ v
            if abs(norm_sq) < DEFECTIVE_TOL:
                raise DefectiveMatrix(f"quasi-null eigenvector (|v^T v| = {abs(norm_sq):.3e})")
            out[:, col] = v / np.sqrt(norm_sq)
    return out


def _clusters(values, tol):
    groups, current = [], [0]
    for i in range(1, len(values)):
        if abs(values[i] - values[current[-1]]) <= tol:
            current.append(i)
        else:
            groups.append(current)
            current = [i]
    groups.append(current)
    return groups


def diagonalize_complex_symmetric(h_eff):
    """
    H_eff = O diag(E) O^T with O^T O = 1 (bilinear, not conjugate).

    Eigenvectors from a general eigensolver are rescaled to v^T v = 1; a
    real symmetric input goes through eigh and gives a real orthogonal frame.
    Accepts an EffectiveHamiltonian (amplitudes zeta are then filled in) or a
    bare complex symmetric array.
    """
    heff = h_eff if isinstance(h_eff, EffectiveHamiltonian) else None
    h = np.asarray(heff.h_eff if heff is not None else h_eff)
    k = h.shape[0]

    if not np.iscomplexobj(h) or not np.any(h.imag):
        values, frame = linalg.eigh(np.real(h))
        values = values.astype(complex)
        frame = frame.astype(complex)
    else:
        values, vectors = linalg.eig(h)
        order = np.lexsort((values.imag, values.real))
        values, vectors = values[order], vectors[:, order]
        scale = max(float(np.max(np.abs(h))), np.finfo(float).tiny)
        frame = _bilinear_orthonormalize(vectors, _clusters(values, 1e-10 * scale))

    order = np.lexsort((values.imag, values.real))
    values, frame = values[order], frame[:, order]

    ortho = float(np.max(np.abs(frame.T @ frame - np.eye(k)), initial=0.0))
    rebuilt = (frame * values) @ frame.T
    scale = max(float(np.max(np.abs(h), initial=0.0)), 1.0)
    recon = float(np.max(np.abs(rebuilt - h), initial=0.0)) / scale
    if ortho > ORTHOGONALITY_TOL or recon > ORTHOGONALITY_TOL:
        raise DefectiveMatrix(f"eigenframe check failed (O^T O defect {ortho:.2e}, reconstruction {recon:.2e})")

    condition = float(np.linalg.cond(frame)) if k else 1.0
    if condition > CONDITION_WARNING:
        warnings.warn(f"eigenframe condition number {condition:.3e}", IllConditioned, stacklevel=2)

    res = ResonanceSet(eigenvalues=values, eigenframe=frame, condition=condition)
    if heff is not None:
        res = replace(
            res,
            zeta1=resonance_amplitudes(heff.z1, frame),
            zeta2=resonance_amplitudes(heff.z2, frame),
        )
    return res


def resonance_amplitudes(z, frame):
    """zeta_{j,ml} = sum_m' (z_{j,m})_m' O_m'l."""
    return np.asarray(z) @ np.asarray(frame)


def build_resonances(htr, z1, z2):
    return diagonalize_complex_symmetric(effective_hamiltonian(htr, z1, z2))


def classify_overlap(res, isolated_ratio=PRESET_SPACING["isolated"], overlap_ratio=PRESET_SPACING["overlapping"]):
    """'isolated' when every spacing >= ratio * neighbouring widths, 'overlapping' when widths >= spacing."""
    if res.k < 2:
        return "isolated"
    eps = res.positions
    gam = res.widths
    spacing = np.diff(eps)
    local = np.maximum(gam[1:], gam[:-1])
    if np.all(spacing >= isolated_ratio * local):
        return "isolated"
    # recouvrement : largeur >= espacement (voir DESIGN.md pour l'inégalité)
    if np.all(local >= spacing):
        return "overlapping"
    return "intermediate"


# ============================================================
# 4. Facteur de transport Y / 输运因子 Y
# ============================================================

def transport_factor_direct(htr, z1, z2, energy):
    """Y = sum_mn |z_{1,m} G_tr z_{2,n}^T|^2 with the deterministic G_tr."""
    g = gtr_deterministic(htr, z1, z2, energy)
    amp = np.asarray(z1) @ g @ np.asarray(z2).T
    return float(np.sum(np.abs(amp) ** 2))


def _poles(res, energy):
    return 1.0 / (energy - res.eigenvalues)


def transport_factor_resonant(res, energy):
    """Breit-Wigner sum with interference: Y = sum_mn |sum_l zeta1_ml zeta2_nl / (E - E_l)|^2."""
    zeta1, zeta2 = res._amplitudes()
    amp = (zeta1 * _poles(res, energy)) @ zeta2.T
    return float(np.sum(np.abs(amp) ** 2))


def transport_factor_isolated(res, energy):
    """Sum of Lorentzians (no cross terms between resonances)."""
    zeta1, zeta2 = res._amplitudes()
    c = np.abs(_poles(res, energy)) ** 2
    return float(np.sum(np.sum(np.abs(zeta1) ** 2, axis=0) * np.sum(np.abs(zeta2) ** 2, axis=0) * c))


def interference_decomposition(res, energy):
    """Split the double sum over (l, l') into l = l' and l != l' parts."""
    zeta1, zeta2 = res._amplitudes()
    c = _poles(res, energy)
    m1 = zeta1.T @ zeta1.conj()
    m2 = zeta2.T @ zeta2.conj()
    terms = np.outer(c, c.conj()) * m1 * m2
    diagonal = float(np.real(np.trace(terms)))
    cross = float(np.real(terms.sum() - np.trace(terms)))
    return diagonal, cross


# ============================================================
# 5. Probabilité de transmission factorisée / 因子化透射概率
# ============================================================

def analytic_transmission(t1, t2, res, energy, channel_a=None, channel_b=None):
    """
    P_ab = (T_a / sum T_a') Y (T_b / sum T_b').
    A channel left to None spans every channel of its side: (None, None) gives the
    Lambda1 x Lambda2 matrix of one energy.
    """
    y = transport_factor_resonant(res, energy)
    rel_1 = t1.relative() if channel_a is None else t1.relative()[channel_a]
    rel_2 = t2.relative() if channel_b is None else t2.relative()[channel_b]
    p = np.multiply.outer(rel_1, rel_2) * y
    return float(p) if np.ndim(p) == 0 else p


def total_transmission(t1, res, energy, channel_a=None):
    """sum_b P_ab = (T_a / sum T_a') Y, for every a when channel_a is None."""
    rel = t1.relative() if channel_a is None else t1.relative()[channel_a]
    p = rel * transport_factor_resonant(res, energy)
    return float(p) if np.ndim(p) == 0 else p


# ============================================================
# 6. Diagnostic des corrélateurs X / X 关联量诊断
# ============================================================

def correlator_sample(model, energy, side=1):
    """
    One realization's X_{c, m'm''} = 2 pi (W G O)_{c m'} (W G O)*_{c m''}, its decoupled
    diagonal S_cc and the relative violation of sum_c X_{c, mm} = -2 Im (O^T G O)_mm.
    """
    if side == 1:
        h, gamma, w, frame = model.h1.matrix, model.gamma1(), model.w1.rows, model.v1.left_frame
    else:
        h, gamma, w, frame = model.h2.matrix, model.gamma2(), model.w2.rows, model.v2.left_frame
    d = side_propagator(h, gamma, energy)
    n_channels = w.shape[0]
    x = solve_symmetric(d, np.hstack([w.T, frame]).astype(complex), energy)
    gw, go = x[:, :n_channels], x[:, n_channels:]
    amp = gw.T @ frame                                   # W G O  (Lambda x k)
    sample = 2.0 * np.pi * amp[:, :, None] * amp[:, None, :].conj()
    diag = 1.0 - 2j * np.pi * np.einsum("cu,uc->c", w, gw)

    flux = np.real(np.einsum("cmm->m", sample))
    absorbed = -2.0 * np.diagonal(frame.T @ go).imag
    scale = max(float(np.max(np.abs(absorbed), initial=0.0)), np.finfo(float).tiny)
    defect = float(np.max(np.abs(flux - absorbed), initial=0.0)) / scale
    return sample, diag, defect


def summarize_correlator(samples, energy, side, lam):
    """CorrelatorReport from the (sample, diag, defect) triples of correlator_sample."""
    if len(samples) < 2:
        raise ValueError("at least two realizations required")
    x = np.asarray([s for s, _, _ in samples])
    n = x.shape[0]
    x_mean = x.mean(axis=0)
    x_error = np.sqrt(x.real.var(axis=0, ddof=1) + x.imag.var(axis=0, ddof=1)) / np.sqrt(n)
    t = transmission_from_average(np.mean([d for _, d, _ in samples], axis=0))
    prediction = CORRELATOR_FLUX_FACTOR * t.relative() / lam
    return CorrelatorReport(
        energy=float(energy), side=side, x_mean=x_mean, x_error=x_error, prediction=prediction, n=n,
        identity_defect=max(defect for _, _, defect in samples),
    )


def channel_resonance_correlator_check(models, energy, side=1):
    """
    Monte Carlo X_{c, m'm''} = 2 pi < (W G O)_{c m'} (W G O)*_{c m''} > with the
    decoupled G of one space and its left frame O; compared with
    delta_{m'm''} (f/lambda) T_c / sum T, T from the same realizations and
    f = CORRELATOR_FLUX_FACTOR.

    Each realization also obeys sum_c X_{c, mm} = -2 Im (O^T G O)_mm exactly;
    the worst relative violation is reported as identity_defect.
    Serial over models; ensemble.correlator_check spreads the realizations over workers.
    """
    models = list(models)
    if not models:
        raise ValueError("at least two realizations required")
    samples = [correlator_sample(model, energy, side) for model in models]
    return summarize_correlator(samples, energy, side, models[0].lam)
