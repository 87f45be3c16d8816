"""
Model core - blocs du Hamiltonien H = [[H1, V1, 0], [V1^T, H_tr, V2^T], [0, V2, H2]].
模型核心 - GOE 样本、通道耦合、过渡态耦合（奇异值形式）与宽度矩阵

Vue d'ensemble / 功能概述 :
  - H1, H2 : deux matrices GOE indépendantes (variance lambda^2/N hors diagonale)
  - W_a, W_b : vecteurs de canaux orthogonaux de normes v_a^2, v_b^2
  - V1, V2 : couplages vers l'espace de transition, V = O diag(sv) O_tr^T
  - Gamma1, Gamma2 : matrices de largeur 2 pi W^T W

Flux / 执行顺序 :
  ModelConfig → fixed_right_frames → sample_realization
  (sample_goe, sample_channel_matrix, synthesize_coupling) → assemble_full_hamiltonian
"""

import sys
import os
import warnings
from dataclasses import dataclass, asdict

import numpy as np
from scipy import linalg

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from config import (
    CHANNEL_RETRIES,
    DECOMPOSITION_TOL,
    DEGENERACY_TOL,
    HTR_WARNING_RATIO,
    SV_WARNING_RATIO,
)
from src.errors import (
    CouplingStrengthWarning,
    DegenerateSingularValues,
    DimensionMismatch,
    NonDecomposable,
    RankDeficientChannels,
    ValidationError,
)


# ============================================================
# 1. Types
# ============================================================

@dataclass(frozen=True)
class ModelConfig:
    """All parameters of one model: N, k, lambda, channels, H_tr, couplings, seed."""
    n_dim: int
    k_trans: int
    lam: float
    channel_strengths_1: tuple
    channel_strengths_2: tuple
    htr_spec: tuple
    sv_1: tuple
    sv_2: tuple
    seed: int = 0

    @property
    def n_channels_1(self):
        return len(self.channel_strengths_1)

    @property
    def n_channels_2(self):
        return len(self.channel_strengths_2)

    def htr_matrix(self):
        """H_tr as a k x k array (eigenvalues on the diagonal if only a spectrum was given)."""
        spec = np.asarray(self.htr_spec, dtype=float)
        if spec.ndim == 1:
            return np.diag(spec)
        return spec

    def htr_eigenvalues(self):
        spec = np.asarray(self.htr_spec, dtype=float)
        if spec.ndim == 1:
            return np.sort(spec)
        return linalg.eigvalsh(spec)

    def problems(self):
        """Return the list of violated invariants (empty when valid)."""
        found = []
        if self.n_dim < 1:
            found.append(f"n_dim must be >= 1 (got {self.n_dim})")
        if self.k_trans < 1:
            found.append(f"k_trans must be >= 1 (got {self.k_trans})")
        elif self.n_dim >= 1 and self.k_trans > self.n_dim:
            found.append(f"k_trans ({self.k_trans}) must not exceed n_dim ({self.n_dim})")
        if not self.lam > 0:
            found.append(f"lambda must be > 0 (got {self.lam})")
        for side, strengths in ((1, self.channel_strengths_1), (2, self.channel_strengths_2)):
            if len(strengths) < 1:
                found.append(f"channel_strengths_{side}: at least one channel required")
            elif self.n_dim >= 1 and len(strengths) > self.n_dim:
                found.append(f"channel_strengths_{side}: {len(strengths)} channels exceed n_dim ({self.n_dim})")
            if any(not s > 0 for s in strengths):
                found.append(f"channel_strengths_{side}: all v^2 must be > 0")
        for name, sv in (("sv_1", self.sv_1), ("sv_2", self.sv_2)):
            if len(sv) != self.k_trans:
                found.append(f"{name}: expected {self.k_trans} values (got {len(sv)})")
            if any(s < 0 for s in sv):
                found.append(f"{name}: singular values must be >= 0")
        spec = np.asarray(self.htr_spec, dtype=float)
        if spec.ndim == 1 and spec.shape[0] != self.k_trans:
            found.append(f"htr_spec: expected {self.k_trans} eigenvalues (got {spec.shape[0]})")
        elif spec.ndim == 2:
            if spec.shape != (self.k_trans, self.k_trans):
                found.append(f"htr_spec: expected a {self.k_trans}x{self.k_trans} matrix (got {spec.shape})")
            elif not np.array_equal(spec, spec.T):
                found.append("htr_spec: matrix must be symmetric")
        elif spec.ndim not in (1, 2):
            found.append("htr_spec: eigenvalue list or square matrix expected")
        return found

    def validate(self):
        """Raise ValidationError listing every problem; warn on soft thresholds."""
        found = self.problems()
        if found:
            raise ValidationError(found)
        sv_max = max(max(self.sv_1, default=0.0), max(self.sv_2, default=0.0))
        if sv_max / self.lam > SV_WARNING_RATIO:
            warnings.warn(
                f"coupling not small versus lambda: max(sv)/lambda = {sv_max / self.lam:.3g}",
                CouplingStrengthWarning,
                stacklevel=2,
            )
        far = np.abs(self.htr_eigenvalues()) > HTR_WARNING_RATIO * self.lam
        if far.any():
            warnings.warn(
                f"{int(far.sum())} H_tr eigenvalue(s) farther than {HTR_WARNING_RATIO} lambda from band center",
                CouplingStrengthWarning,
                stacklevel=2,
            )
        return self

    def to_dict(self):
        out = asdict(self)
        out["lambda"] = out.pop("lam")
        return out


@dataclass(frozen=True)
class GoeSample:
    matrix: np.ndarray
    lam: float

    @property
    def n_dim(self):
        return self.matrix.shape[0]


@dataclass(frozen=True)
class ChannelMatrix:
    """Rows W_a (Lambda x N) with W W^T = diag(v^2)."""
    rows: np.ndarray
    strengths: np.ndarray

    @property
    def n_channels(self):
        return self.rows.shape[0]

    @property
    def n_dim(self):
        return self.rows.shape[1]

    def gram_defect(self):
        if self.n_channels == 0:
            return 0.0
        return float(np.max(np.abs(self.rows @ self.rows.T - np.diag(self.strengths))))


@dataclass(frozen=True)
class CouplingBlock:
    """V = left_frame . diag(singular_values) . right_frame^T."""
    v_matrix: np.ndarray
    left_frame: np.ndarray
    singular_values: np.ndarray
    right_frame: np.ndarray

    @property
    def n_dim(self):
        return self.v_matrix.shape[0]

    @property
    def k(self):
        return self.v_matrix.shape[1]

    def reconstruction_residual(self):
        rebuilt = (self.left_frame * self.singular_values) @ self.right_frame.T
        scale = max(float(np.max(np.abs(self.v_matrix), initial=0.0)), np.finfo(float).tiny)
        return float(np.max(np.abs(rebuilt - self.v_matrix), initial=0.0)) / scale


@dataclass(frozen=True)
class WidthMatrix:
    gamma: np.ndarray

    @property
    def trace(self):
        return float(np.trace(self.gamma))

    def min_eigenvalue(self):
        if self.gamma.size == 0:
            return 0.0
        return float(linalg.eigvalsh(self.gamma)[0])

    def is_psd(self, rel_tol=1e-10):
        scale = max(float(np.linalg.norm(self.gamma, 2)) if self.gamma.size else 0.0, abs(self.trace))
        return self.min_eigenvalue() >= -rel_tol * scale


@dataclass(frozen=True)
class RealizationModel:
    """One draw (H1, H2, H_tr, V1, V2, W_a, W_b) of the block Hamiltonian."""
    h1: GoeSample
    h2: GoeSample
    htr: np.ndarray
    v1: CouplingBlock
    v2: CouplingBlock
    w1: ChannelMatrix
    w2: ChannelMatrix

    @property
    def n_dim(self):
        return self.h1.n_dim

    @property
    def k(self):
        return self.htr.shape[0]

    @property
    def lam(self):
        return self.h1.lam

    def check_dimensions(self):
        n, k = self.n_dim, self.k
        expected = {
            "h2": (self.h2.matrix.shape, (n, n)),
            "htr": (self.htr.shape, (k, k)),
            "v1": (self.v1.v_matrix.shape, (n, k)),
            "v2": (self.v2.v_matrix.shape, (n, k)),
            "w1": (self.w1.rows.shape[1:], (n,)),
            "w2": (self.w2.rows.shape[1:], (n,)),
        }
        bad = [f"{name}: {got} != {want}" for name, (got, want) in expected.items() if got != want]
        if bad:
            raise DimensionMismatch("; ".join(bad))
        return self

    def gamma1(self):
        return width_matrix(self.w1).gamma

    def gamma2(self):
        return width_matrix(self.w2).gamma


# ============================================================
# 2. Tirages aléatoires / 随机抽样
# ============================================================

def sample_goe(n_dim, lam, rng):
    """
    GOE sample with <H_uu'^2> = lambda^2/N off the diagonal and 2 lambda^2/N on it.
    (A + A^T) is exactly symmetric in floating point.
    """
    a = rng.standard_normal((n_dim, n_dim))
    h = (a + a.T) * (lam / np.sqrt(2.0 * n_dim))
    return GoeSample(matrix=h, lam=float(lam))


def random_orthonormal_frame(n_dim, k, rng):
    """N x k matrix with Haar-distributed orthonormal columns (QR with sign fix)."""
    if k == 0:
        return np.zeros((n_dim, 0))
    q, r = linalg.qr(rng.standard_normal((n_dim, k)), mode="economic")
    d = np.diagonal(r)
    # QR non unique : diagonale de R positive
    q *= np.where(d < 0, -1.0, 1.0)
    return q


def sample_channel_matrix(n_dim, strengths, rng):
    """
    Orthonormalize Lambda Gaussian vectors, then scale row a by sqrt(v_a^2).
    Rank deficiency has probability zero; redraw and give up after CHANNEL_RETRIES.
    """
    strengths = np.asarray(strengths, dtype=float)
    n_channels = strengths.shape[0]
    if n_channels > n_dim:
        raise DimensionMismatch(f"{n_channels} channels cannot be orthogonal in dimension {n_dim}")
    if n_channels == 0:
        return ChannelMatrix(rows=np.zeros((0, n_dim)), strengths=strengths)

    for _ in range(CHANNEL_RETRIES):
        q, r = linalg.qr(rng.standard_normal((n_dim, n_channels)), mode="economic")
        d = np.abs(np.diagonal(r))
        if d.min() > 1e-10 * d.max():
            rows = np.sqrt(strengths)[:, None] * q.T
            return ChannelMatrix(rows=rows, strengths=strengths)
    raise RankDeficientChannels(f"orthonormalization failed {CHANNEL_RETRIES} times (N={n_dim}, channels={n_channels})")


def synthesize_coupling(n_dim, singular_values, rng, right_frame=None, left_frame=None):
    """
    V = O diag(sv) O_tr^T with a random left frame (N x k, orthonormal columns)
    and a random k x k orthogonal right frame. Either frame can be supplied.
    """
    sv = np.asarray(singular_values, dtype=float)
    k = sv.shape[0]
    if k > n_dim:
        raise DimensionMismatch(f"k={k} exceeds n_dim={n_dim}")
    if np.any(sv < 0):
        raise ValidationError(["singular values must be >= 0"])

    if left_frame is None:
        left_frame = random_orthonormal_frame(n_dim, k, rng)
    if right_frame is None:
        right_frame = random_orthonormal_frame(k, k, rng)
    left_frame = np.asarray(left_frame, dtype=float)
    right_frame = np.asarray(right_frame, dtype=float)
    if left_frame.shape != (n_dim, k) or right_frame.shape != (k, k):
        raise DimensionMismatch(f"frames {left_frame.shape}, {right_frame.shape} for N={n_dim}, k={k}")

    v = (left_frame * sv) @ right_frame.T
    return CouplingBlock(v_matrix=v, left_frame=left_frame, singular_values=sv, right_frame=right_frame)


# ============================================================
# 3. Décomposition V = O diag(sv) O_tr^T (construction de l'annexe)
# 3. 通过 V^T V 与 V V^T 的对角化分解耦合矩阵
# ============================================================

def decompose_coupling(v_matrix):
    """
    Factor V (N x k) by diagonalizing V^T V and V V^T.

    The nonzero eigenvalues of V V^T must equal those of V^T V; the left
    frame columns are V r_m / |V r_m|, completed by null vectors of V V^T
    where a singular value vanishes. Singular values are returned
    nonnegative, in descending order.
    """
    v = np.asarray(v_matrix, dtype=float)
    if v.ndim != 2:
        raise DimensionMismatch(f"coupling matrix must be 2-D (got shape {v.shape})")
    n_dim, k = v.shape
    if n_dim < k:
        raise DimensionMismatch(f"need N >= k (got N={n_dim}, k={k})")
    if k == 0:
        return CouplingBlock(v, np.zeros((n_dim, 0)), np.zeros(0), np.zeros((0, 0)))

    _, r = linalg.eigh(v.T @ v)
    r = r[:, ::-1]
    images = v @ r
    sv = np.linalg.norm(images, axis=0)
    order = np.argsort(-sv, kind="stable")
    sv, r, images = sv[order], r[:, order], images[:, order]

    w_big, u = linalg.eigh(v @ v.T)
    w_big, u = w_big[::-1], u[:, ::-1]

    v_norm = float(np.max(np.abs(v)))
    scale = max(float(sv[0]) ** 2, np.finfo(float).tiny)
    mismatch = float(np.max(np.abs(w_big[:k] - sv ** 2))) / scale
    if mismatch > DECOMPOSITION_TOL:
        raise NonDecomposable(f"eigenvalues of V V^T and V^T V differ by {mismatch:.3e} (relative)")

    zero = sv <= 1e-12 * max(v_norm, np.finfo(float).tiny) * np.sqrt(n_dim)
    sv = np.where(zero, 0.0, sv)
    left = np.zeros((n_dim, k))
    nz = ~zero
    left[:, nz] = images[:, nz] / sv[nz]
    n_zero = int(zero.sum())
    if n_zero:
        n_nz = k - n_zero
        # vecteurs nuls de V V^T, orthogonalisés contre les colonnes déjà construites
        candidates = u[:, n_nz:n_nz + n_zero]
        q, _ = linalg.qr(np.hstack([left[:, nz], candidates]), mode="economic")
        left[:, zero] = q[:, n_nz:]

    squares = sv ** 2
    gaps = np.abs(np.diff(squares)) <= DEGENERACY_TOL * scale
    if gaps.any():
        warnings.warn(
            f"{int(gaps.sum())} degenerate singular value pair(s); right frame not unique",
            DegenerateSingularValues,
            stacklevel=2,
        )

    block = CouplingBlock(v_matrix=v, left_frame=left, singular_values=sv, right_frame=r)
    residual = block.reconstruction_residual()
    if residual > DECOMPOSITION_TOL:
        raise NonDecomposable(f"reconstruction residual {residual:.3e} exceeds {DECOMPOSITION_TOL:g}")
    return block


def _z_rows(singular_values, right_frame, lam):
    sv = np.asarray(singular_values, dtype=float)
    return (sv[:, None] * np.asarray(right_frame, dtype=float).T) / np.sqrt(lam)


def transition_vectors(block, lam):
    """Rows z_{j,m} = sv_m (O_tr)_{., m} / sqrt(lambda); z^T z = V^T V / lambda."""
    return _z_rows(block.singular_values, block.right_frame, lam)


# ============================================================
# 4. Matrices de largeur et Hamiltonien complet
# 4. 宽度矩阵与完整哈密顿量
# ============================================================

def width_matrix(w):
    """Gamma = 2 pi W^T W (N x N); trace = 2 pi sum v^2."""
    return WidthMatrix(gamma=2.0 * np.pi * (w.rows.T @ w.rows))


def total_width_matrix(model):
    """Block-diagonal Gamma = diag(Gamma1, 0_k, Gamma2) on the 2N+k space."""
    n, k = model.n_dim, model.k
    gamma = np.zeros((2 * n + k, 2 * n + k))
    gamma[:n, :n] = model.gamma1()
    gamma[n + k:, n + k:] = model.gamma2()
    return WidthMatrix(gamma=gamma)


def assemble_full_hamiltonian(model):
    """Real symmetric (2N+k) matrix; space 1 = [0, N), transition = [N, N+k), space 2 = [N+k, 2N+k)."""
    model.check_dimensions()
    n, k = model.n_dim, model.k
    h = np.zeros((2 * n + k, 2 * n + k))
    h[:n, :n] = model.h1.matrix
    h[:n, n:n + k] = model.v1.v_matrix
    h[n:n + k, :n] = model.v1.v_matrix.T
    h[n:n + k, n:n + k] = model.htr
    h[n:n + k, n + k:] = model.v2.v_matrix.T
    h[n + k:, n:n + k] = model.v2.v_matrix
    h[n + k:, n + k:] = model.h2.matrix
    return h


# ============================================================
# 5. Réalisations / 单次实现
# ============================================================

def fixed_right_frames(cfg):
    """Right frames O_tr,1 and O_tr,2 drawn once from cfg.seed (they define H_eff)."""
    rng = np.random.default_rng(cfg.seed)
    k = cfg.k_trans
    return random_orthonormal_frame(k, k, rng), random_orthonormal_frame(k, k, rng)


def sample_realization(cfg, rng, right_frames=None, left_frames=None):
    """Draw H1, H2, W_a, W_b and the left frames; H_tr and right frames come from cfg."""
    n, lam = cfg.n_dim, cfg.lam
    if right_frames is None:
        right_frames = fixed_right_frames(cfg)
    lf1, lf2 = left_frames if left_frames is not None else (None, None)

    h1 = sample_goe(n, lam, rng)
    h2 = sample_goe(n, lam, rng)
    w1 = sample_channel_matrix(n, cfg.channel_strengths_1, rng)
    w2 = sample_channel_matrix(n, cfg.channel_strengths_2, rng)
    v1 = synthesize_coupling(n, cfg.sv_1, rng, right_frame=right_frames[0], left_frame=lf1)
    v2 = synthesize_coupling(n, cfg.sv_2, rng, right_frame=right_frames[1], left_frame=lf2)
    return RealizationModel(h1=h1, h2=h2, htr=cfg.htr_matrix(), v1=v1, v2=v2, w1=w1, w2=w2)


def fixed_left_frames(cfg):
    """Left frames O_1, O_2 shared by every realization when frames are not resampled."""
    rng = np.random.default_rng([cfg.seed, 1])
    return (
        random_orthonormal_frame(cfg.n_dim, cfg.k_trans, rng),
        random_orthonormal_frame(cfg.n_dim, cfg.k_trans, rng),
    )


def config_transition_vectors(cfg, right_frames=None):
    """(z1, z2) of the configuration: fixed by sv_j, the right frames and lambda."""
    if right_frames is None:
        right_frames = fixed_right_frames(cfg)
    return (
        _z_rows(cfg.sv_1, right_frames[0], cfg.lam),
        _z_rows(cfg.sv_2, right_frames[1], cfg.lam),
    )
