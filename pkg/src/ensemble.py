"""
Ensemble - moyennes Monte Carlo sur les réalisations (H1, H2, repères O).
系综模块 - 对 (H1, H2, O 框架) 的蒙特卡罗平均

Vue d'ensemble / 功能概述 :
  - une graine fille par réalisation (SeedSequence(master_seed, spawn_key=(r,)))
  - S(E) sur la grille d'énergie, portes unitarité/symétrie avant accumulation
  - <S_ab>, <|S_ab|^2>, T_a, T_b (via S1, S2 découplées), barres d'erreur jackknife
  - confrontation avec P_ab analytique (H_eff déterministe)
  - checks : amplitude moyenne nulle, factorisation, <G1(0)> = -i/lambda, corrélateurs X

Flux / 执行顺序 :
  EnsembleConfig → _map_realizations (ThreadPoolExecutor, ordre fixe)
  → jackknife → TransmissionCurve → *_check
"""

import sys
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from config import (
    CONFRONTATION_REL_TOL,
    CONFRONTATION_SIGMAS,
    CORRELATOR_FLUX_FACTOR,
    ENERGY_GRID_LIMIT,
    FACTORIZATION_REL_TOL,
    GREEN_CENTER_TOL,
    MAX_SKIPPED_FRACTION,
    UNITARITY_TOL,
    VANISHING_RATIO_MAX,
)
from src.errors import EnsembleFailure, SingularPropagator, ValidationError
from src.model_core import (
    config_transition_vectors,
    fixed_left_frames,
    fixed_right_frames,
    sample_realization,
)
from src.scattering import (
    decoupled_backscatter,
    green_functions,
    s_matrix_direct,
    side_propagator,
    solve_symmetric,
    transmission_from_average,
)
from src.transition import (
    analytic_transmission,
    build_resonances,
    correlator_sample,
    interference_decomposition,
    summarize_correlator,
    total_transmission,
    transport_factor_isolated,
    transport_factor_resonant,
)


# ============================================================
# 1. Types
# ============================================================

@dataclass(frozen=True)
class EnsembleConfig:
    model: object
    n_realizations: int
    energy_grid: tuple
    resample_frames: bool = True
    master_seed: int = 0
    worker_hint: int = 1

    def energies(self):
        return np.asarray(self.energy_grid, dtype=float)

    def problems(self):
        found = list(self.model.problems())
        if self.n_realizations < 2:
            found.append(f"n_realizations must be >= 2 (got {self.n_realizations})")
        if self.worker_hint < 1:
            found.append(f"workers must be >= 1 (got {self.worker_hint})")
        grid = self.energies()
        if grid.size == 0:
            found.append("energy grid is empty")
        elif np.any(np.diff(grid) <= 0):
            found.append("energy grid must be strictly increasing")
        if grid.size and self.model.lam > 0 and np.max(np.abs(grid)) > ENERGY_GRID_LIMIT * self.model.lam:
            found.append(f"energy grid must stay within |E| <= {ENERGY_GRID_LIMIT} lambda")
        return found

    def validate(self):
        found = self.problems()
        if found:
            raise ValidationError(found)
        self.model.validate()
        return self

    def to_dict(self):
        return {
            "model": self.model.to_dict(),
            "n_realizations": self.n_realizations,
            "energy_grid": [float(e) for e in self.energy_grid],
            "resample_frames": self.resample_frames,
            "master_seed": self.master_seed,
            "worker_hint": self.worker_hint,
        }


@dataclass(frozen=True)
class EnsembleStats:
    mean: np.ndarray
    std_error: np.ndarray
    n: int


@dataclass(frozen=True)
class TransmissionCurve:
    energies: np.ndarray
    p_mc: EnsembleStats
    p_analytic: np.ndarray
    s_mean: EnsembleStats
    t1: tuple
    t2: tuple
    y: np.ndarray
    y_isolated: np.ndarray
    y_cross: np.ndarray
    p_total_mc: EnsembleStats
    p_total_analytic: np.ndarray
    resonances: object
    p_sum_mc: EnsembleStats = None
    n_skipped: int = 0
    n_dim: int = 0


@dataclass
class CheckReport:
    """Outcome of one Monte Carlo check; passed is None when not applicable."""
    name: str
    passed: object
    metrics: dict = field(default_factory=dict)
    detail: str = ""

    def __post_init__(self):
        if self.passed is not None:
            self.passed = bool(self.passed)

    def to_dict(self):
        return {"check": self.name, "passed": self.passed, "detail": self.detail, **self.metrics}


# ============================================================
# 2. Graines et statistiques / 随机种子与统计
# ============================================================

def realization_rng(master_seed, index):
    """Counter-based split: realization r can be replayed alone."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(index,)))


def jackknife(samples, statistic=None):
    """
    Leave-one-out jackknife over the first axis.
    statistic maps a stack of means (leading axis) to values; None = the mean itself.
    """
    samples = np.asarray(samples)
    n = samples.shape[0]
    if n < 2:
        raise ValueError("jackknife needs at least two samples")
    total = samples.sum(axis=0)
    loo = (total[None, ...] - samples) / (n - 1)
    mean = total / n
    if statistic is None:
        full, values = mean, loo
    else:
        full = statistic(mean[None, ...])[0]
        values = statistic(loo)
    spread = np.abs(values - values.mean(axis=0)) ** 2
    err = np.sqrt((n - 1) / n * spread.sum(axis=0))
    return EnsembleStats(mean=full, std_error=err, n=n)


def _map_realizations(fn, n, workers, label):
    """Apply fn to 0..n-1; results come back in index order whatever the worker count."""
    step = max(1, n // 10)

    def collect(iterator):
        results = []
        for i, res in enumerate(iterator, start=1):
            results.append(res)
            if i % step == 0 or i == n:
                print(f"   {label}: {i}/{n} realizations")
        return results

    if workers <= 1:
        return collect(map(fn, range(n)))
    # numpy/scipy libèrent le GIL dans les solves LAPACK
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return collect(executor.map(fn, range(n)))


def _frames(cfg):
    right = fixed_right_frames(cfg.model)
    left = None if cfg.resample_frames else fixed_left_frames(cfg.model)
    return right, left


def sample_models(cfg, count=None):
    """Generator of the run's realizations (same streams as run_ensemble)."""
    right, left = _frames(cfg)
    for r in range(cfg.n_realizations if count is None else count):
        yield sample_realization(cfg.model, realization_rng(cfg.master_seed, r), right, left)


# ============================================================
# 3. Balayage en énergie / 能量扫描
# ============================================================

def _realization_observables(cfg, right, left, energies, index):
    """S-matrix blocks of one realization on the grid, or None when it has to be skipped."""
    model = sample_realization(cfg.model, realization_rng(cfg.master_seed, index), right, left)
    n_e = energies.shape[0]
    l1, l2 = model.w1.n_channels, model.w2.n_channels
    out = {
        "s_ab": np.empty((n_e, l1, l2), dtype=complex),
        "s1": np.empty((n_e, l1), dtype=complex),
        "s2": np.empty((n_e, l2), dtype=complex),
    }
    try:
        for e, energy in enumerate(energies):
            s = s_matrix_direct(model, energy)
            if s.unitarity_defect() > UNITARITY_TOL or s.symmetry_defect() > UNITARITY_TOL:
                return None
            out["s_ab"][e] = s.ab
            out["s1"][e] = np.diagonal(decoupled_backscatter(model, energy, 1))
            out["s2"][e] = np.diagonal(decoupled_backscatter(model, energy, 2))
    except SingularPropagator:
        return None
    return out


def _check_skipped(n_skipped, n, label):
    if n_skipped > MAX_SKIPPED_FRACTION * n:
        raise EnsembleFailure(f"{label}: {n_skipped}/{n} realizations skipped")
    if n_skipped:
        print(f"   ⚠️  {label}: skipped {n_skipped}/{n} realizations")


def run_ensemble(cfg):
    """Monte Carlo <|S_ab|^2> on the grid next to the analytic P_ab of the same configuration."""
    cfg.validate()
    energies = cfg.energies()
    n = cfg.n_realizations
    right, left = _frames(cfg)
    print(f"📡 Ensemble: {n} realizations, N={cfg.model.n_dim}, k={cfg.model.k_trans}, "
          f"{energies.size} energies, workers={cfg.worker_hint}")

    results = _map_realizations(
        lambda r: _realization_observables(cfg, right, left, energies, r),
        n, cfg.worker_hint, "ensemble",
    )
    kept = [res for res in results if res is not None]
    _check_skipped(n - len(kept), n, "ensemble")

    s_ab = np.stack([res["s_ab"] for res in kept])
    s1 = np.stack([res["s1"] for res in kept])
    s2 = np.stack([res["s2"] for res in kept])

    p_mc = jackknife(np.abs(s_ab) ** 2)
    s_mean = jackknife(s_ab)
    p_total_mc = jackknife((np.abs(s_ab) ** 2).sum(axis=3))
    p_sum_mc = jackknife((np.abs(s_ab) ** 2).sum(axis=(2, 3)))
    s1_mean = s1.mean(axis=0)
    s2_mean = s2.mean(axis=0)
    t1 = tuple(transmission_from_average(s1_mean[e]) for e in range(energies.size))
    t2 = tuple(transmission_from_average(s2_mean[e]) for e in range(energies.size))

    z1, z2 = config_transition_vectors(cfg.model, right)
    res = build_resonances(cfg.model.htr_matrix(), z1, z2)
    y = np.array([transport_factor_resonant(res, e) for e in energies])
    y_iso = np.array([transport_factor_isolated(res, e) for e in energies])
    y_cross = np.array([interference_decomposition(res, e)[1] for e in energies])
    p_analytic = np.stack([analytic_transmission(t1[e], t2[e], res, energy) for e, energy in enumerate(energies)])
    p_total_analytic = np.stack([total_transmission(t1[e], res, energy) for e, energy in enumerate(energies)])

    print(f"✅ Ensemble done: {len(kept)} realizations accumulated")
    return TransmissionCurve(
        energies=energies,
        p_mc=p_mc,
        p_analytic=p_analytic,
        s_mean=s_mean,
        t1=t1,
        t2=t2,
        y=y,
        y_isolated=y_iso,
        y_cross=y_cross,
        p_total_mc=p_total_mc,
        p_total_analytic=p_total_analytic,
        resonances=res,
        p_sum_mc=p_sum_mc,
        n_skipped=n - len(kept),
        n_dim=cfg.model.n_dim,
    )


# ============================================================
# 4. Checks Monte Carlo / 蒙特卡罗检验
# ============================================================

def vanishing_amplitude_check(curve, min_n_dim=400):
    """
    rho = |<S_ab>|^2 / <|S_ab|^2>. The gate takes, per energy, the ratio of the sums over
    pairs (a single pair carries a sampling floor ~ 1/n_realizations); per-pair values are
    reported. Applies only for N >= min_n_dim.
    """
    p = curve.p_mc.mean
    if np.max(p) <= 1e-20:
        return CheckReport("vanishing_amplitude", None, {"n_dim": curve.n_dim},
                           "decoupled spaces: ratio not applicable")
    amp2 = np.abs(curve.s_mean.mean) ** 2
    rho = amp2 / np.where(p > 0, p, np.inf)
    pooled = amp2.sum(axis=(1, 2)) / p.sum(axis=(1, 2))
    max_pooled = float(np.max(pooled))
    passed = max_pooled < VANISHING_RATIO_MAX if curve.n_dim >= min_n_dim else None
    return CheckReport(
        "vanishing_amplitude", passed,
        {"max_pooled_ratio": max_pooled, "max_ratio": float(np.max(rho)), "mean_ratio": float(np.mean(rho)),
         "n_dim": curve.n_dim},
        "" if passed is not None else f"gate applies for N >= {min_n_dim}",
    )


def exceedance_budget(n_points, sigmas=CONFRONTATION_SIGMAS):
    """
    Largest number of points a correct prediction may leave outside a sigmas-wide band.

    The mean of a unimodal sample leaves [mu - k sigma, mu + k sigma] with probability at
    most 4 / (9 k^2) (Vysochanskij-Petunin, no Gaussian tail assumed); the count over
    n_points is bounded by the binomial mean plus sigmas binomial standard deviations.
    """
    if n_points <= 0:
        return 0
    rate = min(1.0, 4.0 / (9.0 * sigmas ** 2))
    return int(np.floor(n_points * rate + sigmas * np.sqrt(n_points * rate * (1.0 - rate))))


def _confront_shape(out, label, mc, analytic, flux):
    """
    Points of mc against analytic times the flux measured at their energy.

    The band is max(CONFRONTATION_REL_TOL, sigmas x rho(E)) of the prediction, rho(E) the
    rms relative jackknife error over the points of one energy: a single point's error
    estimate misses the heavy tail of |S_ab|^2 and comes out low on low draws.
    """
    axes = tuple(range(1, analytic.ndim))
    shape = (-1,) + (1,) * len(axes)
    tested = (flux > 0).reshape(shape) & np.ones(analytic.shape, dtype=bool)
    expected = analytic * flux.reshape(shape)
    mean, err = mc.mean, mc.std_error
    rel_err = err / np.where(mean > 0, mean, np.inf)
    rho = np.sqrt(np.mean(rel_err ** 2, axis=axes, keepdims=True))
    allowed = np.maximum(CONFRONTATION_REL_TOL, CONFRONTATION_SIGMAS * rho) * expected
    deviation = np.abs(mean - expected)
    n_points = int(tested.sum())
    out[f"{label}_points"] = n_points
    out[f"{label}_violations"] = int(np.sum((deviation > allowed) & tested))
    out[f"{label}_budget"] = exceedance_budget(n_points)
    out[f"{label}_rms_rel_error"] = float(np.max(rho)) if n_points else 0.0
    rel = deviation / np.where(expected > 0, expected, np.inf)
    out[f"{label}_max_rel_deviation"] = float(np.max(rel[tested])) if n_points else 0.0
    return out[f"{label}_violations"] <= out[f"{label}_budget"]


def analytic_confrontation(curve, flux_factor=CORRELATOR_FLUX_FACTOR):
    """
    p_mc against f^2 p_analytic, f = flux_factor (see config.CORRELATOR_FLUX_FACTOR).

    Two gates:
      - level : at every energy the sum over pairs, sum_ab p_mc, is within
        max(15 %, 3 std_error) of f^2 Y(E);
      - shape : each (E, pair) point and each (E, a) total is compared with p_analytic
        rescaled by the flux measured at E, sum_ab p_mc / Y(E). The finite-N shift of
        that flux is thus carried by the level gate alone. The number of points outside
        the band must stay within exceedance_budget.
    median_ratio is the raw p_mc / p_analytic; flux_ratio_min/max the measured flux per energy.
    """
    scale = flux_factor ** 2
    out = {"flux_factor": float(flux_factor)}

    y = curve.p_analytic.sum(axis=(1, 2))
    if not np.any(y > 0):
        return CheckReport("analytic_confrontation", None, out, "decoupled spaces: nothing to confront")
    pooled = curve.p_sum_mc
    expected = scale * y
    allowed = np.maximum(CONFRONTATION_REL_TOL * expected, CONFRONTATION_SIGMAS * pooled.std_error)
    out["pooled_violations"] = int(np.sum(np.abs(pooled.mean - expected) > allowed))
    safe_y = np.where(y > 0, y, np.inf)
    out["pooled_max_rel_deviation"] = float(np.max(np.abs(pooled.mean - expected) / (scale * safe_y)))

    flux = np.where(y > 0, pooled.mean / safe_y, 0.0)
    measured = flux[y > 0]
    out["flux_ratio_min"] = float(measured.min()) if measured.size else None
    out["flux_ratio_max"] = float(measured.max()) if measured.size else None

    pairs_ok = _confront_shape(out, "pairs", curve.p_mc, curve.p_analytic, flux)
    totals_ok = _confront_shape(out, "totals", curve.p_total_mc, curve.p_total_analytic, flux)

    ratio = curve.p_mc.mean / np.where(curve.p_analytic > 0, curve.p_analytic, np.nan)
    out["median_ratio"] = float(np.nanmedian(ratio)) if np.any(np.isfinite(ratio)) else None
    passed = out["pooled_violations"] == 0 and pairs_ok and totals_ok
    return CheckReport("analytic_confrontation", passed, out)


def _nearest_energy(cfg, target=0.0):
    grid = cfg.energies()
    return float(grid[np.argmin(np.abs(grid - target))])


def factorization_check(cfg, energy=None):
    """
    Decoupled S1 (V1 = V2 = 0): <|S1_aa'|^2> against T_a T_a' / sum T for a != a'.
    Gated on the per-row sums over a' != a; per-pair deviations are reported.
    """
    decoupled = replace(
        cfg,
        model=replace(cfg.model, sv_1=(0.0,) * cfg.model.k_trans, sv_2=(0.0,) * cfg.model.k_trans),
    )
    energy = _nearest_energy(cfg) if energy is None else float(energy)
    n = cfg.n_realizations
    print(f"📡 Factorization check: {n} realizations at E={energy:g}")

    def one(r):
        model = sample_realization(decoupled.model, realization_rng(cfg.master_seed, r), *_frames(decoupled))
        try:
            return decoupled_backscatter(model, energy, 1)
        except SingularPropagator:
            return None

    results = _map_realizations(one, n, cfg.worker_hint, "factorization")
    kept = [s for s in results if s is not None]
    _check_skipped(n - len(kept), n, "factorization")
    s1 = np.stack(kept)
    t = transmission_from_average(np.diagonal(s1.mean(axis=0)))
    p = (np.abs(s1) ** 2).mean(axis=0)
    predicted = np.outer(t.t_values, t.t_values) / t.sum_t
    off = ~np.eye(p.shape[0], dtype=bool)
    if not off.any():
        return CheckReport("factorization", None, {"sum_t": t.sum_t}, "single channel: no a != a' pair")
    deviation = np.abs(p[off] - predicted[off]) / predicted[off]
    # lignes normalisées par T_a' : constantes en a' si la factorisation tient
    rows = np.where(off, p / t.t_values[None, :], np.nan)
    spread = np.nanstd(rows, axis=1) / np.nanmean(rows, axis=1)
    # porte sur les sommes par ligne : un seul |S_aa'|^2 fluctue de ~100 % par réalisation
    p_rows = np.where(off, p, 0.0).sum(axis=1)
    predicted_rows = np.where(off, predicted, 0.0).sum(axis=1)
    row_dev = float(np.max(np.abs(p_rows - predicted_rows) / predicted_rows))
    return CheckReport(
        "factorization", row_dev < FACTORIZATION_REL_TOL,
        {"energy": energy, "sum_t": t.sum_t, "max_row_deviation": row_dev,
         "max_rel_deviation": float(np.max(deviation)), "median_rel_deviation": float(np.median(deviation)),
         "max_row_spread": float(np.max(spread)), "n": len(kept)},
    )


def green_center_check(cfg, energy=0.0):
    """Mean diagonal of G1(0) against -i/lambda; mean off-diagonal element against 0."""
    n = cfg.n_realizations
    lam = cfg.model.lam
    right, left = _frames(cfg)
    print(f"📡 Green function check: {n} realizations at E={energy:g}")

    def one(r):
        model = sample_realization(cfg.model, realization_rng(cfg.master_seed, r), right, left)
        d = side_propagator(model.h1.matrix, model.gamma1(), energy)
        try:
            g = solve_symmetric(d, np.eye(model.n_dim, dtype=complex), energy)
        except SingularPropagator:
            return None
        size = g.shape[0]
        diag = np.trace(g) / size
        off = (g.sum() - np.trace(g)) / max(size * (size - 1), 1)
        return np.array([diag, off])

    results = _map_realizations(one, n, cfg.worker_hint, "green")
    kept = [x for x in results if x is not None]
    _check_skipped(n - len(kept), n, "green")
    stats = jackknife(np.stack(kept))
    diag_mean, off_mean = stats.mean
    diag_dev = abs(diag_mean + 1j / lam) * lam
    off_sigma = abs(off_mean) / max(float(stats.std_error[1]), np.finfo(float).tiny)
    passed = diag_dev < GREEN_CENTER_TOL and off_sigma < 3.0
    return CheckReport(
        "green_center", passed,
        {"energy": float(energy), "diag_mean_real": float(diag_mean.real), "diag_mean_imag": float(diag_mean.imag),
         "diag_error": float(stats.std_error[0]), "scaled_deviation": float(diag_dev),
         "offdiag_abs_mean": float(abs(off_mean)), "offdiag_sigma": float(off_sigma), "n": len(kept)},
    )


def green_functions_at(cfg, index, energy):
    """G1, G2, G_tr of realization `index` (replay of a single draw)."""
    right, left = _frames(cfg)
    model = sample_realization(cfg.model, realization_rng(cfg.master_seed, index), right, left)
    return green_functions(model, energy)


def correlator_check(cfg, energy=None, side=1):
    """channel_resonance_correlator_check over the run's realizations, spread over cfg.worker_hint."""
    energy = _nearest_energy(cfg) if energy is None else float(energy)
    n = cfg.n_realizations
    right, left = _frames(cfg)
    print(f"📡 Correlator check: {n} realizations at E={energy:g}, side {side}")

    def one(r):
        model = sample_realization(cfg.model, realization_rng(cfg.master_seed, r), right, left)
        try:
            return correlator_sample(model, energy, side)
        except SingularPropagator:
            return None

    results = _map_realizations(one, n, cfg.worker_hint, "correlator")
    kept = [x for x in results if x is not None]
    _check_skipped(n - len(kept), n, "correlator")
    return summarize_correlator(kept, energy, side, cfg.model.lam)
