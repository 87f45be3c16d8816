from dataclasses import replace

import numpy as np
import pytest

from conftest import small_ensemble_config, small_model_config
from config import GREEN_CENTER_TOL, VANISHING_RATIO_MAX
from src.ensemble import (
    CheckReport,
    EnsembleStats,
    analytic_confrontation,
    exceedance_budget,
    factorization_check,
    green_center_check,
    green_functions_at,
    jackknife,
    realization_rng,
    run_ensemble,
    sample_models,
    vanishing_amplitude_check,
)
from src.errors import ValidationError
from src.run_config import preset_htr_eigenvalues, preset_singular_values
from src.scattering import decoupled_backscatter, transmission_analytic_oracle
from src.transition import analytic_transmission, total_transmission


@pytest.fixture(scope="module")
def curve():
    return run_ensemble(small_ensemble_config())


# --- graines et statistiques ---

def test_realization_rng_replayable():
    a = realization_rng(42, 7).standard_normal(5)
    b = realization_rng(42, 7).standard_normal(5)
    c = realization_rng(42, 8).standard_normal(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_jackknife_of_mean_is_standard_error(rng):
    samples = rng.standard_normal((50, 3))
    stats = jackknife(samples)
    assert np.allclose(stats.mean, samples.mean(axis=0))
    assert np.allclose(stats.std_error, samples.std(axis=0, ddof=1) / np.sqrt(50))
    assert stats.n == 50


def test_jackknife_with_statistic(rng):
    samples = rng.standard_normal((40, 1)) + 2.0
    stats = jackknife(samples, statistic=lambda m: m ** 2)
    assert stats.mean == pytest.approx(samples.mean() ** 2)
    assert np.all(stats.std_error > 0)


def test_jackknife_needs_two_samples():
    with pytest.raises(ValueError):
        jackknife(np.ones((1, 2)))


# --- EnsembleConfig ---

def test_config_problems_collected():
    cfg = small_ensemble_config(n_realizations=1, energies=(0.1, 0.0), workers=0)
    problems = " ".join(cfg.problems())
    assert "n_realizations" in problems
    assert "increasing" in problems
    assert "workers" in problems


def test_energy_grid_limit():
    cfg = small_ensemble_config(energies=(-0.6, 0.0))
    with pytest.raises(ValidationError):
        cfg.validate()


def test_sample_models_follow_realization_streams():
    cfg = small_ensemble_config(n_realizations=3)
    models = list(sample_models(cfg))
    assert len(models) == 3
    again = next(sample_models(cfg, count=1))
    assert np.array_equal(models[0].h1.matrix, again.h1.matrix)
    assert not np.array_equal(models[0].h1.matrix, models[1].h1.matrix)


def test_fixed_left_frames_when_not_resampled():
    cfg = small_ensemble_config(n_realizations=2, resample=False)
    a, b = sample_models(cfg)
    assert np.array_equal(a.v1.left_frame, b.v1.left_frame)
    assert not np.array_equal(a.h1.matrix, b.h1.matrix)


# --- balayage ---

def test_curve_shapes(curve):
    assert curve.p_mc.mean.shape == (3, 4, 5)
    assert curve.p_analytic.shape == (3, 4, 5)
    assert curve.s_mean.mean.shape == (3, 4, 5)
    assert curve.p_total_mc.mean.shape == (3, 4)
    assert curve.p_sum_mc.mean.shape == (3,)
    assert len(curve.t1) == 3 and len(curve.t2) == 3
    assert curve.n_skipped == 0
    assert curve.p_mc.n == 8


def test_curve_consistency(curve):
    assert np.allclose(curve.p_total_mc.mean, curve.p_mc.mean.sum(axis=2))
    assert np.allclose(curve.p_sum_mc.mean, curve.p_mc.mean.sum(axis=(1, 2)))
    assert np.allclose(curve.p_total_analytic, curve.p_analytic.sum(axis=2))
    assert np.allclose(curve.p_analytic.sum(axis=(1, 2)), curve.y)
    assert np.allclose(curve.y_isolated + curve.y_cross, curve.y, rtol=1e-10)
    assert np.all(curve.p_mc.mean >= 0)
    assert np.all(curve.p_mc.mean <= 1)


def test_curve_analytic_from_transmission_formula(curve):
    for e, energy in enumerate(curve.energies):
        expected = analytic_transmission(curve.t1[e], curve.t2[e], curve.resonances, energy)
        assert np.array_equal(curve.p_analytic[e], expected)
        assert np.array_equal(curve.p_total_analytic[e], total_transmission(curve.t1[e], curve.resonances, energy))


def test_results_independent_of_worker_count(curve):
    threaded = run_ensemble(small_ensemble_config(workers=3))
    assert np.array_equal(curve.p_mc.mean, threaded.p_mc.mean)
    assert np.array_equal(curve.p_mc.std_error, threaded.p_mc.std_error)
    assert np.array_equal(curve.s_mean.mean, threaded.s_mean.mean)


def test_std_error_shrinks_with_more_realizations():
    small = run_ensemble(small_ensemble_config(n_realizations=100))
    large = run_ensemble(small_ensemble_config(n_realizations=200))
    ratio = large.s_mean.std_error / small.s_mean.std_error
    assert np.median(ratio) == pytest.approx(1.0 / np.sqrt(2.0), rel=0.2)


def test_decoupled_offdiagonal_mean_vanishes():
    x = np.array([0.3, 0.3, 1.0, 1.0])
    model = replace(small_model_config(), channel_strengths_1=tuple(x / np.pi))
    cfg = small_ensemble_config(model=model, n_realizations=200)
    stats = jackknife(np.stack([decoupled_backscatter(m, 0.0, 1) for m in sample_models(cfg)]))
    off = ~np.eye(4, dtype=bool)
    assert np.all(np.abs(stats.mean[off]) < 4.0 * stats.std_error[off])
    # le diagonal ne s'annule pas pour x = 0.3 : <S_aa> ~ (1 - x) / (1 + x)
    assert np.all(np.abs(np.diagonal(stats.mean)[:2]) > 4.0 * np.diagonal(stats.std_error)[:2])


def test_decoupled_spaces_give_no_transmission():
    model = small_model_config(sv=(0.0, 0.0, 0.0))
    decoupled = run_ensemble(small_ensemble_config(model=model, n_realizations=4))
    assert np.max(decoupled.p_mc.mean) < 1e-20
    assert not np.any(decoupled.p_analytic)
    report = vanishing_amplitude_check(decoupled)
    assert report.passed is None
    assert analytic_confrontation(decoupled).passed is None


# --- rapports ---

def test_check_report_coerces_numpy_bool():
    report = CheckReport("x", np.bool_(True), {"a": 1.0})
    assert report.passed is True
    assert report.to_dict() == {"check": "x", "passed": True, "detail": "", "a": 1.0}


def test_vanishing_not_gated_for_small_n(curve):
    report = vanishing_amplitude_check(curve)
    assert report.passed is None
    assert "max_pooled_ratio" in report.metrics


def test_confrontation_report_fields(curve):
    report = analytic_confrontation(curve)
    d = report.to_dict()
    for key in ("pairs_violations", "pairs_budget", "totals_violations", "totals_budget",
                "pooled_violations", "flux_ratio_min", "median_ratio", "flux_factor"):
        assert key in d
    assert isinstance(d["passed"], bool)


def test_confrontation_detects_scaled_prediction():
    e = np.array([0.0])
    p = np.full((1, 2, 2), 0.04)
    stats = EnsembleStats(mean=p, std_error=np.full_like(p, 1e-4), n=100)
    totals = EnsembleStats(mean=p.sum(axis=2), std_error=np.full((1, 2), 1e-4), n=100)
    pooled = EnsembleStats(mean=p.sum(axis=(1, 2)), std_error=np.array([1e-4]), n=100)

    class Curve:
        p_mc, p_total_mc, p_sum_mc = stats, totals, pooled
        p_analytic = np.full((1, 2, 2), 0.01)
        p_total_analytic = np.full((1, 2), 0.02)
        energies = e

    assert analytic_confrontation(Curve).passed
    assert analytic_confrontation(Curve).metrics["median_ratio"] == pytest.approx(4.0)
    assert not analytic_confrontation(Curve, flux_factor=1.0).passed


def _stub_curve(p_mc, rel_err, p_analytic):
    """Curve-like object built from per-pair means with a relative jackknife error."""

    def stats(mean, n=200):
        return EnsembleStats(mean=mean, std_error=rel_err * mean, n=n)

    class Curve:
        pass

    curve = Curve()
    curve.p_mc = stats(p_mc)
    curve.p_total_mc = stats(p_mc.sum(axis=2))
    pooled = p_mc.sum(axis=(1, 2))
    curve.p_sum_mc = EnsembleStats(mean=pooled, std_error=rel_err * pooled / np.sqrt(p_mc[0].size), n=200)
    curve.p_analytic = p_analytic
    curve.p_total_analytic = p_analytic.sum(axis=2)
    return curve


def test_exceedance_budget():
    assert exceedance_budget(0) == 0
    # 4/81 par point, plus trois écarts-types binomiaux
    assert 0.049 * 5625 < exceedance_budget(5625) < 0.06 * 5625
    assert exceedance_budget(100, sigmas=4.0) < exceedance_budget(100)
    assert exceedance_budget(10, sigmas=0.5) == 10


def test_confrontation_tolerates_finite_size_shift():
    analytic = np.full((5, 10, 10), 0.01)
    p_mc = 0.9 * 4.0 * analytic
    p_mc[0, 0, 0] *= 1.6
    p_mc[2, 3, 7] *= 0.3
    p_mc[4, 9, 1] *= 1.7
    report = analytic_confrontation(_stub_curve(p_mc, 0.12, analytic))
    assert report.passed, report.to_dict()
    assert report.metrics["pairs_violations"] == 3
    assert report.metrics["pairs_budget"] > 3
    assert report.metrics["flux_ratio_min"] == pytest.approx(3.6, rel=0.02)
    assert report.metrics["median_ratio"] == pytest.approx(3.6)


def test_confrontation_detects_wrong_channel_shape():
    analytic = np.full((3, 4, 4), 0.01)
    p_mc = np.full((3, 4, 4), 0.04)
    p_mc[:, :2] *= 1.5
    p_mc[:, 2:] *= 0.5
    report = analytic_confrontation(_stub_curve(p_mc, 0.01, analytic))
    assert report.metrics["pooled_violations"] == 0
    assert report.metrics["pairs_violations"] == 48
    assert report.metrics["totals_violations"] == 12
    assert not report.passed


def test_confrontation_detects_level_shift():
    analytic = np.full((3, 4, 4), 0.01)
    p_mc = 0.7 * 4.0 * analytic
    report = analytic_confrontation(_stub_curve(p_mc, 0.01, analytic))
    assert report.metrics["pairs_violations"] == 0
    assert report.metrics["pooled_violations"] == 3
    assert not report.passed


def test_green_functions_at_replays_one_realization():
    cfg = small_ensemble_config(n_realizations=3)
    g = green_functions_at(cfg, 1, 0.02)
    assert g.g1.shape == (40, 40)
    assert np.allclose(g.g1, green_functions_at(cfg, 1, 0.02).g1)


def test_factorization_report_small():
    cfg = small_ensemble_config(n_realizations=6)
    report = factorization_check(cfg, energy=0.0)
    assert report.metrics["n"] == 6
    assert report.metrics["sum_t"] > 0
    assert isinstance(report.passed, bool)


def test_factorization_single_channel_not_applicable():
    cfg = small_ensemble_config(model=small_model_config(n_channels=(1, 2)), n_realizations=4)
    assert factorization_check(cfg).passed is None


# --- checks Monte Carlo à l'échelle N = 400 ---

def _preset_ensemble(name, n_realizations, energies, n_dim=400, lam=1.0):
    sv = preset_singular_values(lam, 3)
    model = small_model_config(
        n_dim=n_dim, n_channels=(25, 25), sv=sv, htr=preset_htr_eigenvalues(name, lam, 3, sv, sv), lam=lam, seed=42,
    )
    return small_ensemble_config(model=model, n_realizations=n_realizations, energies=energies, workers=4, seed=42)


@pytest.mark.slow
def test_green_center_at_band_center():
    cfg = _preset_ensemble("isolated", 50, (0.0,))
    report = green_center_check(cfg)
    assert report.passed, report.to_dict()


@pytest.mark.slow
def test_factorization_many_channels():
    cfg = _preset_ensemble("isolated", 500, (0.0,))
    report = factorization_check(cfg)
    assert report.metrics["sum_t"] == pytest.approx(25.0, rel=0.05)
    assert report.passed, report.to_dict()


@pytest.mark.slow
@pytest.mark.parametrize("name", ("isolated", "overlapping"))
def test_confrontation_presets(name):
    energies = tuple(np.linspace(-0.2, 0.2, 9)) if name == "isolated" else tuple(np.linspace(-0.02, 0.02, 9))
    cfg = _preset_ensemble(name, 200, energies)
    result = run_ensemble(cfg)
    report = analytic_confrontation(result)
    assert report.passed, report.to_dict()
    assert vanishing_amplitude_check(result).passed


@pytest.mark.slow
def test_factorization_unequal_couplings():
    x = np.where(np.arange(25) % 2 == 0, 0.3, 1.0)
    model = replace(_preset_ensemble("isolated", 500, (0.0,)).model, channel_strengths_1=tuple(x / np.pi))
    cfg = small_ensemble_config(model=model, n_realizations=500, energies=(0.0,), workers=4, seed=42)
    report = factorization_check(cfg)
    assert report.metrics["sum_t"] == pytest.approx(transmission_analytic_oracle(x / np.pi, 1.0).sum(), rel=0.05)
    assert report.metrics["median_rel_deviation"] < 0.10
    assert report.passed, report.to_dict()


@pytest.mark.slow
def test_green_center_scales_with_inverse_lambda():
    reports = {lam: green_center_check(_preset_ensemble("isolated", 50, (0.0,), lam=lam)) for lam in (1.0, 2.0)}
    assert all(r.passed for r in reports.values())
    g_1, g_2 = (reports[lam].metrics["diag_mean_imag"] for lam in (1.0, 2.0))
    # mêmes tirages : H et Gamma sont proportionnels à lambda
    assert g_2 * 2.0 == pytest.approx(g_1, rel=1e-8)
    assert g_1 == pytest.approx(-1.0, rel=GREEN_CENTER_TOL)


@pytest.mark.slow
def test_mean_amplitude_at_sampling_floor_for_each_size():
    # canaux retirés à chaque réalisation : <S_ab> reste sous le plancher 1/n à tout N
    n_realizations = 100
    ratios = {}
    for n_dim in (100, 400):
        curve = run_ensemble(_preset_ensemble("isolated", n_realizations, (-0.1, 0.0), n_dim=n_dim))
        ratios[n_dim] = vanishing_amplitude_check(curve, min_n_dim=0).metrics["max_pooled_ratio"]
    for ratio in ratios.values():
        assert 0.3 / n_realizations < ratio < 3.0 / n_realizations
    assert ratios[400] < VANISHING_RATIO_MAX
