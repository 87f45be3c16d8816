"""
Exactness - suite de vérifications déterministes (quelques secondes).
精确性检验 - 快速确定性检查

Vue d'ensemble / 功能概述 :
  - 20 réalisations (N=60, Lambda1 = Lambda2 = 8) : unitarité et symétrie de S,
    S_ab resommée = bloc direct, décomposition V = O diag(sv) O_tr^T aller-retour
  - Y direct = Y résonant = diagonale + interférences, règle de somme des largeurs
  - significativité des interférences (presets isolé / recouvrement)
  - pic d'une résonance unique à couplage symétrique : Y = 1/4

Utilisé par main.py --check-only et en tête de chaque run complet.
"""

import sys
import os
from dataclasses import dataclass, field, replace

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from config import (
    EXACTNESS_CHANNELS,
    EXACTNESS_N_DIM,
    EXACTNESS_REALIZATIONS,
    GRAM_TOL,
    UNITARITY_TOL,
)
from src.ensemble import CheckReport, realization_rng
from src.errors import SingularAtEnergy, TransitionModelError
from src.model_core import (
    config_transition_vectors,
    decompose_coupling,
    fixed_right_frames,
    sample_realization,
)
from src.run_config import preset_htr_eigenvalues
from src.scattering import s_ab_resummed, s_matrix_direct
from src.transition import (
    build_resonances,
    interference_decomposition,
    transport_factor_direct,
    transport_factor_isolated,
    transport_factor_resonant,
)

ROUND_TRIP_TOL = 1e-12
INTERFERENCE_MIN_OVERLAPPING = 0.10
INTERFERENCE_MAX_ISOLATED = 0.05
PEAK_VALUE = 0.25


@dataclass
class SuiteReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed is not False for c in self.checks)

    def failed(self):
        return [c for c in self.checks if c.passed is False]

    def to_dict(self):
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks]}


def _small_model(cfg):
    """Exactness-sized copy of the run's model (N=60, 8 channels per side)."""
    model = cfg.model
    n = min(model.n_dim, EXACTNESS_N_DIM)
    return replace(
        model,
        n_dim=max(n, model.k_trans),
        channel_strengths_1=model.channel_strengths_1[:EXACTNESS_CHANNELS],
        channel_strengths_2=model.channel_strengths_2[:EXACTNESS_CHANNELS],
    )


def _check_energies(cfg):
    grid = cfg.energies()
    picks = {float(grid[0]), float(grid[grid.size // 2]), float(grid[-1])}
    return sorted(picks)


# ============================================================
# 1. Réalisations exactes / 单次实现的精确检验
# ============================================================

def realization_exactness(cfg, n_realizations=EXACTNESS_REALIZATIONS):
    model_cfg = _small_model(cfg)
    right = fixed_right_frames(model_cfg)
    energies = _check_energies(cfg)
    worst = {"unitarity": 0.0, "symmetry": 0.0, "schur": 0.0, "round_trip": 0.0, "sv": 0.0, "gram": 0.0}
    errors = []
    for r in range(n_realizations):
        model = sample_realization(model_cfg, realization_rng(cfg.master_seed, r), right)
        worst["gram"] = max(worst["gram"], model.w1.gram_defect(), model.w2.gram_defect())
        try:
            for energy in energies:
                s = s_matrix_direct(model, energy)
                worst["unitarity"] = max(worst["unitarity"], s.unitarity_defect())
                worst["symmetry"] = max(worst["symmetry"], s.symmetry_defect())
                schur = float(np.max(np.abs(s_ab_resummed(model, energy) - s.ab)))
                worst["schur"] = max(worst["schur"], schur)
            for block in (model.v1, model.v2):
                if not np.any(block.singular_values):
                    continue
                back = decompose_coupling(block.v_matrix)
                worst["round_trip"] = max(worst["round_trip"], back.reconstruction_residual())
                expected = np.sort(block.singular_values)[::-1]
                sv_dev = float(np.max(np.abs(back.singular_values - expected))) / float(expected[0])
                worst["sv"] = max(worst["sv"], sv_dev)
        except TransitionModelError as e:
            errors.append(f"realization {r}: {e}")

    return [
        CheckReport("channel_gram", worst["gram"] <= GRAM_TOL, {"max_defect": worst["gram"]}),
        CheckReport("s_unitarity", worst["unitarity"] <= UNITARITY_TOL and not errors,
                    {"max_defect": worst["unitarity"], "n": n_realizations}, "; ".join(errors)),
        CheckReport("s_symmetry", worst["symmetry"] <= UNITARITY_TOL and not errors,
                    {"max_defect": worst["symmetry"]}),
        CheckReport("schur_resummation", worst["schur"] <= UNITARITY_TOL and not errors,
                    {"max_difference": worst["schur"]}),
        CheckReport("coupling_round_trip",
                    worst["round_trip"] <= ROUND_TRIP_TOL and worst["sv"] <= ROUND_TRIP_TOL and not errors,
                    {"max_residual": worst["round_trip"], "max_sv_deviation": worst["sv"]}),
    ]


# ============================================================
# 2. Théorie analytique / 解析理论检验
# ============================================================

def _relative(a, b):
    return abs(a - b) / max(abs(a), abs(b), np.finfo(float).tiny)


def transport_factor_consistency(model_cfg, energies):
    """Y from G_tr, from the Breit-Wigner sum and from diagonal + cross agree; sum of widths = trace."""
    z1, z2 = config_transition_vectors(model_cfg)
    htr = model_cfg.htr_matrix()
    res = build_resonances(htr, z1, z2)
    worst = 0.0
    for energy in energies:
        try:
            y_direct = transport_factor_direct(htr, z1, z2, energy)
        except SingularAtEnergy:
            continue
        y_res = transport_factor_resonant(res, energy)
        diag, cross = interference_decomposition(res, energy)
        worst = max(worst, _relative(y_direct, y_res), _relative(y_res, diag + cross))
    trace = float(np.trace(z1.T @ z1 + z2.T @ z2))
    sum_rule = abs(float(np.sum(res.widths)) - trace) / max(trace, np.finfo(float).tiny)
    return [
        CheckReport("transport_factor_forms", worst <= UNITARITY_TOL, {"max_rel_difference": worst}),
        CheckReport("width_sum_rule", sum_rule <= UNITARITY_TOL,
                    {"sum_widths": float(np.sum(res.widths)), "trace": trace, "rel_difference": sum_rule}),
    ]


def interference_significance(model_cfg, energies):
    """max |Y - Y_isolated| / Y on the grid (overlapping) and at the peaks (isolated)."""
    reports = []
    for preset in ("overlapping", "isolated"):
        htr = preset_htr_eigenvalues(preset, model_cfg.lam, model_cfg.k_trans, model_cfg.sv_1, model_cfg.sv_2)
        cfg = replace(model_cfg, htr_spec=htr)
        z1, z2 = config_transition_vectors(cfg)
        res = build_resonances(cfg.htr_matrix(), z1, z2)
        points = energies if preset == "overlapping" else res.positions
        gaps = []
        for energy in points:
            y = transport_factor_resonant(res, energy)
            if y > 0:
                gaps.append(abs(y - transport_factor_isolated(res, energy)) / y)
        gap = max(gaps, default=0.0)
        if preset == "overlapping":
            coupled = model_cfg.k_trans > 1 and np.any(res.widths > 0)
            passed = gap > INTERFERENCE_MIN_OVERLAPPING if coupled else None
        else:
            passed = gap < INTERFERENCE_MAX_ISOLATED
        reports.append(CheckReport(
            f"interference_{preset}", passed,
            {"max_rel_gap": gap, "overlap": res.to_dict()["overlap"]},
            "" if passed is not None else "single or uncoupled resonance: no interference",
        ))
    return reports


def single_resonance_peak(coupling=0.1, position=0.0):
    """k = 1, z1 = z2: Y at the resonance energy is exactly 1/4."""
    z = np.array([[coupling]])
    res = build_resonances(np.array([[position]]), z, z)
    y = transport_factor_resonant(res, position)
    dev = abs(y - PEAK_VALUE)
    return CheckReport("single_resonance_peak", dev <= ROUND_TRIP_TOL, {"y_peak": y, "deviation": dev})


def run_exactness_suite(cfg, n_realizations=EXACTNESS_REALIZATIONS):
    """Every deterministic gate; no Monte Carlo average involved."""
    print(f"📡 Exactness suite: {n_realizations} realizations at N={_small_model(cfg).n_dim}")
    report = SuiteReport()
    report.checks.extend(realization_exactness(cfg, n_realizations))
    report.checks.extend(transport_factor_consistency(cfg.model, cfg.energies()))
    report.checks.extend(interference_significance(cfg.model, cfg.energies()))
    report.checks.append(single_resonance_peak())
    for check in report.checks:
        mark = "✅" if check.passed else ("➖" if check.passed is None else "❌")
        print(f"   {mark} {check.name}")
    return report
