"""
Transition-state transmission - Pipeline principal
Deux espaces GOE reliés par k états de transition : balayage Monte Carlo de
P_ab(E) = <|S_ab|^2> et confrontation avec la formule factorisée.
"""

import sys
import os
import time
import argparse
import traceback

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from config import DEFAULT_OUTPUT_DIR
from src.ensemble import (
    analytic_confrontation,
    correlator_check,
    factorization_check,
    green_center_check,
    run_ensemble,
    vanishing_amplitude_check,
)
from src.errors import ParseError, ValidationError
from src.exactness import run_exactness_suite
from src.outputs import write_failures, write_outputs
from src.run_config import RunSpec, resolved_values

EXIT_PASS = 0
EXIT_GATE_FAILURE = 1
EXIT_USAGE = 2

FORMAT_CHOICES = {"csv": ("csv",), "json": ("json",), "both": ("csv", "json")}


def _run_step(name, runner, failures, **kwargs):
    """Exécute une étape et capture les erreurs (enregistrées comme porte échouée)."""
    try:
        return runner(**kwargs)
    except Exception as e:
        print(f"\n❌ {name} error: {e}")
        traceback.print_exc()
        failures.append({"check": name, "passed": False, "error": f"{type(e).__name__}: {e}"})
        return None


def _record(report, reports, failures):
    entry = report.to_dict()
    reports.append(entry)
    mark = "✅" if entry["passed"] else ("➖" if entry["passed"] is None else "❌")
    print(f"   {mark} {entry['check']}")
    if entry["passed"] is False:
        failures.append(entry)


def run(spec):
    """Execute one run; returns the exit status (0 pass, 1 gate failure, 2 usage/parse)."""
    try:
        cfg = spec.load()
    except (ParseError, ValidationError) as e:
        print(f"❌ Configuration error: {e}")
        return EXIT_USAGE

    model = cfg.model
    print("=" * 60)
    print(" TRANSITION-STATE TRANSMISSION")
    print("=" * 60)
    print(f"Model: N={model.n_dim}, k={model.k_trans}, lambda={model.lam:g}, "
          f"channels={model.n_channels_1}+{model.n_channels_2}")
    print(f"Ensemble: {cfg.n_realizations} realizations, {len(cfg.energy_grid)} energies, seed {cfg.master_seed}")
    print(f"Mode: {'Check only' if spec.check_only else 'Full run'}")
    print()

    start_time = time.time()
    reports, failures = [], []

    # --- 1. Suite d'exactitude ---
    suite = _run_step("exactness", run_exactness_suite, failures, cfg=cfg)
    if suite is not None:
        for check in suite.checks:
            entry = check.to_dict()
            reports.append(entry)
            if entry["passed"] is False:
                failures.append(entry)

    curve = None
    if not spec.check_only:
        # --- 2. Balayage Monte Carlo ---
        curve = _run_step("ensemble", run_ensemble, failures, cfg=cfg)

        print("\n📊 Checks:")
        if curve is not None:
            _record(analytic_confrontation(curve), reports, failures)
            _record(vanishing_amplitude_check(curve), reports, failures)

        # --- 3. Checks Monte Carlo indépendants ---
        for name, runner in (
            ("factorization", factorization_check),
            ("green_center", green_center_check),
            ("channel_resonance_correlator", correlator_check),
        ):
            report = _run_step(name, runner, failures, cfg=cfg)
            if report is not None:
                _record(report, reports, failures)

    # --- 4. Sorties ---
    print("\n💾 Outputs:")
    write_outputs(curve, reports, resolved_values(cfg), spec.output_dir, spec.formats)
    if failures:
        write_failures(failures, spec.output_dir)

    elapsed = time.time() - start_time
    print(f"\n  Total time: {elapsed:.1f}s")
    if failures:
        print(f"❌ {len(failures)} gate(s) failed")
        return EXIT_GATE_FAILURE
    print("✅ All gates passed")
    return EXIT_PASS


def build_parser():
    parser = argparse.ArgumentParser(description="Transition-state transmission - Monte Carlo vs analytic")
    parser.add_argument('--config', help='Fichier de run (clé: valeur), voir run.example.cfg')
    parser.add_argument('--preset', help='isolated | overlapping | custom')
    parser.add_argument('--seed', type=int, default=None, help='Graine maîtresse')
    parser.add_argument('--realizations', type=int, default=None, help='Nombre de réalisations')
    parser.add_argument('--energy-min', type=float, default=None)
    parser.add_argument('--energy-max', type=float, default=None)
    parser.add_argument('--energy-points', type=int, default=None)
    parser.add_argument('--output', default=DEFAULT_OUTPUT_DIR, help='Répertoire de sortie')
    parser.add_argument('--format', choices=sorted(FORMAT_CHOICES), default="both", help='csv | json | both')
    parser.add_argument('--check-only', action='store_true', help='Suite d\'exactitude sans balayage Monte Carlo')
    parser.add_argument('--workers', type=int, default=None, help='Threads pour les réalisations')
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_PASS

    overrides = {
        "seed": args.seed,
        "n_realizations": args.realizations,
        "energy_min": args.energy_min,
        "energy_max": args.energy_max,
        "energy_points": args.energy_points,
        "workers": args.workers,
    }
    spec = RunSpec(
        config_path=args.config,
        preset=args.preset,
        overrides={k: v for k, v in overrides.items() if v is not None},
        output_dir=args.output,
        formats=FORMAT_CHOICES[args.format],
        check_only=args.check_only,
    )
    return run(spec)


if __name__ == "__main__":
    sys.exit(main())
