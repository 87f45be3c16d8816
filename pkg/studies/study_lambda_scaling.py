"""
Étude : échelle en lambda de <G1(0)> et des corrélateurs X (lambda puis 2 lambda).
研究：<G1(0)> 与 X 关联函数随 lambda 的标度

<G1(0)> suit -i/lambda ; sum_c X_c,mm suit 1/lambda : lambda * <G1(0)> et
lambda * sum_c X doivent rester constants quand lambda double.

Usage:
  python studies/study_lambda_scaling.py
  python studies/study_lambda_scaling.py --lambdas 0.5 1 2 --realizations 50
"""

import sys
import os
import argparse

import numpy as np

# Ajouter le répertoire racine au path pour les imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.ensemble import correlator_check, green_center_check
from src.errors import TransitionModelError
from src.run_config import parse_config


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument('--lambdas', type=float, nargs='+', default=[1.0, 2.0])
    parser.add_argument('--n-dim', type=int, default=400)
    parser.add_argument('--realizations', type=int, default=50)
    parser.add_argument('--seed', type=int, default=42)
    parser.add_argument('--workers', type=int, default=1)
    args = parser.parse_args()

    rows = []
    for lam in args.lambdas:
        # grille réduite au centre de bande, mise à l'échelle de lambda
        overrides = {
            "lambda": lam,
            "n_dim": args.n_dim,
            "n_realizations": args.realizations,
            "energy_min": -0.1 * lam,
            "energy_max": 0.1 * lam,
            "energy_points": 3,
            "seed": args.seed,
            "workers": args.workers,
        }
        try:
            cfg = parse_config("", overrides)
            green = green_center_check(cfg)
            corr = correlator_check(cfg, 0.0)
        except TransitionModelError as e:
            print(f"❌ lambda={lam:g}: {e}")
            continue
        g = green.metrics["diag_mean_real"] + 1j * green.metrics["diag_mean_imag"]
        x_sum = float(np.mean(np.real(np.diagonal(corr.x_mean.sum(axis=0)))))
        rows.append((lam, lam * g, lam * x_sum, corr.identity_defect))

    print("\n" + "=" * 60)
    print(f"{'lambda':>8} {'lambda <G1(0)>':>24} {'lambda sum_c X':>16} {'identity':>10}")
    for lam, g, x, defect in rows:
        print(f"{lam:>8g} {g.real:>+11.4f}{g.imag:>+11.4f}i {x:>16.4f} {defect:>10.2e}")
    if len(rows) > 1:
        spread = max(r[2] for r in rows) / min(r[2] for r in rows) - 1.0
        print(f"\n📈 relative spread of lambda * sum_c X: {spread:.3%}")


if __name__ == "__main__":
    main()
