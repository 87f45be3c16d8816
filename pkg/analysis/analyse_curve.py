"""
Analyse d'un run — lecture de transmission.csv / transmission.json.
运行结果分析：读取 CSV/JSON 输出

Usage:
  python analysis/analyse_curve.py                 # répertoire output/
  python analysis/analyse_curve.py --output runs/overlapping --top 5
"""

import sys
import os
import json
import argparse

import pandas as pd

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from config import CORRELATOR_FLUX_FACTOR, CSV_FILENAME, DEFAULT_OUTPUT_DIR, JSON_FILENAME


def load_curve(output_dir):
    """Table longue (E, pair) du run."""
    return pd.read_csv(os.path.join(output_dir, CSV_FILENAME), dtype={"pair": str})


def energy_summary(frame):
    """Par énergie : sommes sur les paires, Y et part d'interférence."""
    summary = frame.groupby("E").agg(
        p_mc=("p_mc", "sum"),
        p_analytic=("p_analytic", "sum"),
        y=("Y", "first"),
        y_cross=("Y_cross", "first"),
    )
    summary["ratio"] = summary["p_mc"] / summary["p_analytic"]
    summary["cross_share"] = summary["y_cross"] / summary["y"]
    return summary


def resonance_peaks(summary):
    """Maxima locaux de Y sur la grille."""
    y = summary["y"]
    is_peak = (y > y.shift(1, fill_value=-1.0)) & (y >= y.shift(-1, fill_value=-1.0))
    return summary[is_peak]


def max_per_pair(frame):
    """Énergie et valeur du maximum de p_mc pour chaque paire."""
    idx = frame.groupby("pair")["p_mc"].idxmax()
    return frame.loc[idx, ["pair", "E", "p_mc", "p_analytic"]].sort_values("p_mc", ascending=False)


def top_pairs(frame, energy, n=5):
    at_e = frame[frame["E"] == energy]
    return at_e.nlargest(n, "p_mc")[["pair", "p_mc", "p_err", "p_analytic"]]


def print_checks(output_dir):
    path = os.path.join(output_dir, JSON_FILENAME)
    if not os.path.exists(path):
        return
    with open(path, encoding="utf-8") as f:
        payload = json.load(f)
    print("\n✅ Checks :" if payload["passed"] else "\n❌ Checks :")
    for check in payload["checks"]:
        mark = "✅" if check["passed"] else ("➖" if check["passed"] is None else "❌")
        print(f"   {mark} {check['check']}")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument('--output', default=DEFAULT_OUTPUT_DIR, help='Répertoire du run')
    parser.add_argument('--top', type=int, default=5, help='Paires affichées par pic')
    args = parser.parse_args()

    if not os.path.exists(os.path.join(args.output, CSV_FILENAME)):
        print(f"⚠️  {CSV_FILENAME} introuvable dans {args.output} (run --check-only ?)")
        return

    frame = load_curve(args.output)
    summary = energy_summary(frame)

    print("=" * 60)
    print("📊 TRANSMISSION — RÉSUMÉ DU RUN")
    print("=" * 60)
    print(f"\n📈 {summary.shape[0]} énergies, {frame['pair'].nunique()} paires")
    print(f"   p_mc / p_analytic (somme sur les paires) : médiane {summary['ratio'].median():.3f}"
          f" (attendu {CORRELATOR_FLUX_FACTOR ** 2:g})")
    print(f"   part d'interférence max |Y_cross| / Y : {summary['cross_share'].abs().max():.3f}")

    peaks = resonance_peaks(summary)
    print(f"\n🔺 Pics de Y : {len(peaks)}")
    for energy, row in peaks.iterrows():
        print(f"   E = {energy:+.4f} | Y = {row['y']:.4g} | sum p_mc = {row['p_mc']:.4g} | ratio {row['ratio']:.3f}")
        for _, p in top_pairs(frame, energy, args.top).iterrows():
            print(f"      {p['pair']:<7} p_mc {p['p_mc']:.3e} ± {p['p_err']:.1e} | analytic {p['p_analytic']:.3e}")

    best = max_per_pair(frame)
    print(f"\n👥 Maximum de p_mc par paire (top {args.top}) :")
    for _, p in best.head(args.top).iterrows():
        print(f"   {p['pair']:<7} E = {p['E']:+.4f} | p_mc {p['p_mc']:.3e} | analytic {p['p_analytic']:.3e}")

    print_checks(args.output)
    print("\n" + "=" * 60)


if __name__ == "__main__":
    main()
