"""
Outputs - écriture des résultats (CSV, JSON, rapport d'échecs).
输出模块 - CSV / JSON 结果文件与失败报告

Fichiers produits (voir SCHEMA.md) :
  - transmission.csv  : une ligne par (E, paire a-b), 17 chiffres significatifs
  - transmission.json : config résolue + tableaux + rapports des checks
  - failures.json     : uniquement si une porte échoue
Aucun horodatage : deux runs de même graine donnent des fichiers identiques octet par octet.
"""

import sys
import os
import json

import numpy as np
import pandas as pd

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from config import CSV_FILENAME, FAILURES_FILENAME, FLOAT_FORMAT, JSON_FILENAME

CSV_COLUMNS = ["E", "pair", "p_mc", "p_err", "p_analytic", "Y", "Y_isolated", "Y_cross"]


def _to_json_val(v):
    """numpy / complex values → JSON-compatible (complex as [re, im])."""
    if isinstance(v, np.ndarray):
        if np.iscomplexobj(v):
            return np.stack([v.real, v.imag], axis=-1).tolist()
        return v.tolist()
    if isinstance(v, (complex, np.complexfloating)):
        return [float(v.real), float(v.imag)]
    if isinstance(v, np.generic):
        return v.item()
    raise TypeError(f"not JSON serializable: {type(v).__name__}")


def curve_frame(curve):
    """Long-format table: energies outer, then pairs (a, b) in row-major order, 1-based labels."""
    n_e, n1, n2 = curve.p_mc.mean.shape
    a, b = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
    labels = [f"{i + 1}-{j + 1}" for i, j in zip(a.ravel(), b.ravel())]
    per_pair = n1 * n2
    return pd.DataFrame({
        "E": np.repeat(curve.energies, per_pair),
        "pair": labels * n_e,
        "p_mc": curve.p_mc.mean.reshape(-1),
        "p_err": curve.p_mc.std_error.reshape(-1),
        "p_analytic": curve.p_analytic.reshape(-1),
        "Y": np.repeat(curve.y, per_pair),
        "Y_isolated": np.repeat(curve.y_isolated, per_pair),
        "Y_cross": np.repeat(curve.y_cross, per_pair),
    }, columns=CSV_COLUMNS)


def curve_payload(curve):
    return {
        "energies": curve.energies,
        "n_realizations": curve.p_mc.n,
        "n_skipped": curve.n_skipped,
        "p_mc": curve.p_mc.mean,
        "p_err": curve.p_mc.std_error,
        "p_analytic": curve.p_analytic,
        "s_mean": curve.s_mean.mean,
        "s_mean_err": curve.s_mean.std_error,
        "t1": [t.t_values for t in curve.t1],
        "t2": [t.t_values for t in curve.t2],
        "sum_t1": [t.sum_t for t in curve.t1],
        "sum_t2": [t.sum_t for t in curve.t2],
        "y": curve.y,
        "y_isolated": curve.y_isolated,
        "y_cross": curve.y_cross,
        "p_total_mc": curve.p_total_mc.mean,
        "p_total_err": curve.p_total_mc.std_error,
        "p_total_analytic": curve.p_total_analytic,
        "resonances": curve.resonances.to_dict(),
    }


def _dump_json(payload, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, default=_to_json_val, allow_nan=True)
        f.write("\n")


def write_outputs(curve, reports, resolved_config, output_dir, formats=("csv", "json")):
    """
    Write the requested formats into output_dir and return the paths written.
    curve may be None (check-only run): the CSV is then skipped.
    """
    os.makedirs(output_dir, exist_ok=True)
    written = []
    if "csv" in formats and curve is not None:
        path = os.path.join(output_dir, CSV_FILENAME)
        curve_frame(curve).to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        written.append(path)
    if "json" in formats:
        payload = {
            "config": resolved_config,
            "passed": all(r.get("passed") is not False for r in reports),
            "checks": reports,
        }
        if curve is not None:
            payload["curve"] = curve_payload(curve)
        path = os.path.join(output_dir, JSON_FILENAME)
        _dump_json(payload, path)
        written.append(path)
    for path in written:
        print(f"   💾 {path}")
    return written


def write_failures(failures, output_dir):
    """failures: list of dicts (failed check reports or stage errors)."""
    os.makedirs(output_dir, exist_ok=True)
    path = os.path.join(output_dir, FAILURES_FILENAME)
    _dump_json({"n_failures": len(failures), "failures": failures}, path)
    print(f"   ❌ failure report: {path}")
    return path
