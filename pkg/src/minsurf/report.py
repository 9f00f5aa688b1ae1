"""Run report assembly, JSON encoding, and plot-ready CSV emission."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

__all__ = ["to_jsonable", "write_report", "sha256_file", "emit_plot_data"]


def to_jsonable(obj):
    """Recursively convert numpy scalars and arrays for JSON encoding."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def write_report(report: dict, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_jsonable(report), sort_keys=True, indent=2) + "\n")


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def emit_plot_data(results: dict, outdir: Path, grid=None, fields: dict | None = None):
    """Write plot-ready CSV files for whichever report sections are present.

    Returns (emitted file names, absent section names). ``fields`` may carry
    full nodal arrays (residual field, eigenvector) that are too large for
    the JSON report.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    emitted: list[str] = []
    absent: list[str] = []
    fields = fields or {}

    profile = results.get("profile")
    if profile:
        rows = []
        d2 = profile["second_differences"]
        for i, t in enumerate(profile["t_samples"]):
            inner = d2[i - 1] if 1 <= i <= len(d2) else ""
            rows.append([t, profile["areas"][i], inner, profile["sup_lambda_max_path"][i]])
        _write_csv(outdir / "homotopy_profile.csv", ["t", "area", "d2area", "sup_lambda_max"], rows)
        emitted.append("homotopy_profile.csv")
    else:
        absent.append("homotopy_profile")

    sweep = results.get("sweep")
    if sweep:
        rows = [
            [
                step["amplitude"],
                step["converged"],
                step.get("sup_lambda_max", ""),
                step.get("min_eigenvalue", ""),
            ]
            for step in sweep["steps"]
        ]
        _write_csv(
            outdir / "sweep.csv", ["s", "converged", "sup_lambda_max", "theta_min"], rows
        )
        emitted.append("sweep.csv")
    else:
        absent.append("sweep")

    residual = fields.get("residual")
    if residual is not None and grid is not None:
        coords = grid.coordinates().reshape(-1, grid.n)
        res = residual.reshape(-1, residual.shape[-1])
        header = (
            ["node"]
            + [f"x{i}" for i in range(grid.n)]
            + [f"residual{a}" for a in range(res.shape[-1])]
        )
        rows = [
            [i, *coords[i].tolist(), *res[i].tolist()] for i in range(coords.shape[0])
        ]
        _write_csv(outdir / "residual_field.csv", header, rows)
        emitted.append("residual_field.csv")
    else:
        absent.append("residual_field")

    searches = results.get("searches")
    if searches:
        rows = []
        max_n = 0
        for s in searches:
            if not s.get("found"):
                continue
            lam = s["best_lambda"]
            flat = [v for row in s["best_C"] for v in row]
            values = json.dumps(s["best_values"], sort_keys=True)
            max_n = max(max_n, len(lam))
            rows.append(
                [s["chain"], s["n"], s.get("p") or "", s["best_margin"], lam, flat, values]
            )
        if rows:
            header = (
                ["chain", "n", "p", "margin"]
                + [f"lam{i}" for i in range(max_n)]
                + [f"C{i}_{j}" for i in range(max_n) for j in range(max_n)]
                + ["values"]
            )
            padded = []
            for chain, n, p, margin, lam, flat, values in rows:
                lam = list(lam) + [""] * (max_n - len(lam))
                # embed the n x n pairing block in the top-left of the padded layout
                grid_c = [["" for _ in range(max_n)] for _ in range(max_n)]
                for i in range(n):
                    for j in range(n):
                        grid_c[i][j] = flat[i * n + j]
                padded.append(
                    [chain, n, p, margin, *lam, *[v for r in grid_c for v in r], values]
                )
            _write_csv(outdir / "oracle_violations.csv", header, padded)
            emitted.append("oracle_violations.csv")
        else:
            absent.append("oracle_violations")
    else:
        absent.append("oracle_violations")

    checks = results.get("checks")
    if checks:
        rows = [[c["name"], c["passed"], c["value"], c["threshold"]] for c in checks]
        _write_csv(outdir / "validate_checks.csv", ["name", "passed", "value", "threshold"], rows)
        emitted.append("validate_checks.csv")
    else:
        absent.append("validate_checks")

    convergence = results.get("convergence")
    if convergence:
        rows = [
            [kind, r["nodes_per_axis"], r["h"], r["value"]]
            for kind, table in sorted(convergence.items())
            for r in table
        ]
        _write_csv(
            outdir / "convergence.csv", ["kind", "nodes_per_axis", "h", "value"], rows
        )
        emitted.append("convergence.csv")
    else:
        absent.append("convergence")

    return emitted, absent
