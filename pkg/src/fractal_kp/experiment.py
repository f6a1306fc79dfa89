"""Experiment orchestration: runs, studies, and artifact emission.

Every command writes into one artifact directory: CSV data files, JSON
reports, a ``manifest.json`` that is sufficient to re-run the experiment,
and (unless disabled) rendered figures next to the data.  CSV bodies are
byte-deterministic for a given resolved configuration, independent of the
parallelism degree.
"""

from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, plots
from . import amplitudes as amp
from .config import (
    MODE_TWO,
    STUDY_REFINE_H,
    ExperimentConfig,
)
from .errors import FractalKPError
from .fractal_geometry import (
    CANTOR,
    FractalSpec,
    PointSet,
    cantor_intervals,
    cantor_moment_oracle,
    empirical_moment,
    generate_nodes,
    generate_partner_nodes,
    point_set_to_csv,
)
from .finite_dbar import (
    eval_chi,
    nonlocal_residual,
    solution_to_csv,
    solve_one_component,
    solve_two_component,
)
from .kp_engine import (
    RECONSTRUCTION_SIGN,
    REALITY_TOL,
    DressingSpec,
    FieldGrid,
    GridAxes,
    chi1_to_csv,
    compute_field,
    energy_bands_from_intervals,
    field_to_csv,
    kdv_probe,
    kp_residual,
    schrodinger_spectrum_probe,
    validate_kdv_mode,
)
from .singular_ieq import densities_to_csv, ieq_residual, solve_ieq1, solve_ieq23


def _write_text(path: Path, body: str):
    path.write_bytes(body.encode("utf-8"))


def _write_json(path: Path, obj):
    _write_text(path, json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _with_overrides(cfg: ExperimentConfig, level: int | None, jobs: int | None) -> ExperimentConfig:
    """Apply CLI overrides, keeping the resolved dict consistent."""
    if level is None and jobs is None:
        return cfg
    resolved = json.loads(json.dumps(cfg.resolved))
    changes: dict = {}
    if level is not None:
        resolved["fractal"]["level"] = int(level)
        changes["fractal"] = replace(cfg.fractal, level=int(level))
    if jobs is not None:
        resolved["jobs"] = int(jobs)
        changes["jobs"] = int(jobs)
    return replace(cfg, resolved=resolved, **changes)


def _manifest(cfg: ExperimentConfig, command: str, outputs: list[str]) -> dict:
    return {
        "command": command,
        "config": cfg.resolved,
        "config_sha256": cfg.config_hash(),
        "reconstruction_sign": RECONSTRUCTION_SIGN,
        "outputs": sorted(outputs),
        "versions": {
            "fractal-kp": __version__,
            "numpy": np.__version__,
            "scipy": __import__("scipy").__version__,
        },
    }


def build_point_set(cfg: ExperimentConfig) -> PointSet:
    return generate_nodes(cfg.fractal, budget=cfg.node_budget)


def build_partner_set(cfg: ExperimentConfig) -> PointSet:
    """Companion family (pre-isometry); the staggered second family is its
    image under the isometry."""
    return generate_partner_nodes(cfg.fractal, budget=cfg.node_budget)


def build_dressing(cfg: ExperimentConfig, q: PointSet) -> DressingSpec:
    r1 = amp.sample(cfg.r1_spec, q)
    r2 = amp.sample(cfg.r2_spec, q)
    return DressingSpec(r1_tilde=r1, r2_tilde=r2, iso=cfg.iso, rebalance=cfg.rebalance)


def axes_from_config(cfg: ExperimentConfig) -> GridAxes:
    return GridAxes.from_ranges(cfg.grid["x"], cfg.grid["y"], cfg.grid["t"])


def _refined_ranges(grid: dict, halvings: int) -> dict:
    """Same extents, spacings divided by 2**halvings (counts 2^k (n-1) + 1)."""
    out = {}
    for key, (start, stop, count) in grid.items():
        if count > 1:
            count = (count - 1) * 2**halvings + 1
        out[key] = [start, stop, count]
    return out


def _field(cfg: ExperimentConfig, q: PointSet, axes: GridAxes) -> FieldGrid:
    dressing = build_dressing(cfg, q)
    if cfg.kdv_mode:
        validate_kdv_mode(q, dressing)
    return compute_field(q, dressing, axes, jobs=cfg.jobs)


# --------------------------------------------------------------------------
# commands


def run_gen_set(cfg: ExperimentConfig, out: Path) -> dict:
    q = build_point_set(cfg)
    outputs = ["points_q.csv"]
    _write_text(out / "points_q.csv", point_set_to_csv(q))
    partner = None
    if cfg.mode == MODE_TWO:
        partner = cfg.iso.map_point_set(build_partner_set(cfg))
        _write_text(out / "points_r.csv", point_set_to_csv(partner))
        outputs.append("points_r.csv")
    if cfg.figures:
        plots.save_point_sets(out / "points.png", q, cfg.iso.map_point_set(q), partner)
        outputs.append("points.png")
    return {"outputs": outputs, "node_count": q.count}


def run_solve_chi(cfg: ExperimentConfig, out: Path) -> dict:
    """Finite pole-condition solve with the undressed (base) amplitudes."""
    q = build_point_set(cfg)
    r1 = amp.sample(cfg.r1_spec, q)
    if cfg.mode == MODE_TWO:
        partner_base = build_partner_set(cfg)
        partner = cfg.iso.map_point_set(partner_base)
        r2 = amp.sample(cfg.r2_spec, partner_base)
        sol = solve_two_component(q, partner, r1, r2, cfg.iso)
    else:
        sol = solve_one_component(q, r1, cfg.iso)
    _write_text(out / "chi_coefficients.csv", solution_to_csv(sol))
    report = {
        "nonlocal_residual": nonlocal_residual(sol),
        "condition_estimate": sol.report.condition_estimate,
        "solve_residual": sol.report.residual_norm,
        "pivot_growth": sol.report.pivot_growth,
    }
    _write_json(out / "solve_report.json", report)
    outputs = ["chi_coefficients.csv", "solve_report.json"]
    if cfg.figures:
        plots.save_coefficients(out / "chi_coefficients.png", sol)
        outputs.append("chi_coefficients.png")
    return {"outputs": outputs, **report}


def run_solve_ieq(cfg: ExperimentConfig, out: Path) -> dict:
    """Nystrom solve of the limiting equations with the base amplitudes."""
    q = build_point_set(cfg)
    r1 = amp.sample(cfg.r1_spec, q)
    if cfg.mode == MODE_TWO:
        r2 = amp.sample(cfg.r2_spec, q)
        sol = solve_ieq23(q, r1, r2, cfg.iso, rebalance=cfg.rebalance)
    else:
        sol = solve_ieq1(q, r1, cfg.iso)
    _write_text(out / "densities.csv", densities_to_csv(sol))
    report = {
        "equation_residual": ieq_residual(sol),
        "condition_estimate": sol.report.condition_estimate,
        "solve_residual": sol.report.residual_norm,
        "chi1": [sol.chi1.real, sol.chi1.imag],
    }
    _write_json(out / "ieq_report.json", report)
    outputs = ["densities.csv", "ieq_report.json"]
    if cfg.figures:
        plots.save_densities(out / "densities.png", sol)
        outputs.append("densities.png")
    return {"outputs": outputs, **report}


def _emit_field(cfg: ExperimentConfig, out: Path, fg: FieldGrid) -> list[str]:
    _write_text(out / "field.csv", field_to_csv(fg))
    _write_text(out / "chi1.csv", chi1_to_csv(fg))
    sidecar = {
        "axes": {k: list(cfg.grid[k]) for k in ("x", "y", "t")},
        "config_sha256": cfg.config_hash(),
        "failures": fg.failure_count(),
        "meta": fg.meta,
    }
    _write_json(out / "field_meta.json", sidecar)
    outputs = ["field.csv", "chi1.csv", "field_meta.json"]
    if cfg.figures:
        plots.save_field(out / "field.png", fg)
        outputs.append("field.png")
    return outputs


def run_kp_field(cfg: ExperimentConfig, out: Path) -> dict:
    q = build_point_set(cfg)
    fg = _field(cfg, q, axes_from_config(cfg))
    outputs = _emit_field(cfg, out, fg)
    return {"outputs": outputs, "failures": fg.failure_count()}


def run_residual(cfg: ExperimentConfig, out: Path) -> dict:
    """Residual report; with the refine-h study, a spacing-halving ladder."""
    q = build_point_set(cfg)
    if cfg.study == STUDY_REFINE_H:
        rows = []
        for k in range(cfg.refinements + 1):
            grid_k = _refined_ranges(cfg.grid, k)
            axes = GridAxes.from_ranges(grid_k["x"], grid_k["y"], grid_k["t"])
            fg = _field(cfg, q, axes)
            rep = kp_residual(fg)
            rows.append(
                {
                    "halvings": k,
                    "hx": rep.spacings[0],
                    "hy": rep.spacings[1],
                    "ht": rep.spacings[2],
                    "max_norm": rep.max_norm,
                    "l2_norm": rep.l2_norm,
                    "valid_fraction": rep.valid_fraction,
                }
            )
        for i in range(1, len(rows)):
            prev, cur = rows[i - 1], rows[i]
            cur["max_ratio"] = prev["max_norm"] / cur["max_norm"] if cur["max_norm"] else float("inf")
            cur["l2_ratio"] = prev["l2_norm"] / cur["l2_norm"] if cur["l2_norm"] else float("inf")
        header = ["halvings", "hx", "hy", "ht", "max_norm", "l2_norm", "valid_fraction", "max_ratio", "l2_ratio"]
        lines = [",".join(header)]
        for row in rows:
            lines.append(",".join(_csv_cell(row.get(k)) for k in header))
        _write_text(out / "residual_refinement.csv", "\n".join(lines) + "\n")
        _write_json(out / "residual_report.json", {"rows": rows})
        outputs = ["residual_refinement.csv", "residual_report.json"]
        if cfg.figures:
            plots.save_refinement(out / "residual_refinement.png", rows)
            outputs.append("residual_refinement.png")
        return {"outputs": outputs, "rows": rows}

    fg = _field(cfg, q, axes_from_config(cfg))
    rep = kp_residual(fg)
    outputs = _emit_field(cfg, out, fg)
    _write_json(out / "residual_report.json", rep.to_dict())
    outputs.append("residual_report.json")
    return {"outputs": outputs, **rep.to_dict()}


def run_kdv_probe(cfg: ExperimentConfig, out: Path) -> dict:
    if not cfg.kdv_mode:
        raise FractalKPError("kdv-probe requires a config with kdv_mode = true")
    q = build_point_set(cfg)
    fg = _field(cfg, q, axes_from_config(cfg))
    report = kdv_probe(fg, q, build_dressing(cfg, q))
    outputs = _emit_field(cfg, out, fg)
    _write_json(out / "kdv_report.json", report.to_dict())
    outputs.append("kdv_report.json")
    return {"outputs": outputs, **report.to_dict()}


def run_spectrum_probe(cfg: ExperimentConfig, out: Path) -> dict:
    """Eigenvalues of -d_xx + u(x, 0) against the candidate energy bands."""
    if not cfg.kdv_mode:
        raise FractalKPError("spectrum-probe requires a config with kdv_mode = true")
    q = build_point_set(cfg)
    sp = cfg.spectrum
    count = int(round((sp["x_stop"] - sp["x_start"]) / sp["h"])) + 1
    axes = GridAxes.from_ranges(
        (sp["x_start"], sp["x_start"] + (count - 1) * sp["h"], count),
        (0.0, 0.0, 1),
        (0.0, 0.0, 1),
    )
    fg = _field(cfg, q, axes)
    if fg.failure_count():
        raise FractalKPError(
            f"{fg.failure_count()} spectrum-slice points failed; shrink the domain"
        )
    slice_u = fg.u[:, 0, 0]
    if np.abs(slice_u.imag).max() > REALITY_TOL:
        raise FractalKPError("potential slice is not real; not a KdV-mode field")
    intervals = cantor_intervals(cfg.fractal.eps, cfg.fractal.level, budget=cfg.node_budget)
    bands = energy_bands_from_intervals(
        intervals.intervals, cfg.fractal.embedding_p.real, cfg.fractal.embedding_q.real
    )
    report = schrodinger_spectrum_probe(
        slice_u.real, sp["x_start"], sp["h"], int(sp["n_eigs"]), bands=bands
    )
    lines = ["eigenvalue,in_band,band_distance"]
    for row in report.rows:
        lines.append(
            f"{row['eigenvalue']!r},{int(row['in_band'])},{row['band_distance']!r}"
        )
    _write_text(out / "spectrum_table.csv", "\n".join(lines) + "\n")
    _write_json(out / "spectrum_report.json", report.to_dict())
    outputs = ["spectrum_table.csv", "spectrum_report.json"]
    if cfg.figures:
        plots.save_spectrum(out / "spectrum.png", report)
        plots.save_potential(out / "potential.png", fg.axes.x, slice_u.real)
        outputs += ["spectrum.png", "potential.png"]
    return {"outputs": outputs, "n_eigenvalues": len(report.rows)}


def converge_study(cfg: ExperimentConfig, n_list) -> list[dict]:
    """Fields at increasing construction level over one fixed grid; reports
    sup-norm steps between consecutive levels plus moment-convergence columns."""
    n_list = list(n_list)
    if n_list != sorted(n_list) or len(set(n_list)) != len(n_list):
        raise FractalKPError("levels must be strictly ascending")
    axes = axes_from_config(cfg)
    rows = []
    prev_u = None
    for level in n_list:
        fractal = FractalSpec(
            kind=cfg.fractal.kind, level=level, eps=cfg.fractal.eps,
            embedding_p=cfg.fractal.embedding_p, embedding_q=cfg.fractal.embedding_q,
            base=cfg.fractal.base,
        )
        q = generate_nodes(fractal, budget=cfg.node_budget)
        dressing = DressingSpec(
            r1_tilde=amp.sample(cfg.r1_spec, q),
            r2_tilde=amp.sample(cfg.r2_spec, q),
            iso=cfg.iso,
            rebalance=cfg.rebalance,
        )
        fg = compute_field(q, dressing, axes, jobs=cfg.jobs)
        row = {"level": level, "nodes": q.count, "failures": fg.failure_count()}
        if cfg.fractal.kind == CANTOR:
            base = PointSet.from_nodes(
                (q.nodes - cfg.fractal.embedding_q) / cfg.fractal.embedding_p
            )
            row["moment2_gap"] = abs(
                empirical_moment(base, 2).real - cantor_moment_oracle(cfg.fractal.eps, 2)
            )
        else:
            row["moment2"] = abs(empirical_moment(q, 2))
        if prev_u is not None:
            both = np.isfinite(prev_u) & np.isfinite(fg.u)
            row["sup_diff"] = (
                float(np.abs(fg.u - prev_u)[both].max()) if both.any() else float("nan")
            )
        rows.append(row)
        prev_u = fg.u
    return rows


def run_converge(cfg: ExperimentConfig, out: Path) -> dict:
    rows = converge_study(cfg, cfg.levels)
    keys = sorted({k for row in rows for k in row})
    lines = [",".join(keys)]
    for row in rows:
        lines.append(",".join(_csv_cell(row.get(k)) for k in keys))
    _write_text(out / "convergence.csv", "\n".join(lines) + "\n")
    _write_json(out / "convergence.json", {"rows": rows})
    outputs = ["convergence.csv", "convergence.json"]
    if cfg.figures:
        plots.save_convergence(out / "convergence.png", rows)
        outputs.append("convergence.png")
    return {"outputs": outputs, "rows": rows}


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


COMMANDS = {
    "gen-set": run_gen_set,
    "solve-chi": run_solve_chi,
    "solve-ieq": run_solve_ieq,
    "kp-field": run_kp_field,
    "residual": run_residual,
    "kdv-probe": run_kdv_probe,
    "spectrum-probe": run_spectrum_probe,
    "converge": run_converge,
}


def run_experiment(
    cfg: ExperimentConfig,
    out_dir,
    command: str = "kp-field",
    jobs: int | None = None,
    level: int | None = None,
) -> Path:
    """Run one command into ``out_dir`` and write the manifest; returns the
    artifact directory."""
    if command not in COMMANDS:
        raise FractalKPError(f"unknown command {command!r}")
    cfg = _with_overrides(cfg, level, jobs)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = COMMANDS[command](cfg, out)
    manifest = _manifest(cfg, command, result.get("outputs", []) + ["manifest.json"])
    _write_json(out / "manifest.json", manifest)
    return out
