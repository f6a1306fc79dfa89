"""Experiment configuration: strict JSON schema, full-violation reporting.

The on-disk format is JSON with complex numbers written as two-element
``[re, im]`` arrays.  Unknown keys are rejected everywhere, and validation
reports every violation it can find, not just the first.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

from . import amplitudes as amp
from .errors import ConfigError
from .fractal_geometry import (
    CANTOR,
    DEFAULT_NODE_BUDGET,
    EQUILATERAL_BASE,
    SIERPINSKI,
    FractalSpec,
    sierpinski_vertex_count,
)
from .finite_dbar import IsometrySpec

MODE_ONE = "one-component"
MODE_TWO = "two-component"

STUDY_SINGLE = "single"
STUDY_CONVERGE_N = "converge-n"
STUDY_REFINE_H = "refine-h"

_DEFAULT_GRID = {"x": [-1.0, 1.0, 9], "y": [0.0, 0.0, 1], "t": [0.0, 0.0, 1]}
_DEFAULT_SPECTRUM = {"x_start": -10.0, "x_stop": 10.0, "h": 0.01, "n_eigs": 24}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated, fully-defaulted experiment description."""

    fractal: FractalSpec
    iso: IsometrySpec
    r1_spec: amp.AmplitudeSpec
    r2_spec: amp.AmplitudeSpec
    mode: str
    kdv_mode: bool
    grid: dict
    study: str
    levels: tuple[int, ...]
    refinements: int
    jobs: int
    node_budget: int
    rebalance: bool
    figures: bool
    spectrum: dict
    resolved: dict = field(repr=False, default_factory=dict)

    def config_hash(self) -> str:
        return hashlib.sha256(canonical_json(self.resolved).encode()).hexdigest()


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


# ---------------------------------------------------------------------------
# validation helpers: every failure appends "path: message" to `errors`


def _reject_unknown(obj: dict, path: str, allowed, errors: list):
    for key in obj:
        if key not in allowed:
            errors.append(f"{path}{key}: unknown key")


def _number(obj, key, path, errors, default=None, integer=False):
    if key not in obj:
        if default is None:
            errors.append(f"{path}{key}: required")
            return None
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        errors.append(f"{path}{key}: must be a number")
        return None
    if integer:
        if v != int(v):
            errors.append(f"{path}{key}: must be an integer")
            return None
        return int(v)
    return float(v)


def _boolean(obj, key, path, errors, default):
    v = obj.get(key, default)
    if not isinstance(v, bool):
        errors.append(f"{path}{key}: must be true or false")
        return default
    return v


def _string(obj, key, path, errors, choices, default=None):
    if key not in obj:
        if default is None:
            errors.append(f"{path}{key}: required")
            return None
        return default
    v = obj[key]
    if v not in choices:
        errors.append(f"{path}{key}: must be one of {sorted(choices)}, got {v!r}")
        return None
    return v


def _complex_pair(obj, key, path, errors, default=None):
    if key not in obj:
        if default is None:
            errors.append(f"{path}{key}: required")
            return None
        return default
    v = obj[key]
    if (
        not isinstance(v, list)
        or len(v) != 2
        or any(isinstance(c, bool) or not isinstance(c, (int, float)) for c in v)
    ):
        errors.append(f"{path}{key}: complex values are written as [re, im]")
        return None
    return complex(float(v[0]), float(v[1]))


def _parse_fractal(obj, errors) -> FractalSpec | None:
    path = "fractal."
    if not isinstance(obj, dict):
        errors.append("fractal: must be an object")
        return None
    local_start = len(errors)
    _reject_unknown(obj, path, {"kind", "eps", "level", "embedding", "base"}, errors)
    kind = _string(obj, "kind", path, errors, {CANTOR, SIERPINSKI})
    level = _number(obj, "level", path, errors, integer=True)
    eps = _number(obj, "eps", path, errors, default=1.0 / 3.0)
    if eps is not None and not 0.0 < eps < 1.0:
        errors.append(f"{path}eps: eps outside (0,1): {eps}")
    if level is not None and level < 0:
        errors.append(f"{path}level: must be >= 0")

    p, q = 1.0 + 0.0j, 0.0 + 0.0j
    emb = obj.get("embedding")
    if emb is not None:
        if not isinstance(emb, dict):
            errors.append(f"{path}embedding: must be an object")
        else:
            _reject_unknown(emb, path + "embedding.", {"p", "q"}, errors)
            p = _complex_pair(emb, "p", path + "embedding.", errors, default=1.0 + 0.0j)
            q = _complex_pair(emb, "q", path + "embedding.", errors, default=0.0 + 0.0j)
            if p == 0:
                errors.append(f"{path}embedding.p: must be nonzero")

    base = EQUILATERAL_BASE
    if "base" in obj:
        raw = obj["base"]
        ok = isinstance(raw, list) and len(raw) == 3
        verts = []
        if ok:
            for i, entry in enumerate(raw):
                z = _complex_pair({"v": entry}, "v", f"{path}base[{i}].", errors)
                ok = ok and z is not None
                verts.append(z)
        if not ok:
            errors.append(f"{path}base: must be three [re, im] vertices")
        else:
            base = tuple(verts)

    if len(errors) > local_start or kind is None or level is None or p is None or q is None:
        return None
    try:
        return FractalSpec(
            kind=kind, level=level, eps=float(eps), embedding_p=p, embedding_q=q, base=base
        )
    except Exception as exc:  # geometry-level invariants
        errors.append(f"fractal: {exc}")
        return None


def _parse_isometry(obj, errors) -> IsometrySpec | None:
    path = "isometry."
    if obj is None:
        return IsometrySpec(alpha=-1.0 + 0.0j, beta=0.0 + 0.0j)
    if not isinstance(obj, dict):
        errors.append("isometry: must be an object")
        return None
    _reject_unknown(obj, path, {"alpha", "beta"}, errors)
    alpha = _complex_pair(obj, "alpha", path, errors, default=-1.0 + 0.0j)
    beta = _complex_pair(obj, "beta", path, errors, default=0.0 + 0.0j)
    if alpha is None or beta is None:
        return None
    if abs(abs(alpha) - 1.0) > 1e-14:
        errors.append(f"{path}alpha: |alpha| must be 1 (isometry), got {abs(alpha)!r}")
        return None
    return IsometrySpec(alpha=alpha, beta=beta)


_FAMILY_KEYS = {
    amp.CONSTANT: {"value"},
    amp.POLYNOMIAL: {"coeffs"},
    amp.GAUSSIAN_BUMP: {"amplitude", "center", "width"},
    amp.TABLE_LOOKUP: {"values"},
}


def _parse_amplitude(obj, path, errors) -> amp.AmplitudeSpec | None:
    if not isinstance(obj, dict):
        errors.append(f"{path[:-1]}: must be an object")
        return None
    family = _string(obj, "family", path, errors, set(amp.FAMILIES))
    if family is None:
        return None
    _reject_unknown(obj, path, {"family", "sign_constraint"} | _FAMILY_KEYS[family], errors)
    sign = _string(obj, "sign_constraint", path, errors, set(amp.SIGN_CONSTRAINTS), amp.SIGN_NONE)
    kwargs = {"family": family, "sign_constraint": sign or amp.SIGN_NONE}
    if family == amp.CONSTANT:
        v = _complex_pair(obj, "value", path, errors, default=0.0 + 0.0j)
        kwargs["value"] = v if v is not None else 0.0j
    elif family == amp.POLYNOMIAL:
        raw = obj.get("coeffs", [])
        coeffs = []
        if not isinstance(raw, list):
            errors.append(f"{path}coeffs: must be a list of [re, im]")
        else:
            for i, entry in enumerate(raw):
                z = _complex_pair({"c": entry}, "c", f"{path}coeffs[{i}].", errors)
                if z is not None:
                    coeffs.append(z)
        kwargs["coeffs"] = tuple(coeffs)
    elif family == amp.GAUSSIAN_BUMP:
        a = _complex_pair(obj, "amplitude", path, errors, default=1.0 + 0.0j)
        cc = _complex_pair(obj, "center", path, errors, default=0.0 + 0.0j)
        w = _number(obj, "width", path, errors, default=1.0)
        if w is not None and w <= 0:
            errors.append(f"{path}width: must be positive")
            w = 1.0
        kwargs.update(amplitude=a or 1.0, center=cc or 0.0j, width=w or 1.0)
    else:
        raw = obj.get("values", [])
        vals = []
        if not isinstance(raw, list):
            errors.append(f"{path}values: must be a list of [re, im]")
        else:
            for i, entry in enumerate(raw):
                z = _complex_pair({"v": entry}, "v", f"{path}values[{i}].", errors)
                if z is not None:
                    vals.append(z)
        kwargs["values"] = tuple(vals)
    try:
        return amp.AmplitudeSpec(**kwargs)
    except Exception as exc:
        errors.append(f"{path[:-1]}: {exc}")
        return None


def _parse_axis(obj, key, errors) -> list | None:
    path = f"grid.{key}"
    v = obj.get(key)
    if (
        not isinstance(v, list)
        or len(v) != 3
        or any(isinstance(c, bool) or not isinstance(c, (int, float)) for c in v)
    ):
        errors.append(f"{path}: must be [start, stop, count]")
        return None
    start, stop, count = float(v[0]), float(v[1]), v[2]
    if count != int(count) or int(count) < 1:
        errors.append(f"{path}: count must be an integer >= 1")
        return None
    count = int(count)
    if count == 1 and start != stop:
        errors.append(f"{path}: a single-point axis needs start == stop")
        return None
    if count > 1 and not stop > start:
        errors.append(f"{path}: stop must exceed start when count > 1")
        return None
    return [start, stop, count]


def _is_zero_amplitude(spec: amp.AmplitudeSpec) -> bool:
    if spec.family == amp.CONSTANT:
        return spec.value == 0
    if spec.family == amp.POLYNOMIAL:
        return all(c == 0 for c in spec.coeffs)
    if spec.family == amp.TABLE_LOOKUP:
        return all(v == 0 for v in spec.values)
    return False


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate configuration text; raises :class:`ConfigError`
    carrying every violation found."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"not valid JSON: {exc}"]) from exc
    if not isinstance(raw, dict):
        raise ConfigError(["top level must be a JSON object"])

    errors: list[str] = []
    top_keys = {
        "fractal", "isometry", "amplitudes", "mode", "kdv_mode", "grid",
        "study", "levels", "refinements", "jobs", "node_budget", "rebalance",
        "figures", "spectrum",
    }
    _reject_unknown(raw, "", top_keys, errors)

    fractal = _parse_fractal(raw.get("fractal"), errors) if "fractal" in raw else None
    if "fractal" not in raw:
        errors.append("fractal: required")

    iso = _parse_isometry(raw.get("isometry"), errors)

    mode = _string(raw, "mode", "", errors, {MODE_ONE, MODE_TWO}, MODE_ONE)
    kdv_mode = _boolean(raw, "kdv_mode", "", errors, False)

    amps = raw.get("amplitudes", {})
    r1_spec = amp.AmplitudeSpec(family=amp.CONSTANT, value=1.0)
    r2_spec = amp.AmplitudeSpec.zero()
    if not isinstance(amps, dict):
        errors.append("amplitudes: must be an object")
    else:
        _reject_unknown(amps, "amplitudes.", {"r1", "r2"}, errors)
        if "r1" in amps:
            parsed = _parse_amplitude(amps["r1"], "amplitudes.r1.", errors)
            r1_spec = parsed or r1_spec
        if "r2" in amps:
            parsed = _parse_amplitude(amps["r2"], "amplitudes.r2.", errors)
            r2_spec = parsed or r2_spec

    grid = dict(_DEFAULT_GRID)
    if "grid" in raw:
        g = raw["grid"]
        if not isinstance(g, dict):
            errors.append("grid: must be an object")
        else:
            _reject_unknown(g, "grid.", {"x", "y", "t"}, errors)
            for key in ("x", "y", "t"):
                if key in g:
                    axis = _parse_axis(g, key, errors)
                    if axis is not None:
                        grid[key] = axis

    study = _string(raw, "study", "", errors, {STUDY_SINGLE, STUDY_CONVERGE_N, STUDY_REFINE_H}, STUDY_SINGLE)

    levels: tuple[int, ...] = ()
    if "levels" in raw:
        v = raw["levels"]
        if (
            not isinstance(v, list)
            or not v
            or any(isinstance(n, bool) or not isinstance(n, int) for n in v)
            or any(n < 0 for n in v)
            or sorted(v) != v
            or len(set(v)) != len(v)
        ):
            errors.append("levels: must be a strictly ascending list of integers >= 0")
        else:
            levels = tuple(v)

    refinements = _number(raw, "refinements", "", errors, default=2, integer=True)
    if refinements is not None and refinements < 1:
        errors.append("refinements: must be >= 1")

    jobs = _number(raw, "jobs", "", errors, default=1, integer=True)
    if jobs is not None and jobs < 1:
        errors.append("jobs: must be >= 1")

    budget = _number(raw, "node_budget", "", errors, default=DEFAULT_NODE_BUDGET, integer=True)
    if budget is not None and budget < 1:
        errors.append("node_budget: must be >= 1")

    rebalance = _boolean(raw, "rebalance", "", errors, True)
    figures = _boolean(raw, "figures", "", errors, True)

    spectrum = dict(_DEFAULT_SPECTRUM)
    if "spectrum" in raw:
        sp = raw["spectrum"]
        if not isinstance(sp, dict):
            errors.append("spectrum: must be an object")
        else:
            _reject_unknown(sp, "spectrum.", set(_DEFAULT_SPECTRUM), errors)
            spectrum["x_start"] = _number(sp, "x_start", "spectrum.", errors, default=-10.0)
            spectrum["x_stop"] = _number(sp, "x_stop", "spectrum.", errors, default=10.0)
            spectrum["h"] = _number(sp, "h", "spectrum.", errors, default=0.01)
            spectrum["n_eigs"] = _number(sp, "n_eigs", "spectrum.", errors, default=24, integer=True)
            if spectrum["h"] is not None and spectrum["h"] <= 0:
                errors.append("spectrum.h: must be positive")
            if (
                spectrum["x_start"] is not None
                and spectrum["x_stop"] is not None
                and not spectrum["x_start"] < spectrum["x_stop"]
            ):
                errors.append("spectrum.x_start: must be below spectrum.x_stop")

    # cross-field invariants
    if mode == MODE_ONE and "r2" in (amps if isinstance(amps, dict) else {}):
        if not _is_zero_amplitude(r2_spec):
            errors.append("amplitudes.r2: one-component mode requires r2 to be identically zero")
    if mode == MODE_TWO and isinstance(amps, dict) and "r2" not in amps:
        errors.append("amplitudes.r2: required in two-component mode")
    if study == STUDY_CONVERGE_N and not levels:
        errors.append("levels: required for the converge-n study")

    if kdv_mode and fractal is not None and iso is not None:
        if fractal.kind != CANTOR:
            errors.append("kdv_mode: requires a cantor node family on the positive reals")
        p, q = fractal.embedding_p, fractal.embedding_q
        if p.imag != 0.0 or q.imag != 0.0 or p.real <= 0.0 or q.real <= 0.0:
            errors.append(
                "fractal.embedding: kdv_mode requires a real embedding with p > 0 and q > 0 "
                "(nodes must stay strictly positive)"
            )
        if iso.alpha != -1.0 + 0.0j or iso.beta != 0.0 + 0.0j:
            errors.append(
                "isometry: kdv_mode requires phi(s) = -s (alpha = [-1, 0], beta = [0, 0])"
            )
        if r1_spec.sign_constraint != amp.SIGN_NON_NEGATIVE:
            errors.append("amplitudes.r1.sign_constraint: kdv_mode requires 'non-negative'")
        if r2_spec.sign_constraint != amp.SIGN_NON_POSITIVE and not _is_zero_amplitude(r2_spec):
            errors.append("amplitudes.r2.sign_constraint: kdv_mode requires 'non-positive'")

    if fractal is not None and budget is not None:
        count = (
            2 ** (fractal.level + 1)
            if fractal.kind == CANTOR
            else sierpinski_vertex_count(fractal.level)
        )
        top_level = max(levels) if levels else fractal.level
        top_count = (
            2 ** (top_level + 1)
            if fractal.kind == CANTOR
            else sierpinski_vertex_count(top_level)
        )
        if max(count, top_count) > budget:
            errors.append(
                f"fractal.level: {max(count, top_count)} nodes exceeds node_budget={budget}"
            )

    if errors:
        raise ConfigError(sorted(set(errors)))

    resolved = _resolve_dict(
        fractal, iso, r1_spec, r2_spec, mode, kdv_mode, grid, study, levels,
        refinements, jobs, budget, rebalance, figures, spectrum,
    )
    return ExperimentConfig(
        fractal=fractal,
        iso=iso,
        r1_spec=r1_spec,
        r2_spec=r2_spec,
        mode=mode,
        kdv_mode=kdv_mode,
        grid=grid,
        study=study,
        levels=levels,
        refinements=int(refinements),
        jobs=int(jobs),
        node_budget=int(budget),
        rebalance=rebalance,
        figures=figures,
        spectrum=spectrum,
        resolved=resolved,
    )


def _pair(z: complex) -> list:
    return [z.real, z.imag]


def _amplitude_dict(spec: amp.AmplitudeSpec) -> dict:
    out = {"family": spec.family, "sign_constraint": spec.sign_constraint}
    if spec.family == amp.CONSTANT:
        out["value"] = _pair(complex(spec.value))
    elif spec.family == amp.POLYNOMIAL:
        out["coeffs"] = [_pair(complex(c)) for c in spec.coeffs]
    elif spec.family == amp.GAUSSIAN_BUMP:
        out["amplitude"] = _pair(complex(spec.amplitude))
        out["center"] = _pair(complex(spec.center))
        out["width"] = spec.width
    else:
        out["values"] = [_pair(complex(v)) for v in spec.values]
    return out


def _resolve_dict(
    fractal, iso, r1_spec, r2_spec, mode, kdv_mode, grid, study, levels,
    refinements, jobs, budget, rebalance, figures, spectrum,
) -> dict:
    return {
        "fractal": {
            "kind": fractal.kind,
            "eps": fractal.eps,
            "level": fractal.level,
            "embedding": {"p": _pair(fractal.embedding_p), "q": _pair(fractal.embedding_q)},
            "base": [_pair(complex(v)) for v in fractal.base],
        },
        "isometry": {"alpha": _pair(iso.alpha), "beta": _pair(iso.beta)},
        "amplitudes": {"r1": _amplitude_dict(r1_spec), "r2": _amplitude_dict(r2_spec)},
        "mode": mode,
        "kdv_mode": kdv_mode,
        "grid": {k: list(v) for k, v in grid.items()},
        "study": study,
        "levels": list(levels),
        "refinements": int(refinements),
        "jobs": int(jobs),
        "node_budget": int(budget),
        "rebalance": rebalance,
        "figures": figures,
        "spectrum": dict(spectrum),
    }
