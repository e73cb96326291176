"""Config-driven experiment runner.

    nodal-lab --config experiment.ini [--out DIR] [--mesh-level N] [--verbose]

A config is a flat INI file: an ``[experiment]`` section naming the kind
(frequency | ratio | hodograph | liouville-fit | corrector | sweep | hook),
a ``[parameters]`` section with kind-specific keys, and an optional
``[tolerances]`` section copied verbatim into the manifest.  FORMATS.md in
the repository root documents every key and every CSV column.

Each run writes CSV tables, PNG figures rendered from the same data, and
a ``manifest.json`` recording the config hash, parameters, tolerances,
output hashes and library versions.  Outputs are deterministic: the same
config and seed reproduce the CSV bytes exactly.

Exit codes: 0 on success, 2 on config or validation failure, 3 on
numerical failure (the error class name is recorded in the manifest).
The environment variable NODAL_LAB_THREADS caps the worker pool used for
independent cases within one experiment.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    ExponentBelowThreshold,
    NodalLabError,
    NoNodalIntersection,
)
from .fem import (
    WeightSpec,
    fe_l2_error,
    solve_degenerate,
    solve_elliptic,
    solve_halfplane_la,
)
from .fields import catalog, field_values, harmonic_conjugate, parse_polynomial
from .frequency import frequency_profile, vanishing_order
from .hodograph import (
    build_map,
    la_harmonic_basis,
    liouville_fit,
    pushforward,
    straightened_matrix,
)
from .mesh import disc_mesh, half_disc_mesh
from .nodal import extract_nodal_set, find_hook
from .regularity import (
    boundary_conditions_check,
    c1_alpha_norm,
    ratio,
    uniformity_sweep,
)
from .report import (
    contour_figure,
    line_figure,
    nodal_figure,
    write_csv,
    write_manifest,
)
from .scheme import R0, approx_pair, verify_scheme

__all__ = ["ExperimentConfig", "run", "main"]


@dataclass
class ExperimentConfig:
    """One parsed experiment: kind, raw parameters, output directory."""

    kind: str
    out: Path
    params: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    seed: int = 0
    config_text: str = ""
    verbose: bool = False


# ---------------------------------------------------------------------------
# parameter parsing helpers (all failures -> ConfigError, exit code 2)
# ---------------------------------------------------------------------------


def _require(params: dict, key: str) -> str:
    if key not in params or not str(params[key]).strip():
        raise ConfigError(f"missing required parameter '{key}'")
    return str(params[key]).strip()


def _float(params: dict, key: str, default: float | None = None) -> float:
    if key not in params:
        if default is None:
            raise ConfigError(f"missing required parameter '{key}'")
        return default
    try:
        return float(params[key])
    except ValueError as exc:
        raise ConfigError(f"parameter '{key}': {exc}") from None


def _int(params: dict, key: str, default: int | None = None) -> int:
    if key not in params:
        if default is None:
            raise ConfigError(f"missing required parameter '{key}'")
        return default
    try:
        return int(params[key])
    except ValueError as exc:
        raise ConfigError(f"parameter '{key}': {exc}") from None


def _floats(params: dict, key: str, default=None) -> list[float]:
    if key not in params:
        if default is None:
            raise ConfigError(f"missing required parameter '{key}'")
        return list(default)
    try:
        return [float(t) for t in str(params[key]).split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"parameter '{key}': {exc}") from None


def _ints(params: dict, key: str, default=None) -> list[int]:
    vals = _floats(params, key, default)
    return [int(v) for v in vals]


def _point(params: dict, key: str, default=None) -> np.ndarray:
    vals = _floats(params, key, default)
    if len(vals) != 2:
        raise ConfigError(f"parameter '{key}' must be two numbers, got {len(vals)}")
    return np.asarray(vals, dtype=float)


def _poly(text: str, key: str):
    try:
        return parse_polynomial(text)
    except Exception as exc:
        raise ConfigError(f"parameter '{key}': cannot parse '{text}': {exc}") from None


def _polys(params: dict, key: str) -> list:
    """Semicolon-separated polynomial list (commas appear inside terms)."""
    return [_poly(t.strip(), key) for t in _require(params, key).split(";") if t.strip()]


def _names(params: dict, key: str, default: str | None = None) -> list[str]:
    text = params.get(key, default)
    if text is None:
        raise ConfigError(f"missing required parameter '{key}'")
    return [t.strip() for t in str(text).split(";") if t.strip()]


def _lookup_field(name: str):
    fields = catalog(include_test_only=True)
    if name not in fields:
        raise ConfigError(
            f"unknown coefficient field '{name}'; catalog: {', '.join(sorted(fields))}"
        )
    return fields[name]


def _field(params: dict, key: str = "field", default: str = "identity"):
    return _lookup_field(params.get(key, default).strip())


def _max_workers(n_jobs: int) -> int:
    """Worker count for independent cases, capped by NODAL_LAB_THREADS."""
    env = os.environ.get("NODAL_LAB_THREADS", "").strip()
    cap = int(env) if env else min(4, os.cpu_count() or 1)
    return max(1, min(cap, n_jobs))


def _parse_st_poly(text: str) -> list[tuple[float, int, int]]:
    """Parse a polynomial in the straightened variables s and t.

    Terms like '-2*s', '0.5*s^2*t', '3'; plain decimal coefficients only
    (no scientific notation, which would collide with term splitting).
    """
    src = text.replace(" ", "")
    if not src:
        raise ConfigError("empty profile expression")
    terms, buf = [], ""
    for ch in src:
        if ch in "+-" and buf:
            terms.append(buf)
            buf = ch if ch == "-" else ""
        else:
            buf += ch
    terms.append(buf)
    parsed = []
    for term in terms:
        if not term or term == "-":
            raise ConfigError(f"malformed profile term in '{text}'")
        coef, i, j = 1.0, 0, 0
        if term.startswith("-"):
            coef, term = -1.0, term[1:]
        for part in term.split("*"):
            if not part:
                raise ConfigError(f"malformed profile term in '{text}'")
            if part[0] in "st":
                var, _, power = part.partition("^")
                if var not in ("s", "t"):
                    raise ConfigError(f"unknown profile variable '{var}'")
                k = int(power) if power else 1
                if var == "s":
                    i += k
                else:
                    j += k
            else:
                try:
                    coef *= float(part)
                except ValueError:
                    raise ConfigError(f"bad profile factor '{part}'") from None
        parsed.append((coef, i, j))
    return parsed


def _eval_st(terms, S: np.ndarray, T: np.ndarray) -> np.ndarray:
    out = np.zeros_like(np.asarray(S, dtype=float))
    for c, i, j in terms:
        out += c * S**i * T**j
    return out


# ---------------------------------------------------------------------------
# experiment kinds; each _prep_* validates and returns a zero-arg execute()
# ---------------------------------------------------------------------------


def _prep_frequency(cfg: ExperimentConfig):
    p = cfg.params
    mode = p.get("mode", "exact").strip()
    if mode not in ("exact", "monotone"):
        raise ConfigError(f"frequency mode must be 'exact' or 'monotone', got '{mode}'")

    if mode == "exact":
        labels = _names(p, "cases")
        cases = [_poly(t, "cases") for t in labels]
        A = _field(p)
        center = _point(p, "center", (0.0, 0.0))
        radii = _floats(p, "radii")

        def execute():
            rows = []
            series = {}
            for label, u in zip(labels, cases):
                prof = frequency_profile(u, A, center, radii)
                series[label] = (prof.radii, prof.N)
                for r, _, _, n in prof.rows():
                    rows.append({"case": label, "radius": r, "frequency": n})
            csv = write_csv(cfg.out / "frequency.csv", rows, ["case", "radius", "frequency"])
            fig = line_figure(
                cfg.out / "frequency.png", series, "r", "N(r)", logx=True,
                title="Almgren frequency",
            )
            pars = {"mode": mode, "field": A.name, "cases": "; ".join(labels)}
            return [csv, fig], pars

        return execute

    field_ids = _names(p, "fields", "all")
    if field_ids == ["all"]:
        field_ids = sorted(catalog())
    fields = [_lookup_field(f) for f in field_ids]
    datum = _poly(_require(p, "datum"), "datum")
    level = _int(p, "level", 5)
    radii = np.asarray(_floats(p, "radii"), dtype=float)

    def execute():
        mesh = disc_mesh(level)

        def one(A):
            w = solve_elliptic(A, datum, mesh)
            nd = extract_nodal_set(w, mesh, A=A)
            if nd.is_empty:
                raise NoNodalIntersection(f"field {A.name}: datum has empty nodal set")
            cands = (
                np.array([s.location for s in nd.singular_points])
                if nd.singular_points
                else nd.node_points
            )
            x0 = cands[int(np.argmin(np.linalg.norm(cands, axis=1)))]
            rmax = 0.95 * (mesh.radius - float(np.linalg.norm(x0)))
            rr = radii[radii <= rmax]
            if len(rr) < 2:
                raise NoNodalIntersection(
                    f"field {A.name}: center {x0} leaves no admissible radii"
                )
            prof = frequency_profile(w, A, x0, rr)
            return x0, prof

        with ThreadPoolExecutor(max_workers=_max_workers(len(fields))) as ex:
            results = list(ex.map(one, fields))

        rows, series = [], {}
        for A, (x0, prof) in zip(fields, results):
            defect = prof.monotonicity_defect
            series[A.name] = (prof.radii, prof.N)
            for r, h, d, n in prof.rows():
                rows.append(
                    {
                        "case": A.name,
                        "center_x": float(x0[0]),
                        "center_y": float(x0[1]),
                        "radius": r,
                        "height": h,
                        "energy": d,
                        "frequency": n,
                        "defect": defect,
                    }
                )
        csv = write_csv(
            cfg.out / "frequency.csv",
            rows,
            ["case", "center_x", "center_y", "radius", "height", "energy",
             "frequency", "defect"],
        )
        fig = line_figure(
            cfg.out / "frequency.png", series, "r", "N(r)", logx=True,
            title=f"frequency along Z(u), level {level}",
        )
        pars = {
            "mode": mode, "fields": "; ".join(field_ids), "datum": _require(p, "datum"),
            "level": level, "h": mesh.h,
        }
        return [csv, fig], pars

    return execute


def _prep_ratio(cfg: ExperimentConfig):
    p = cfg.params
    mode = p.get("mode", "ratio").strip()
    if mode not in ("ratio", "convergence"):
        raise ConfigError(f"ratio mode must be 'ratio' or 'convergence', got '{mode}'")
    if mode == "convergence":
        return _prep_ratio_convergence(cfg)
    u = _poly(_require(p, "u"), "u")
    v = _poly(_require(p, "v"), "v")
    A = _field(p)
    fill = _float(p, "fill", 1e-3)
    level = _int(p, "level", 6)
    bound = _float(p, "frequency_bound", 0.0) or None

    def execute():
        w = ratio(v, u, fill=fill, A=A, level=level, frequency_bound=bound)
        mesh = w.mesh
        uv = field_values(u, mesh.vertices)
        vv = field_values(v, mesh.vertices)
        rows = [
            {"x": x, "y": y, "u": a_, "v": b_, "w": c_}
            for (x, y), a_, b_, c_ in zip(mesh.vertices, uv, vv, w.values)
        ]
        csv = write_csv(cfg.out / "ratio.csv", rows, ["x", "y", "u", "v", "w"])
        figs = [contour_figure(cfg.out / "ratio.png", mesh, w.values, title="w = v/u")]
        nd = extract_nodal_set(u, mesh, A=A)
        if not nd.is_empty:
            figs.append(nodal_figure(cfg.out / "nodal.png", nd, title="Z(u)"))
        pars = {
            "u": _require(p, "u"), "v": _require(p, "v"), "field": A.name,
            "fill": fill, "level": level,
        }
        return [csv] + figs, pars

    return execute


def _prep_ratio_convergence(cfg: ExperimentConfig):
    """Manufactured-solution refinement study for the degenerate solver."""
    p = cfg.params
    u = _poly(_require(p, "u"), "u")
    exact = _poly(_require(p, "exact"), "exact")
    A = _field(p)
    a = _float(p, "a")
    levels = _ints(p, "levels", (4, 5, 6))
    bound = _float(p, "frequency_bound", float(getattr(u, "degree", 1)))
    spec = WeightSpec(u, a, frequency_bound=max(bound, 1.0))
    spec.validate()

    def execute():
        rows = []
        for lv in levels:
            mesh = disc_mesh(lv)
            w = solve_degenerate(spec, A, exact, mesh)
            err = fe_l2_error(w, exact)
            defect, _ = boundary_conditions_check(w, u, A=A)
            rows.append(
                {"level": lv, "h": mesh.h, "l2_error": err, "conormal_defect": defect}
            )
        csv = write_csv(
            cfg.out / "convergence.csv",
            rows,
            ["level", "h", "l2_error", "conormal_defect"],
        )
        hs = np.array([r["h"] for r in rows])
        fig = line_figure(
            cfg.out / "convergence.png",
            {
                "L2 error": (hs, np.maximum([r["l2_error"] for r in rows], 1e-17)),
                "conormal defect": (
                    hs, np.maximum([r["conormal_defect"] for r in rows], 1e-17),
                ),
            },
            "h", "error", logx=True, logy=True, title="degenerate solver refinement",
        )
        pars = {
            "mode": "convergence", "u": _require(p, "u"), "exact": _require(p, "exact"),
            "a": a, "field": A.name, "levels": ", ".join(str(v) for v in levels),
        }
        if len(rows) >= 2:
            errs = np.maximum([r["l2_error"] for r in rows], 1e-300)
            pars["l2_slope"] = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
        return [csv, fig], pars

    return execute


def _prep_hodograph(cfg: ExperimentConfig):
    p = cfg.params
    mode = p.get("mode", "straighten").strip()
    if mode not in ("straighten", "halfplane"):
        raise ConfigError(
            f"hodograph mode must be 'straighten' or 'halfplane', got '{mode}'"
        )
    if mode == "halfplane":
        return _prep_halfplane(cfg)
    u = _poly(_require(p, "u"), "u")
    seed = _point(p, "seed")
    a = _float(p, "a", 2.0)
    WeightSpec(u, a, frequency_bound=1.0).validate()  # half-plane weight |t|^a

    push_field = _field(p)
    # The straightening identity B = diag(det A, 1) presumes u solves the
    # field's equation, so the fields to check are named explicitly; the
    # constant det-1 members keep Im z^2 an exact solution.
    field_ids = _names(p, "fields", "identity")
    fields = [_lookup_field(f) for f in field_ids]
    datum = _poly(p["datum"], "datum") if "datum" in p else None
    exact_terms = _parse_st_poly(p["exact_bar"]) if "exact_bar" in p else None
    level = _int(p, "level", 6)
    bar_radius = _float(p, "bar_radius", 0.0)

    def execute():
        rows, figs = [], []
        for fld in fields:
            hmap = build_map(u, fld, seed)
            sm = straightened_matrix(fld, hmap)
            rows.append(
                {
                    "field": fld.name,
                    "det_a": sm.det_A,
                    "straighten_defect": sm.defect,
                    "push_rel_l2": np.nan,
                    "push_residual": np.nan,
                }
            )
        if datum is not None:
            hmap = build_map(u, push_field, seed)
            R = bar_radius if bar_radius > 0 else 0.9 * float(
                np.max(np.linalg.norm(hmap.cache_images, axis=1))
            )
            hmesh = half_disc_mesh(level, radius=R)
            wbar, residual = pushforward(datum, hmap, a, hmesh)
            rel = np.nan
            if exact_terms is not None:
                rel = fe_l2_error(
                    wbar, lambda q: _eval_st(exact_terms, q[:, 0], q[:, 1])
                )
            rows.append(
                {
                    "field": push_field.name,
                    "det_a": hmap.det_A,
                    "straighten_defect": np.nan,
                    "push_rel_l2": rel,
                    "push_residual": residual,
                }
            )
            figs.append(
                contour_figure(
                    cfg.out / "pushforward.png", hmesh, wbar.values,
                    title="pushforward to the half-plane",
                )
            )
        csv = write_csv(
            cfg.out / "hodograph.csv",
            rows,
            ["field", "det_a", "straighten_defect", "push_rel_l2", "push_residual"],
        )
        pars = {
            "u": _require(p, "u"), "seed": f"{seed[0]}, {seed[1]}", "a": a,
            "fields": "; ".join(r["field"] for r in rows), "level": level,
        }
        return [csv] + figs, pars

    return execute


def _prep_halfplane(cfg: ExperimentConfig):
    """Refinement study for the |t|^a half-plane solver.

    For each exponent the manufactured solution is the monic degree-2
    weighted harmonic s^2 - t^2/(1+a), imposed on the rim and compared in
    L2 after the solve.
    """
    p = cfg.params
    a_values = _floats(p, "a_values")
    levels = _ints(p, "levels", (4, 5, 6))
    for a in a_values:
        if a <= -1.0:
            raise ExponentBelowThreshold(
                f"half-plane exponent a = {a} at or below -1"
            )

    def execute():
        rows, series = [], {}
        for a in a_values:
            exact = la_harmonic_basis(a, 2).polys[2]
            errs, hs = [], []
            for lv in levels:
                mesh = half_disc_mesh(lv)
                w = solve_halfplane_la(a, exact, mesh)
                err = fe_l2_error(w, exact)
                rows.append({"a": a, "level": lv, "h": mesh.h, "l2_error": err})
                errs.append(max(err, 1e-300))
                hs.append(mesh.h)
            series[f"a = {a:g}"] = (np.array(hs), np.array(errs))
        csv = write_csv(
            cfg.out / "halfplane.csv", rows, ["a", "level", "h", "l2_error"]
        )
        fig = line_figure(
            cfg.out / "halfplane.png", series, "h", "relative L2 error",
            logx=True, logy=True, title="half-plane solver refinement",
        )
        pars = {
            "mode": "halfplane",
            "a_values": ", ".join(f"{a:g}" for a in a_values),
            "levels": ", ".join(str(v) for v in levels),
        }
        return [csv, fig], pars

    return execute


def _prep_liouville(cfg: ExperimentConfig):
    p = cfg.params
    u = _poly(_require(p, "u"), "u")
    a = _float(p, "a")
    WeightSpec(u, a, frequency_bound=1.0).validate()
    gamma = _float(p, "gamma")
    profile = _require(p, "profile")
    radii = _floats(p, "radii", (1.0, 2.0, 4.0, 8.0))
    success_tol = _float(p, "success_tol", 1e-6)
    terms = None if profile == "inadmissible" else _parse_st_poly(profile)

    def execute():
        ubar = harmonic_conjugate(u)

        if terms is None:
            # The classical inadmissible branch t|t|^(-a); the modulus is
            # floored at a relative 1e-8 so samples falling exactly on Z(u)
            # stay finite without changing the profile anywhere that counts.
            def w(pts):
                t = field_values(u, pts)
                floor = 1e-8 * float(np.max(np.abs(t)))
                return t * np.maximum(np.abs(t), floor) ** (-a)
        else:
            def w(pts):
                return _eval_st(terms, field_values(ubar, pts), field_values(u, pts))

        fit = liouville_fit(w, u, a, gamma, radii=radii, ubar=ubar,
                            success_tol=success_tol)
        res_rows = [{"radius": r, "residual": e} for r, e in fit.rows()]
        coef_rows = [
            {"degree": m, "coefficient": float(c)}
            for m, c in enumerate(fit.coefficients)
        ]
        csv1 = write_csv(cfg.out / "residuals.csv", res_rows, ["radius", "residual"])
        csv2 = write_csv(cfg.out / "coefficients.csv", coef_rows, ["degree", "coefficient"])
        fig = line_figure(
            cfg.out / "residuals.png",
            {"residual": (fit.radii, np.maximum(fit.residuals, 1e-17))},
            "R", "relative L2 residual", logx=True, logy=True,
            title=f"profile fit: {fit.classification}",
        )
        pars = {
            "u": _require(p, "u"), "a": a, "gamma": gamma, "profile": profile,
            "classification": fit.classification,
        }
        return [csv1, csv2, fig], pars

    return execute


def _prep_corrector(cfg: ExperimentConfig):
    p = cfg.params
    u = _poly(_require(p, "u"), "u")
    A = _field(p)
    N = _int(p, "order")
    epsilons = _floats(p, "epsilons")
    if not epsilons:
        raise ConfigError("parameter 'epsilons' must list at least one value")
    alpha = _float(p, "alpha", 0.5)
    R = _float(p, "radius", R0)
    level = _int(p, "level", 6)
    norm_radius = _float(p, "norm_radius", R)

    def execute():
        with ThreadPoolExecutor(max_workers=_max_workers(len(epsilons))) as ex:
            pairs = list(ex.map(lambda e: approx_pair(u, A, e, N, R=R, level=level), epsilons))
        report = verify_scheme(pairs)

        rows = []
        sups, c1as = [], []
        for pair, row in zip(pairs, report.rows):
            sep = 4.0 * pair.phi.mesh.h
            c1a = c1_alpha_norm(pair.phi, alpha, sep, radius=norm_radius)
            order = (
                vanishing_order(pair.field, pair.A_eps, (0.0, 0.0))
                if not row["error"]
                else np.nan
            )
            sups.append(row["sup_correction"])
            c1as.append(c1a)
            rows.append(
                {
                    "epsilon": pair.epsilon,
                    "iterations": pair.iterations,
                    "order": order,
                    "sup_phi": row["sup_correction"],
                    "c1_alpha_phi": c1a,
                    "xi_min": row["min_modulus"],
                    "xi_max": row["max_modulus"],
                    "log_lipschitz": row["log_lipschitz"],
                    "error": row["error"],
                }
            )
        csv = write_csv(
            cfg.out / "corrector.csv",
            rows,
            ["epsilon", "iterations", "order", "sup_phi", "c1_alpha_phi",
             "xi_min", "xi_max", "log_lipschitz", "error"],
        )
        eps = np.asarray(epsilons)
        fig = line_figure(
            cfg.out / "corrector.png",
            {
                "sup phi": (eps, np.maximum(sups, 1e-17)),
                "C1a norm": (eps, np.maximum(c1as, 1e-17)),
            },
            "epsilon", "correction size", logx=True, logy=True,
            title="corrector scaling",
        )
        pars = {
            "u": _require(p, "u"), "field": A.name, "order": N, "alpha": alpha,
            "radius": R, "level": level, "uniform": report.uniform,
            "min_modulus_drift": report.min_modulus_drift,
            "log_lipschitz_drift": report.log_lipschitz_drift,
        }
        if len(eps) >= 2 and np.all(np.asarray(c1as) > 0):
            slope = float(np.polyfit(np.log(eps), np.log(c1as), 1)[0])
            pars["slope_c1_alpha"] = slope
        return [csv, fig], pars

    return execute


def _prep_sweep(cfg: ExperimentConfig):
    p = cfg.params
    case_texts = _names(p, "cases")
    cases = [_poly(t, "cases") for t in case_texts]
    datum_texts = _names(p, "datums")
    datums = [_poly(t, "datums") for t in datum_texts]
    if len(cases) != len(datums):
        raise ConfigError(
            f"'cases' and 'datums' must pair up ({len(cases)} vs {len(datums)})"
        )
    labels = _names(p, "labels", "; ".join(case_texts))
    if len(labels) != len(cases):
        raise ConfigError("'labels' must match 'cases' in length")
    a = _float(p, "a")
    alpha = _float(p, "alpha")
    levels = _ints(p, "levels", (5, 6))
    A = _field(p)
    radius = _float(p, "radius", 0.5)
    bound = max(float(getattr(c, "degree", 1)) for c in cases)
    WeightSpec(cases[0], a, frequency_bound=max(bound, 1.0)).validate()

    def execute():
        entries = list(zip(labels, cases, datums))
        per_level = {}
        for lv in levels:
            per_level[lv] = uniformity_sweep(entries, a, alpha, level=lv, A=A, radius=radius)

        rows, series = [], {}
        last_two = levels[-2:] if len(levels) >= 2 else levels
        for lv in levels:
            table = per_level[lv]
            series[f"level {lv}"] = (
                np.arange(len(table.rows)), [r["c1_seminorm"] for r in table.rows],
            )
            for i, r in enumerate(table.rows):
                row = dict(r)
                row["level"] = lv
                row["c0_drift"] = np.nan
                row["c1_drift"] = np.nan
                if lv == last_two[-1] and len(last_two) == 2:
                    prev = per_level[last_two[0]].rows[i]
                    for key, dkey in (("c0_seminorm", "c0_drift"), ("c1_seminorm", "c1_drift")):
                        den = max(abs(prev[key]), 1e-8)
                        row[dkey] = abs(r[key] - prev[key]) / den
                rows.append(row)
        csv = write_csv(
            cfg.out / "sweep.csv",
            rows,
            ["level", "case", "a", "alpha", "sup", "c0_seminorm", "c1_seminorm",
             "conormal_defect", "grad_at_singular", "c0_drift", "c1_drift"],
        )
        fig = line_figure(
            cfg.out / "sweep.png", series, "case index", "C1a seminorm",
            title=f"uniformity sweep, a={a:g}, alpha={alpha:g}",
        )
        pars = {
            "cases": "; ".join(case_texts), "datums": "; ".join(datum_texts),
            "a": a, "alpha": alpha, "field": A.name, "radius": radius,
            "levels": ", ".join(str(v) for v in levels),
            "max_c0": max(t.max_c0 for t in per_level.values()),
            "max_c1": max(t.max_c1 for t in per_level.values()),
        }
        return [csv, fig], pars

    return execute


def _prep_hook(cfg: ExperimentConfig):
    p = cfg.params
    case_texts = _names(p, "cases")
    cases = [_poly(t, "cases") for t in case_texts]
    x0 = _point(p, "x0")
    r_lo, r_hi = (_floats(p, "r_range", (0.05, 0.45)) + [0.45])[:2]

    def execute():
        rows, figs = [], []
        for i, (label, u) in enumerate(zip(case_texts, cases)):
            hook = find_hook(u, x0, (r_lo, r_hi))
            rows.append(
                {
                    "case": label,
                    "x0_x": float(hook.base[0]),
                    "x0_y": float(hook.base[1]),
                    "hook_x": float(hook.point[0]),
                    "hook_y": float(hook.point[1]),
                    "angle": hook.angle,
                    "radius": hook.radius,
                }
            )
            nd = extract_nodal_set(u, disc_mesh(6))
            figs.append(
                nodal_figure(
                    cfg.out / f"hook_{i}.png", nd,
                    points=np.vstack([hook.base, hook.point]),
                    title=f"{label}: hook angle {hook.angle:.3f}",
                )
            )
        csv = write_csv(
            cfg.out / "hook.csv",
            rows,
            ["case", "x0_x", "x0_y", "hook_x", "hook_y", "angle", "radius"],
        )
        pars = {"cases": "; ".join(case_texts), "x0": f"{x0[0]}, {x0[1]}",
                "r_range": f"{r_lo}, {r_hi}"}
        return [csv] + figs, pars

    return execute


_PREPARE = {
    "frequency": _prep_frequency,
    "ratio": _prep_ratio,
    "hodograph": _prep_hodograph,
    "liouville-fit": _prep_liouville,
    "corrector": _prep_corrector,
    "sweep": _prep_sweep,
    "hook": _prep_hook,
}


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


def run(cfg: ExperimentConfig) -> int:
    """Validate and execute one experiment; returns the process exit code."""
    try:
        if cfg.kind not in _PREPARE:
            raise ConfigError(
                f"unknown experiment kind '{cfg.kind}'; "
                f"known: {', '.join(sorted(_PREPARE))}"
            )
        execute = _PREPARE[cfg.kind](cfg)
    except (ConfigError, ExponentBelowThreshold) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2

    try:
        outputs, parameters = execute()
    except NodalLabError as exc:
        write_manifest(
            cfg.out, cfg.kind, cfg.config_text, {"seed": cfg.seed}, [],
            tolerances=cfg.tolerances, error=f"{type(exc).__name__}: {exc}",
        )
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3

    parameters = dict(parameters)
    parameters["seed"] = cfg.seed
    manifest = write_manifest(
        cfg.out, cfg.kind, cfg.config_text, parameters, outputs,
        tolerances=cfg.tolerances,
    )
    if cfg.verbose:
        for path in list(outputs) + [manifest]:
            print(path)
    return 0


def load_config(path, out=None, mesh_level=None, verbose=False) -> ExperimentConfig:
    """Parse an INI experiment file into an ExperimentConfig."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    if not cp.has_section("experiment"):
        raise ConfigError("config needs an [experiment] section")
    kind = cp.get("experiment", "kind", fallback="").strip()
    if not kind:
        raise ConfigError("[experiment] must set 'kind'")
    try:
        seed = cp.getint("experiment", "seed", fallback=0)
    except ValueError as exc:
        raise ConfigError(f"[experiment] seed: {exc}") from None
    out_dir = Path(out) if out else Path(
        cp.get("experiment", "out", fallback=f"runs/{path.stem}")
    )
    params = dict(cp["parameters"]) if cp.has_section("parameters") else {}
    tolerances = dict(cp["tolerances"]) if cp.has_section("tolerances") else {}
    if mesh_level is not None:
        params["level"] = str(mesh_level)
        if "levels" in params:
            params["levels"] = f"{mesh_level - 1}, {mesh_level}"
    return ExperimentConfig(
        kind=kind, out=out_dir, params=params, tolerances=tolerances,
        seed=seed, config_text=text, verbose=verbose,
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nodal-lab",
        description="Run a nodal-lab experiment described by an INI config.",
    )
    parser.add_argument("--config", required=True, help="experiment INI file")
    parser.add_argument("--out", default=None, help="output directory override")
    parser.add_argument("--mesh-level", type=int, default=None,
                        help="mesh refinement level override")
    parser.add_argument("--verbose", action="store_true",
                        help="list written artifacts")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, out=args.out, mesh_level=args.mesh_level,
                          verbose=args.verbose)
    except ConfigError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
