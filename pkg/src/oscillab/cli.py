"""Configuration-driven experiment runner.

Subcommands: `run <config.json>`, `list-fixtures`, `version`. A config is a
flat JSON object; `--set key=value` overrides single keys. Every run needs a
seed (randomized probes refuse to guess one), writes a CSV of report rows
with the fixed columns

    experiment,quantity,cube_center,cube_side,value,tolerance,verdict

and a JSON summary with machine-readable verdicts. Exit codes: 0 when every
contracted verdict passes, 1 on numerical failure, 2 on config errors.
Identical config and seed give byte-identical CSV output.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__, fixtures
from .errors import ConfigError, OscillabError
from .extraction import fourier_reciprocal, necessity_experiment, select_geometry, verify_master_chain
from .grid import Cube, Grid, GridFunction, CubeFamily, centered_family, enumerate_dyadic, indicator
from .operators import (
    OperatorHandle,
    averaging,
    bilinear_averaging,
    bilinear_maximal,
    commutator,
    maximal,
    operator_norm_estimate,
)
from .spaces import (
    Lebesgue,
    Variable,
    Weighted,
    chiQ_norm_ratio,
    condition_bilinear,
    condition_linear,
    luxemburg_norm,
    norm,
)
from .util import classify_growth
from .weights import ap_constant, ap_duality_gap, apq_constant

GLOBAL_DEFAULTS = {
    "dimension": 1,
    "box": [-1.0, 1.0],
    "m": 256,
    "level_min": 0,
    "level_max": 4,
    "csv_path": "report.csv",
    "json_path": "report.json",
}

EXP_DEFAULTS = {
    "norms": {"exponent": "arctan_profile", "p_const": 2.5, "trials": 50, "level_max": 6},
    "weight-constants": {
        "weight": "power:0.5",
        "p": 2.0,
        "level_min": 5,
        "level_max": 8,
        "cells_per_cube": 16,
    },
    "conditions": {
        "space_x": "lebesgue:2",
        "space_y": "lebesgue:2",
        "alpha": 0.0,
        "level_max": 6,
        "expect": 1.0,
        "tolerance": 1e-9,
    },
    "maximal": {"box": [-2.0, 2.0], "m": 128, "trials": 20, "level_max": 4},
    "commutator": {
        "kernel": "hilbert",
        "symbol": "log_abs",
        "box": [-8.0, 8.0],
        "m": 1024,
        "zero_tol": 1e-10,
        "oracle_tol": 0.02,
    },
    "chain": {
        "kernel": "bilinear_riesz",
        "symbol": "log_abs",
        "box": [-6.0, 6.0],
        "m": 512,
        "space_x1": "lebesgue:4",
        "space_x2": "lebesgue:4",
        "space_y": "lebesgue:2",
        "delta": 0.5,
        "n_per_axis": 10,
        "eps_tol": 1e-2,
        "family": "dyadic",
        "base_side": 1.125,
        "base_center": 0.0,
        "level_min": 2,
        "level_max": 3,
    },
    "necessity": {
        "kernel": "bilinear_riesz",
        "symbol": "log_abs",
        "box": [-6.0, 6.0],
        "m": 512,
        "space_x1": "lebesgue:4",
        "space_x2": "lebesgue:4",
        "space_y": "lebesgue:2",
        "delta": 0.5,
        "n_per_axis": 10,
        "eps_tol": 1e-2,
        "family": "centered",
        "base_side": 3.0,
        "base_center": 0.0,
        "level_min": 2,
        "level_max": 5,
        "expect_verdict": "stable",
    },
}

EXPERIMENT_ORDER = (
    "norms",
    "weight-constants",
    "conditions",
    "maximal",
    "commutator",
    "chain",
    "necessity",
)


@dataclass
class ReportRow:
    experiment: str
    quantity: str
    cube_center: str = ""
    cube_side: str = ""
    value: str = ""
    tolerance: str = ""
    verdict: str = "info"

    def fields(self) -> list[str]:
        return [
            self.experiment,
            self.quantity,
            self.cube_center,
            self.cube_side,
            self.value,
            self.tolerance,
            self.verdict,
        ]


def _num(v) -> str:
    if v is None:
        return ""
    f = float(v)
    if math.isnan(f):
        return "nan"
    return repr(f)


def _cube_cols(cube: Cube | None) -> tuple[str, str]:
    if cube is None:
        return "", ""
    center = " ".join(f"{c:.10g}" for c in cube.center)
    return center, f"{cube.side:.10g}"


def row(
    experiment: str,
    quantity: str,
    value,
    tolerance=None,
    verdict: str = "info",
    cube: Cube | None = None,
) -> ReportRow:
    cc, cs = _cube_cols(cube)
    return ReportRow(experiment, quantity, cc, cs, _num(value), _num(tolerance), verdict)


def _check(ok: bool) -> str:
    return "pass" if ok else "fail"


class ExperimentConfig:
    """Flat JSON config with per-experiment defaults layered underneath."""

    def __init__(self, data: dict):
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        self.data = data
        name = data.get("experiment")
        if name not in EXPERIMENT_ORDER and name != "all":
            raise ConfigError(
                f"experiment must be one of {', '.join(EXPERIMENT_ORDER)} or 'all'; got {name!r}"
            )
        if "seed" not in data:
            raise ConfigError("config needs a seed (randomized probes refuse to guess)")
        self.experiment = name
        self.seed = int(data["seed"])
        for key, val in data.items():
            if key.endswith("_tol") or key == "tolerance":
                if not isinstance(val, (int, float)) or val <= 0:
                    raise ConfigError(f"tolerance {key} must be positive, got {val!r}")
        self._validate_fixture_names(data)

    @staticmethod
    def _validate_fixture_names(data: dict):
        kernel = data.get("kernel")
        if kernel is not None and not (
            kernel in ("hilbert", "riesz_1", "riesz_2", "bilinear_riesz")
            or kernel.startswith(("frac_alpha:", "bilinear_frac_alpha:"))
        ):
            raise ConfigError(f"unknown kernel fixture {kernel!r}")
        symbol = data.get("symbol")
        if symbol is not None and symbol not in ("log_abs", "abs", "sgn_log") and not symbol.startswith("constant:"):
            raise ConfigError(f"unknown symbol fixture {symbol!r}")
        weight = data.get("weight")
        if weight is not None and not weight.startswith("power:"):
            raise ConfigError(f"unknown weight fixture {weight!r}")
        exponent = data.get("exponent")
        if exponent is not None and exponent != "arctan_profile" and not exponent.startswith("constant:"):
            raise ConfigError(f"unknown exponent fixture {exponent!r}")

    def scoped(self, experiment: str) -> "ScopedConfig":
        return ScopedConfig(self, experiment)


class ScopedConfig:
    def __init__(self, base: ExperimentConfig, experiment: str):
        self.base = base
        self.experiment = experiment
        self.seed = base.seed

    def get(self, key: str, default=None):
        if key in self.base.data:
            return self.base.data[key]
        if key in EXP_DEFAULTS.get(self.experiment, {}):
            return EXP_DEFAULTS[self.experiment][key]
        if key in GLOBAL_DEFAULTS:
            return GLOBAL_DEFAULTS[key]
        return default

    def grid(self) -> Grid:
        n = int(self.get("dimension"))
        lo, hi = self.get("box")
        return Grid((float(lo),) * n, (float(hi),) * n, int(self.get("m")))

    def family(self, grid: Grid) -> CubeFamily:
        kind = self.get("family", "dyadic")
        lmin = int(self.get("level_min"))
        lmax = int(self.get("level_max"))
        if kind == "dyadic":
            base = None
            if self.get("base_side") is not None:
                c = self.get("base_center", 0.0)
                center = (float(c),) * grid.n if np.isscalar(c) else tuple(c)
                base = Cube(center, float(self.get("base_side")))
            return enumerate_dyadic(grid, lmin, lmax, base)
        if kind == "centered":
            c = self.get("base_center", 0.0)
            center = (float(c),) * grid.n if np.isscalar(c) else tuple(c)
            return centered_family(grid, center, float(self.get("base_side")), lmin, lmax)
        raise ConfigError(f"unknown family kind {kind!r}")

    def space(self, key: str, grid: Grid):
        spec = self.get(key)
        if spec is None:
            return None
        parts = str(spec).split(":")
        if parts[0] == "lebesgue" and len(parts) == 2:
            return Lebesgue(float(parts[1]))
        if parts[0] == "weighted" and len(parts) >= 3:
            w = fixtures.make_weight(":".join(parts[2:]), grid)
            return Weighted(float(parts[1]), w)
        if parts[0] == "variable" and len(parts) >= 2:
            return Variable(fixtures.make_exponent(":".join(parts[1:]), grid))
        raise ConfigError(f"cannot parse space spec {spec!r} for {key}")


# ---- individual experiments ----


def _random_smooth(grid: Grid, rng: np.random.Generator) -> GridFunction:
    """A few random Gaussian bumps; smooth, sign-changing, nonzero."""
    meshes = grid.meshes()
    vals = np.zeros(grid.shape)
    width = (grid.hi[0] - grid.lo[0]) / 4
    for _ in range(4):
        c = [rng.uniform(lo, hi) for lo, hi in zip(grid.lo, grid.hi)]
        s = rng.uniform(0.2, 1.0) * width
        r2 = sum((m - ci) ** 2 for m, ci in zip(meshes, c))
        vals += rng.normal(0, 1) * np.exp(-r2 / (2 * s * s))
    if np.max(np.abs(vals)) < 1e-12:
        vals += 1.0
    return GridFunction(grid, vals)


def run_norms(cfg: ScopedConfig) -> tuple[list[ReportRow], dict]:
    grid = cfg.grid()
    rng = np.random.default_rng(cfg.seed)
    trials = int(cfg.get("trials"))
    p = float(cfg.get("p_const"))
    const_exp = fixtures.make_exponent(f"constant:{p}", grid)
    space = Variable(fixtures.make_exponent(cfg.get("exponent"), grid))

    worst_closed = 0.0
    worst_hom = 0.0
    worst_mod = 0.0
    for _ in range(trials):
        f = _random_smooth(grid, rng)
        lux = luxemburg_norm(f, const_exp)
        closed = norm(f, Lebesgue(p))
        worst_closed = max(worst_closed, abs(lux - closed) / closed)
        c = rng.uniform(0.5, 20.0)
        nf = luxemburg_norm(f, space.exponent)
        nc = luxemburg_norm(c * f, space.exponent)
        worst_hom = max(worst_hom, abs(nc - c * nf) / (c * nf))
        scaled = f / nf
        modular = float(
            np.sum(np.abs(scaled.values) ** space.exponent.fn.values) * grid.cell_volume
        )
        worst_mod = max(worst_mod, abs(modular - 1.0))

    lmax = int(cfg.get("level_max"))
    ratios_full = chiQ_norm_ratio(space.exponent, enumerate_dyadic(grid, 0, lmax))
    ratios_prev = chiQ_norm_ratio(space.exponent, enumerate_dyadic(grid, 0, lmax - 1))
    spread_full = ratios_full.max_value / ratios_full.min_value
    spread_prev = ratios_prev.max_value / ratios_prev.min_value
    drift = abs(spread_full / spread_prev - 1.0)

    rows = [
        row("norms", "luxemburg_vs_closed_form_rel", worst_closed, 1e-6, _check(worst_closed <= 1e-6)),
        row("norms", "homogeneity_defect_rel", worst_hom, 1e-8, _check(worst_hom <= 1e-8)),
        row("norms", "unit_modular_defect", worst_mod, 1e-8, _check(worst_mod <= 1e-8)),
        row("norms", "indicator_ratio_spread", spread_full, None, "info", ratios_full.argmax),
        row("norms", "indicator_ratio_drift", drift, 0.02, _check(drift <= 0.02)),
    ]
    summary = {"indicator_ratio_spread": spread_full, "indicator_ratio_drift": drift}
    return rows, summary


def run_weight_constants(cfg: ScopedConfig) -> tuple[list[ReportRow], dict]:
    n = int(cfg.get("dimension"))
    lo, hi = cfg.get("box")
    p = float(cfg.get("p"))
    wname = cfg.get("weight")
    cpc = int(cfg.get("cells_per_cube"))
    lmin, lmax = int(cfg.get("level_min")), int(cfg.get("level_max"))
    rows = []
    values = []
    argmax = None
    for level in range(lmin, lmax + 1):
        m = cpc * 2**level
        grid = Grid((float(lo),) * n, (float(hi),) * n, m)
        w = fixtures.make_weight(wname, grid)
        fam = enumerate_dyadic(grid, 0, level)
        rep = ap_constant(w, p, fam)
        values.append(rep.value)
        argmax = rep.argmax
        rows.append(row("weight-constants", f"ap_sup[level={level}]", rep.value, None, "info", rep.argmax))
    verdict = classify_growth(values)
    expect = cfg.get("expect_verdict")
    growth = values[-1] / values[-2] - 1.0 if len(values) > 1 else 0.0
    rows.append(
        row(
            "weight-constants",
            f"stability[{wname},p={p:g}]",
            growth,
            None,
            "info" if expect is None else _check(verdict == expect),
        )
    )
    grid = Grid((float(lo),) * n, (float(hi),) * n, cpc * 2**lmax)
    w = fixtures.make_weight(wname, grid)
    gap = ap_duality_gap(w, p, enumerate_dyadic(grid, 0, lmax))
    rows.append(row("weight-constants", "ap_duality_gap", gap, 1e-12, _check(gap <= 1e-12)))
    q = cfg.get("q")
    if q is not None:
        rep = apq_constant(w, p, float(q), enumerate_dyadic(grid, 0, lmax))
        rows.append(row("weight-constants", f"apq_sup[q={float(q):g}]", rep.value, None, "info", rep.argmax))
    summary = {
        "ap_values": values,
        "growth_verdict": verdict,
        "argmax_cube": str(argmax),
        "duality_gap": gap,
    }
    return rows, summary


def run_conditions(cfg: ScopedConfig) -> tuple[list[ReportRow], dict]:
    grid = cfg.grid()
    fam = enumerate_dyadic(grid, int(cfg.get("level_min")), int(cfg.get("level_max")))
    alpha = float(cfg.get("alpha"))
    X2 = cfg.space("space_x2", grid)
    Y = cfg.space("space_y", grid)
    if X2 is not None:
        X1 = cfg.space("space_x1", grid)
        rep = condition_bilinear(X1, X2, Y, alpha, fam, grid)
        name = "condition_bilinear_sup"
    else:
        X = cfg.space("space_x", grid)
        rep = condition_linear(X, Y, alpha, fam, grid)
        name = "condition_linear_sup"
    expect = cfg.get("expect")
    tol = float(cfg.get("tolerance"))
    if expect is None:
        verdict = "info"
    else:
        verdict = _check(abs(rep.value - float(expect)) <= tol)
    rows = [row("conditions", name, rep.value, tol if expect is not None else None, verdict, rep.argmax)]
    return rows, {"sup": rep.value, "argmax_cube": str(rep.argmax)}


def run_maximal(cfg: ScopedConfig) -> tuple[list[ReportRow], dict]:
    grid = cfg.grid()
    rng = np.random.default_rng(cfg.seed)
    fam = enumerate_dyadic(grid, 0, int(cfg.get("level_max")))
    trials = int(cfg.get("trials"))
    viol_lin = 0
    viol_bil = 0
    for _ in range(trials):
        f = _random_smooth(grid, rng)
        g = _random_smooth(grid, rng)
        q = fam.cubes[int(rng.integers(len(fam)))]
        alpha = float(rng.uniform(0.0, grid.n))
        mf = maximal(f, alpha, fam)
        af = averaging(f, q, alpha)
        viol_lin += int(np.sum(np.abs(af.values) > mf.values))
        alpha2 = float(rng.uniform(0.0, 2 * grid.n))
        mb = bilinear_maximal(f, g, alpha2, fam)
        ab = bilinear_averaging(f, g, q, alpha2)
        viol_bil += int(np.sum(np.abs(ab.values) > mb.values))
    rows = [
        row("maximal", "domination_violations_linear", viol_lin, 0, _check(viol_lin == 0)),
        row("maximal", "domination_violations_bilinear", viol_bil, 0, _check(viol_bil == 0)),
    ]
    return rows, {"violations": viol_lin + viol_bil}


def run_commutator(cfg: ScopedConfig) -> tuple[list[ReportRow], dict]:
    grid = cfg.grid()
    kernel = fixtures.make_kernel(cfg.get("kernel"), grid.n)
    T = OperatorHandle(kernel, name=cfg.get("kernel"))
    b = fixtures.make_symbol(cfg.get("symbol"), grid)
    ztol = float(cfg.get("zero_tol"))
    one = GridFunction(grid, np.ones(grid.shape))
    rows = []
    summary: dict = {}
    if kernel.arity == "linear":
        t_one = T(one)
        zmax = float(np.max(np.abs(t_one.values)))
        rows.append(row("commutator", "constant_annihilation", zmax, ztol, _check(zmax <= ztol)))
        cb = GridFunction(grid, np.full(grid.shape, 2.5))
        f = _random_smooth(grid, np.random.default_rng(cfg.seed))
        czero = float(np.max(np.abs(commutator(cb, T, f).values)))
        rows.append(row("commutator", "constant_symbol_commutator", czero, ztol, _check(czero <= ztol)))
        if cfg.get("kernel") == "hilbert" and grid.lo[0] <= -2.0 and grid.hi[0] >= 2.0:
            chi = indicator(grid, Cube((0.0,), 2.0))
            out = T(chi)
            x = grid.axis_centers(0)
            idx = int(np.argmin(np.abs(x - 2.0)))
            val = float(out.values[idx])
            rel = abs(val - math.log(3.0)) / math.log(3.0)
            tol = float(cfg.get("oracle_tol"))
            rows.append(row("commutator", "step_response_at_2_rel", rel, tol, _check(rel <= tol)))
            summary["step_response"] = val
        probes = []
        x = grid.meshes()[0]
        for omega in (1.0, 2.0, 4.0):
            for s in (0.5, 1.0, 2.0):
                probes.append(GridFunction(grid, np.sin(omega * x) * np.exp(-(x * x) / (2 * s * s))))
        est = operator_norm_estimate(T, [Lebesgue(2.0)], Lebesgue(2.0), probes)
        rows.append(row("commutator", "operator_norm_lower_bound", est.value, None, "info"))
        summary["norm_lower_bound"] = est.value
        cb_est = operator_norm_estimate(
            lambda ff: commutator(b, T, ff), [Lebesgue(2.0)], Lebesgue(2.0), probes
        )
        rows.append(row("commutator", "commutator_norm_lower_bound", cb_est.value, None, "info"))
        summary["commutator_lower_bound"] = cb_est.value
    else:
        cb = GridFunction(grid, np.full(grid.shape, 2.5))
        rng = np.random.default_rng(cfg.seed)
        f = _random_smooth(grid, rng)
        g = _random_smooth(grid, rng)
        from .operators import bilinear_commutator

        czero = float(np.max(np.abs(bilinear_commutator(cb, T, f, g, 1).values)))
        rows.append(row("commutator", "constant_symbol_commutator", czero, ztol, _check(czero <= ztol)))
    return rows, summary


def _chain_setup(cfg: ScopedConfig):
    grid = cfg.grid()
    kernel = fixtures.make_kernel(cfg.get("kernel"), grid.n)
    T = OperatorHandle(kernel, name=cfg.get("kernel"))
    b = fixtures.make_symbol(cfg.get("symbol"), grid)
    X1 = cfg.space("space_x1", grid) or cfg.space("space_x", grid)
    X2 = cfg.space("space_x2", grid) if kernel.arity == "bilinear" else None
    Y = cfg.space("space_y", grid)
    geometry = select_geometry(kernel, float(cfg.get("delta")))
    expansion = fourier_reciprocal(
        kernel, geometry, int(cfg.get("n_per_axis")), tol=float(cfg.get("eps_tol"))
    )
    return grid, kernel, T, b, X1, X2, Y, geometry, expansion


def run_chain(cfg: ScopedConfig) -> tuple[list[ReportRow], dict]:
    grid, kernel, T, b, X1, X2, Y, geometry, expansion = _chain_setup(cfg)
    fam = cfg.family(grid)
    rows = [row("chain", "fourier_residual", expansion.epsilon, float(cfg.get("eps_tol")), _check(expansion.epsilon <= float(cfg.get("eps_tol"))))]
    constant_symbol = str(cfg.get("symbol", "")).startswith("constant:")
    worst_gap = 0.0
    for q in fam:
        rep = verify_master_chain(b, T, X1, X2, Y, q, geometry, expansion)
        rows.append(row("chain", "stage_i", rep.stage_i, None, "info", q))
        rows.append(row("chain", "stage_iii", rep.stage_iii, None, "info", q))
        if constant_symbol:
            allz = max(abs(rep.stage_i), abs(rep.stage_ii), abs(rep.stage_iii), rep.stage_iv)
            rows.append(row("chain", "all_stages_zero", allz, 1e-10, _check(allz <= 1e-10), q))
            continue
        rel12 = rep.gap_12 / max(rep.stage_i, 1e-300)
        rows.append(row("chain", "gap_identity_rel", rel12, 1e-9, _check(rel12 <= 1e-9), q))
        tol23 = max(0.05 * rep.stage_i, rep.bound_23)
        rows.append(row("chain", "gap_truncation", rep.gap_23, tol23, _check(rep.gap_23 <= tol23), q))
        worst_gap = max(worst_gap, rep.gap_23 / max(rep.stage_i, 1e-300))
        scale = max(rep.stage_iv, 1e-300)
        rows.append(row("chain", "ordering_holder", rep.gap_34, None, _check(rep.gap_34 >= -1e-9 * scale), q))
        if rep.stage_v is not None:
            rows.append(row("chain", "ordering_probe_bound", rep.gap_45, None, _check(rep.gap_45 >= -1e-9 * max(rep.stage_v, 1e-300)), q))
    summary = {"epsilon": expansion.epsilon, "l1_total": expansion.l1_total, "worst_rel_gap": worst_gap, "cubes": len(fam)}
    return rows, summary


def run_necessity(cfg: ScopedConfig) -> tuple[list[ReportRow], dict]:
    grid, kernel, T, b, X1, X2, Y, geometry, expansion = _chain_setup(cfg)
    fam = cfg.family(grid)
    rep = necessity_experiment(b, T, X1, X2, Y, fam, geometry, expansion)
    rows = []
    for q, ratio in zip(fam.cubes, rep.ratios):
        rows.append(row("necessity", "oscillation_ratio", ratio, None, "info", q))
    for level in sorted(rep.ratio_by_level):
        rows.append(row("necessity", f"oscillation_ratio_max[level={level}]", rep.ratio_by_level[level], None, "info"))
    for level in sorted(rep.probe_by_level):
        rows.append(row("necessity", f"probe_norm_max[level={level}]", rep.probe_by_level[level], None, "info"))
    expect = cfg.get("expect_verdict")
    levels = sorted(rep.ratio_by_level)
    total = rep.ratio_by_level[levels[-1]] / rep.ratio_by_level[levels[0]]
    rows.append(
        row(
            "necessity",
            f"ratio_verdict[{cfg.get('symbol')}={rep.ratio_verdict}]",
            total,
            None,
            "info" if expect is None else _check(rep.ratio_verdict == expect),
        )
    )
    if rep.sup_bound_ratio is not None:
        rows.append(row("necessity", "bound_ratio_sup", rep.sup_bound_ratio, None, "info"))
    rows.append(row("necessity", "probe_norm_sup", rep.sup_probe, None, "info"))
    summary = {
        "ratio_verdict": rep.ratio_verdict,
        "probe_verdict": rep.probe_verdict,
        "sup_ratio": rep.sup_ratio,
        "sup_probe": rep.sup_probe,
        "ratio_by_level": {str(k): v for k, v in rep.ratio_by_level.items()},
    }
    return rows, summary


RUNNERS = {
    "norms": run_norms,
    "weight-constants": run_weight_constants,
    "conditions": run_conditions,
    "maximal": run_maximal,
    "commutator": run_commutator,
    "chain": run_chain,
    "necessity": run_necessity,
}


# ---- orchestration ----


def execute(config: ExperimentConfig) -> tuple[list[ReportRow], dict, int]:
    names = EXPERIMENT_ORDER if config.experiment == "all" else (config.experiment,)
    all_rows: list[ReportRow] = []
    summaries: dict = {}
    for name in names:
        scoped = config.scoped(name)
        try:
            rows, summary = RUNNERS[name](scoped)
        except ConfigError:
            raise
        except OscillabError as e:
            rows = [row(name, f"error[{type(e).__name__}]", float("nan"), None, "fail")]
            summary = {"error": f"{type(e).__name__}: {e}"}
        all_rows.extend(rows)
        summaries[name] = summary
    failed = any(r.verdict == "fail" for r in all_rows)
    return all_rows, summaries, 1 if failed else 0


def write_reports(rows: list[ReportRow], summaries: dict, config: ExperimentConfig):
    scoped = config.scoped(config.experiment if config.experiment != "all" else EXPERIMENT_ORDER[0])
    csv_path = scoped.get("csv_path")
    json_path = scoped.get("json_path")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["experiment", "quantity", "cube_center", "cube_side", "value", "tolerance", "verdict"])
        for r in rows:
            writer.writerow(r.fields())
    verdicts = {}
    for r in rows:
        if r.verdict in ("pass", "fail"):
            verdicts[f"{r.experiment}/{r.quantity}"] = r.verdict
    payload = {
        "experiment": config.experiment,
        "seed": config.seed,
        "pass": all(v == "pass" for v in verdicts.values()),
        "verdicts": verdicts,
        "summaries": summaries,
        "rows": len(rows),
        "version": __version__,
    }
    with open(json_path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, json_path


def _apply_overrides(data: dict, pairs: list[str]) -> dict:
    out = dict(data)
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"--set needs key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="oscillab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="run the experiment described by a JSON config")
    runp.add_argument("config", help="path to a flat JSON config file")
    runp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    sub.add_parser("list-fixtures", help="print the fixture registry")
    sub.add_parser("version", help="print the package version")
    args = parser.parse_args(argv)

    if args.command == "version":
        print(__version__)
        return 0
    if args.command == "list-fixtures":
        print(fixtures.registry_text())
        return 0

    try:
        with open(args.config) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    try:
        config = ExperimentConfig(_apply_overrides(data, args.set))
        rows, summaries, code = execute(config)
        csv_path, json_path = write_reports(rows, summaries, config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    n_fail = sum(1 for r in rows if r.verdict == "fail")
    n_pass = sum(1 for r in rows if r.verdict == "pass")
    print(f"wrote {csv_path} and {json_path}: {n_pass} pass, {n_fail} fail")
    return code


if __name__ == "__main__":
    sys.exit(main())
