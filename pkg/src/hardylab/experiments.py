"""Config-driven experiment scenarios with fixed CSV schemas and SVG charts.

Every run is deterministic given (config, seed): rows are emitted in sorted
parameter order and floats are printed with 9 significant digits, so a rerun
produces byte-identical CSV. Wall-clock runtimes go to a .meta.txt sidecar
(and stderr), never into the CSV.
"""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .atoms import (
    AtomSpec,
    PreMoleculeSpec,
    edge_cutoff,
    make_atom,
    min_premolecule_constant,
    moment_bound_check,
    random_smooth_field,
    validate_premolecule,
)
from .config import ConfigError, ExperimentConfig, parse_alpha_list, parse_number, parse_number_list
from .grid import Ball, GridFunction, GridSpec, _lp_impl, integrate
from .maximal import MollifierSpec, ScaleGrid, build_test_dictionary, grand_maximal, hp_norm
from .moments import HardyIndex, _smooth_noise_on_ball, dual_norm_check, monomial_field, multiindices, order
from .operators import cancellation_test, get_operator, smooth_window
from .svgchart import Series, line_chart

SCHEMAS = {
    "E1-moment-decay": ["kind", "p", "profile", "r", "alpha", "abs_moment",
                        "bound", "hp_norm", "ratio"],
    "E2-grand-maximal-constant": ["kind", "p", "r", "T", "value", "model",
                                  "param_a", "param_b", "r_squared"],
    "E3-atom-image": ["operator", "p", "s", "lambda", "r", "seed", "alpha", "m1_ratio",
                      "m2_ratio", "best_c", "abs_pairing", "bound", "moment_ratio"],
    "E4-cancellation": ["operator", "p", "alpha", "r", "oscillation", "psi",
                        "ratio", "window", "sensitivity", "dual_gap"],
    "E5-duality": ["mode", "instance", "r", "trials", "lhs", "rhs", "gap", "ratio"],
}


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    return f"{float(v):.9g}"


def _alpha_str(alpha) -> str:
    return ";".join(str(a) for a in alpha)


def write_csv(path, schema: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(schema) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


@dataclass
class RunResult:
    scenario: str
    csv_path: Path
    svg_paths: list[Path]
    rows: list[list]
    runtime: float


def _operator_from_cfg(cfg: ExperimentConfig):
    name = cfg.source.get("scenario", "operator", required=True)
    raw = cfg.source.get("scenario", "operator_params", default="")
    params = {}
    for tok in raw.replace(",", " ").split():
        if "=" not in tok:
            raise ConfigError(f"{cfg.source.path}: bad operator_params token {tok!r}")
        k, v = tok.split("=", 1)
        params[k] = parse_number(v)
    try:
        return get_operator(name, cfg.grid, **params)
    except KeyError as e:
        raise ConfigError(str(e)) from None


def _p_values(cfg: ExperimentConfig, default: str) -> list[float]:
    return parse_number_list(cfg.source.get("scenario", "p_values", default=default))


def _profile_field(kind: str, grid: GridSpec, ball: Ball, rng, idx: HardyIndex) -> GridFunction:
    if kind == "indicator":
        mask = ball.mask(grid)
        return GridFunction(grid, mask.astype(float))
    if kind == "bump":
        return edge_cutoff(grid, ball, width_frac=0.6)
    if kind == "random":
        w = edge_cutoff(grid, ball)
        return w * GridFunction(grid, random_smooth_field(grid, ball, rng))
    if kind == "atom":
        return make_atom(AtomSpec(idx, 2.0, ball, "local"),
                         int(rng.integers(0, 2**31)), grid)
    raise ConfigError(f"unknown profile {kind!r}")


# ---------------------------------------------------------------------------


def run_E1_moment_decay(cfg: ExperimentConfig) -> list[list]:
    """Moment/norm ratios for small-ball profiles across an r-ladder, with a
    max/min summary per (p, profile, alpha)."""
    grid = cfg.grid
    mol = MollifierSpec(cfg.source.get("scenario", "mollifier", default="gaussian"), grid.dim)
    scales = ScaleGrid.default(grid, 1.0)
    ladder = cfg.ladder(default="2^-1,2^-2,2^-3,2^-4,2^-5,2^-6,2^-7,2^-8")
    profiles = [s.strip() for s in
                cfg.source.get("scenario", "profiles", default="indicator,bump,random").split(",")]
    rows = []
    for ip, p in enumerate(_p_values(cfg, "1, 2/3")):
        idx = HardyIndex(p, grid.dim)
        for iprof, prof in enumerate(profiles):
            ratios: dict[tuple, list[float]] = {}
            for ir, r in enumerate(ladder):
                ball = Ball((0.0,) * grid.dim, r)
                rng = np.random.default_rng([cfg.seed, ip, iprof, ir])
                g = _profile_field(prof, grid, ball, rng, idx)
                table = moment_bound_check(g, ball, idx, mol, scales)
                for row in table.rows:
                    rows.append(["data", p, prof, r, _alpha_str(row.alpha),
                                 row.abs_moment, row.bound, table.hp, row.ratio])
                    ratios.setdefault(row.alpha, []).append(row.ratio)
            for alpha, vals in sorted(ratios.items()):
                lo = min(vals)
                span = max(vals) / lo if lo > 0 else float("inf")
                rows.append(["summary", p, prof, "", _alpha_str(alpha), "", "", "", span])
    return rows


def _fit_log_model(Ts, values):
    A = np.vstack([np.ones(len(Ts)), np.log(Ts)]).T
    coef, *_ = np.linalg.lstsq(A, values, rcond=None)
    pred = A @ coef
    ss = np.sum((values - np.mean(values)) ** 2)
    r2 = 1.0 - np.sum((values - pred) ** 2) / ss if ss > 0 else 1.0
    return float(coef[0]), float(coef[1]), float(r2)


def _fit_power_model(Ts, values):
    logv = np.log(values)
    A = np.vstack([np.ones(len(Ts)), np.log(Ts)]).T
    coef, *_ = np.linalg.lstsq(A, logv, rcond=None)
    pred = A @ coef
    ss = np.sum((logv - np.mean(logv)) ** 2)
    r2 = 1.0 - np.sum((logv - pred) ** 2) / ss if ss > 0 else 1.0
    return float(np.exp(coef[0])), float(coef[1]), float(r2)


def run_E2_grand_maximal_constant(cfg: ExperimentConfig) -> list[list]:
    """Grand-maximal norms of atoms across a T-ladder: log-model fit at p = 1,
    power-model fit at p < 1, and the T-variation of small-ball atoms."""
    grid = cfg.grid
    Ts = parse_number_list(cfg.source.get("scenario", "T_ladder", default="1,2,4,8"))
    if max(Ts) > grid.half_width / 2.0:
        raise ConfigError(f"{cfg.source.path}: T ladder exceeds L/2 (wrap-around guard)")
    r_large = cfg.source.get_number("scenario", "r_large", default=1.0)
    r_small = cfg.source.get_number("scenario", "r_small", default=0.25)
    n_seeds = cfg.source.get_int("scenario", "n_seeds", default=6)
    mol = MollifierSpec("smooth-bump", grid.dim)
    rows = []

    def norms_for(idx: HardyIndex, r: float) -> np.ndarray:
        spec_a = AtomSpec(idx, np.inf, Ball((0.0,) * grid.dim, r), "local")
        out = []
        for T in Ts:
            scales = ScaleGrid.default(grid, T)
            dct = build_test_dictionary(grid, idx, T, mol, scales)
            vals = [_lp_impl(grand_maximal(make_atom(spec_a, cfg.seed + s, grid), dct), idx.p)
                    for s in range(n_seeds)]
            out.append(float(np.mean(vals)))
        return np.asarray(out)

    for p in _p_values(cfg, "1, 1/2"):
        idx = HardyIndex(p, grid.dim)
        vals = norms_for(idx, r_large)
        for T, v in zip(Ts, vals):
            rows.append(["data", p, r_large, T, v, "", "", "", ""])
        if p == 1.0:
            icpt, slope, r2 = _fit_log_model(Ts, vals)
            rows.append(["fit", p, r_large, "", "", "log", icpt, slope, r2])
        else:
            amp, expo, r2 = _fit_power_model(Ts, vals)
            rows.append(["fit", p, r_large, "", "", "power", amp, expo, r2])
    idx1 = HardyIndex(1.0, grid.dim)
    small = norms_for(idx1, r_small)
    for T, v in zip(Ts, small):
        rows.append(["data", 1.0, r_small, T, v, "", "", "", ""])
    variation = float((small.max() - small.min()) / small.min())
    rows.append(["variation", 1.0, r_small, "", variation, "", "", "", ""])
    return rows


def run_E3_atom_image(cfg: ExperimentConfig) -> list[list]:
    """Apply a catalog operator to atoms across the r-ladder; report both
    pre-molecule size ratios and the windowed moment decay of the images."""
    grid = cfg.grid
    T_op = _operator_from_cfg(cfg)
    p = cfg.source.get_number("scenario", "p", default=1.0)
    s = cfg.source.get_number("scenario", "s", default=2.0)
    lam = cfg.source.get_number("scenario", "lambda", default=2.0)
    C = cfg.source.get_number("scenario", "C", default=1.0)
    n_seeds = cfg.source.get_int("scenario", "n_seeds", default=3)
    idx = HardyIndex(p, grid.dim)
    ladder = cfg.ladder(default="2^-2,2^-3,2^-4,2^-5")
    mol = MollifierSpec("gaussian", grid.dim)
    scales = ScaleGrid.default(grid, 1.0)
    alphas = multiindices(grid.dim, idx.N_p)
    rows = []
    for r in ladder:
        ball = Ball((0.0,) * grid.dim, r)
        for seed in range(n_seeds):
            a = make_atom(AtomSpec(idx, s, ball, "local"), cfg.seed + seed, grid)
            Ta = T_op.apply(a)
            rep = validate_premolecule(Ta, PreMoleculeSpec(idx, s, lam, C, ball))
            best = min_premolecule_constant(Ta, idx, s, lam, ball)
            hp = hp_norm(Ta, idx, mol, scales)
            W = max(8.0 * r, 1.0)
            window = smooth_window(grid, ball.center, W)
            for alpha in alphas:
                critical = idx.critical and order(alpha) == idx.N_p
                bound = float(np.log1p(1.0 / r) ** (-1.0 / p)) if critical else 1.0
                pairing = abs(integrate(Ta * window * monomial_field(grid, ball.center, alpha)))
                rows.append([T_op.name, p, s, lam, r, seed, _alpha_str(alpha),
                             rep.m1_ratio, rep.m2_ratio, best, pairing, bound,
                             pairing / (hp * bound) if hp > 0 else float("inf")])
    rows.sort(key=lambda row: (-row[4], row[5], row[6]))
    return rows


def run_E4_cancellation(cfg: ExperimentConfig) -> tuple[list[list], dict]:
    """Cancellation ratios across the r-ladder, plus an SVG overlaying the
    measured oscillation with the decay modulus."""
    grid = cfg.grid
    T_op = _operator_from_cfg(cfg)
    p = cfg.source.get_number("scenario", "p", default=1.0)
    idx = HardyIndex(p, grid.dim)
    alphas = parse_alpha_list(cfg.source.get("scenario", "alphas", default="0"))
    ladder = cfg.ladder(default="2^-2,2^-3,2^-4,2^-5,2^-6")
    check_dual = cfg.source.get_bool("scenario", "check_duality", default=True)
    balls = [Ball((0.0,) * grid.dim, r) for r in ladder]
    report = cancellation_test(T_op, idx, balls, alphas, grid, check_duality=check_dual)
    rows = []
    for row in report.rows:
        rows.append([T_op.name, p, _alpha_str(row.alpha), row.ball.radius,
                     row.oscillation, row.psi_value, row.ratio, row.window_radius,
                     row.window_sensitivity, row.dual_gap])
    rows.sort(key=lambda row: (row[2], -row[3]))

    series = []
    for alpha in alphas:
        sub = [r for r in report.rows if r.alpha == tuple(alpha)]
        rs = [r.ball.radius for r in sub]
        series.append(Series(f"oscillation a={_alpha_str(alpha)}", rs,
                             [r.oscillation for r in sub]))
        series.append(Series(f"psi a={_alpha_str(alpha)}", rs,
                             [r.psi_value for r in sub], dashed=True))
        series.append(Series(f"ratio a={_alpha_str(alpha)}", rs,
                             [r.ratio for r in sub]))
    extras = {"series": series, "title": f"cancellation: {T_op.name} (p={p:g})"}
    return rows, extras


def run_E5_duality(cfg: ExperimentConfig) -> list[list]:
    """Dual-norm probes: deterministic mode certifies the identity, random
    mode gives the Monte-Carlo lower bound."""
    grid = cfg.grid
    n_instances = cfg.source.get_int("scenario", "n_instances", default=10)
    trials = cfg.source.get_int("scenario", "trials", default=500)
    degree = cfg.source.get_int("scenario", "degree", default=1)
    mode = cfg.source.get("scenario", "mode", default="both")
    if mode not in ("both", "deterministic", "random"):
        raise ConfigError(f"{cfg.source.path}: bad mode {mode!r}")
    r_values = parse_number_list(cfg.source.get("scenario", "r_values", default="0.3, 0.5"))
    rows = []
    for i in range(n_instances):
        r = r_values[i % len(r_values)]
        ball = Ball((0.0,) * grid.dim, r)
        rng = np.random.default_rng([cfg.seed, 51, i])
        f = GridFunction(grid, _smooth_noise_on_ball(grid, ball, rng))
        if mode in ("both", "deterministic"):
            lhs, rhs = dual_norm_check(f, ball, degree, trials=0, seed=cfg.seed + i,
                                       include_deterministic=True)
            rows.append(["deterministic", i, r, 0, lhs, rhs, abs(lhs - rhs),
                         lhs / rhs if rhs > 0 else 1.0])
        if mode in ("both", "random"):
            lhs, rhs = dual_norm_check(f, ball, degree, trials=trials, seed=cfg.seed + i,
                                       include_deterministic=False)
            rows.append(["random", i, r, trials, lhs, rhs, abs(lhs - rhs),
                         lhs / rhs if rhs > 0 else 1.0])
    rows.sort(key=lambda row: (row[0], row[1]))
    return rows


# ---------------------------------------------------------------------------


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    start = time.perf_counter()
    extras: dict = {}
    if cfg.scenario == "E1-moment-decay":
        rows = run_E1_moment_decay(cfg)
    elif cfg.scenario == "E2-grand-maximal-constant":
        rows = run_E2_grand_maximal_constant(cfg)
    elif cfg.scenario == "E3-atom-image":
        rows = run_E3_atom_image(cfg)
    elif cfg.scenario == "E4-cancellation":
        rows, extras = run_E4_cancellation(cfg)
    elif cfg.scenario == "E5-duality":
        rows = run_E5_duality(cfg)
    else:
        raise ConfigError(f"unknown scenario {cfg.scenario!r}")
    runtime = time.perf_counter() - start

    tag = cfg.source.get("scenario", "tag", default=None)
    if tag is None:
        op = cfg.source.get("scenario", "operator", default=None)
        tag = cfg.scenario if op is None else f"{cfg.scenario}-{op}"
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = cfg.out_dir / f"{tag}.csv"
    write_csv(csv_path, SCHEMAS[cfg.scenario], rows)

    svg_paths = []
    if extras.get("series") and cfg.source.get_bool("scenario", "svg", default=True):
        svg_path = cfg.out_dir / f"{tag}.svg"
        line_chart(svg_path, extras["title"], extras["series"], xlabel="r",
                   ylabel="value", logx=True, logy=True)
        svg_paths.append(svg_path)

    meta_path = cfg.out_dir / f"{tag}.meta.txt"
    with open(meta_path, "w") as fh:
        fh.write(f"scenario={cfg.scenario}\nconfig={cfg.source.path}\nseed={cfg.seed}\n"
                 f"grid: dim={cfg.grid.dim} m={cfg.grid.points_per_axis} "
                 f"L={cfg.grid.half_width!r}\nruntime_seconds={runtime:.3f}\n"
                 f"rows={len(rows)}\n")
    if not cfg.quiet:
        print(f"{cfg.scenario}: {len(rows)} rows -> {csv_path} "
              f"({runtime:.2f}s)", file=sys.stderr)
    return RunResult(cfg.scenario, csv_path, svg_paths, rows, runtime)
