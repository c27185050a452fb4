"""``hetero-hopf`` command-line front end.

Subcommands share one configuration document (see :mod:`hetero_hopf.config`)
and write deterministic files named ``<output.dir>/<command>-<hash>.<ext>``,
where the hash covers the fully resolved configuration. Each data file gets a
``.meta.json`` sidecar carrying the schema version and the resolved config.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 sweep
finished with at least one failed cell.
"""

from __future__ import annotations

import argparse
import csv
import functools
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import odesim, pdesim, reduced
from .config import RunConfig, build_config, load_config, range_values
from .errors import ConfigError, HeteroHopfError, NoRoot, NumericalError
from .expr import ExprError, load_profile
from .quad import QuadRule

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_PARTIAL = 0, 2, 3, 4

SWEEP_COLUMNS = [
    "alpha", "l", "tilde_l", "c0", "q0", "S", "trace", "det",
    "re_mu_over_lambda", "im_mu_over_lambda", "classification", "l0",
]
HOPF_COLUMNS = [
    "lambda", "l_lambda", "re_mu", "im_mu", "nu_over_lambda",
    "transversality", "l0", "nu0", "transversality_limit",
]
SERIES_COLUMNS = ["t", "mean_u", "mean_v", "max_v"]


def fmt(value) -> str:
    """17 significant digits; ``NA`` for missing or non-finite values."""
    if value is None:
        return "NA"
    if isinstance(value, str):
        return value
    value = float(value)
    if not math.isfinite(value):
        return "NA"
    return f"{value:.17g}"


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")  # RFC 4180 line endings
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def _json_value(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_json(path: Path, payload) -> None:
    clean = {k: _json_value(v) for k, v in payload.items()}
    path.write_text(json.dumps(clean, indent=2, sort_keys=True) + "\n", encoding="utf-8")


@dataclass
class Context:
    config: RunConfig
    command: str

    @property
    def out_dir(self) -> Path:
        path = Path(self.config["output.dir"])
        path.mkdir(parents=True, exist_ok=True)
        return path

    def path(self, suffix: str) -> Path:
        return self.out_dir / f"{self.command}-{self.config.digest()}{suffix}"

    def write_meta(self, files) -> None:
        write_json(self.path(".meta.json"), {
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "files": [Path(f).name for f in files],
            "config": self.config.values,
        })


@functools.lru_cache(maxsize=16)
def _profile(source: str, allow_constant: bool):
    return load_profile(source, allow_constant=allow_constant)


def profile_of(config: RunConfig):
    return _profile(config["m"], config["allow_constant"])


def rule_of(config: RunConfig) -> QuadRule:
    return QuadRule(config["quad.panels"], config["quad.points_per_panel"])


# --- analyze ----------------------------------------------------------------


def analyze_report(config: RunConfig) -> dict:
    profile, rule = profile_of(config), rule_of(config)
    alpha, r = config["alpha"], config["r"]
    star = reduced.find_alpha_star(profile, rule)
    hopf = reduced.find_hopf(profile, alpha, r, rule)
    report = {
        "schema_version": SCHEMA_VERSION,
        "m": config["m"],
        "alpha": alpha,
        "r": r,
        "tilde_c": reduced.tilde_c(profile, alpha, rule),
        "tilde_l": reduced.tilde_l(profile, alpha, r, rule),
        "V": reduced.V_alpha(profile, alpha, rule),
        "T": reduced.big_T(profile, alpha, rule),
        "alpha_star": star.value if star.kind == "crossing" else star.kind,
        "H": reduced.H_indicator(profile, rule),
        "l0": None, "nu0": None, "period": None, "c0_at_l0": None, "q0_at_l0": None,
        "delta0": None, "s20": None, "adj_delta0": None, "adj_s20": None,
        "transversality": None,
    }
    if hopf is not None:
        report.update(
            l0=hopf.l0, nu0=hopf.nu0, period=hopf.period, c0_at_l0=hopf.c0_at_l0,
            q0_at_l0=hopf.q0_at_l0, delta0=hopf.delta0, s20=hopf.s20,
            adj_delta0=hopf.adj_delta0, adj_s20=hopf.adj_s20,
            transversality=hopf.transversality,
        )
    return report


def cmd_analyze(ctx: Context, jobs: int) -> int:
    report = analyze_report(ctx.config)
    path = ctx.path(".json")
    write_json(path, report)
    ctx.write_meta([path])
    print(json.dumps({k: _json_value(v) for k, v in report.items()}, indent=2, sort_keys=True))
    return EXIT_OK


# --- sweep ------------------------------------------------------------------


def sweep_row(values: dict, alpha: float, l: float) -> list:
    """One SweepRow; numerical failures become classification ``error``."""
    config = RunConfig(values)
    profile, rule = profile_of(config), rule_of(config)
    r = config["r"]
    row = {c: None for c in SWEEP_COLUMNS}
    row.update(alpha=alpha, l=l)
    try:
        row["tilde_l"] = reduced.tilde_l(profile, alpha, r, rule)
        hopf = reduced.find_hopf(profile, alpha, r, rule)
        row["l0"] = hopf.l0 if hopf is not None else None
        if l <= r:
            row["classification"] = "NoCoexistence"
        else:
            eq = reduced.solve_c0l(profile, alpha, r, l, rule)
            row["c0"], row["q0"] = eq.c0, eq.q0
            if not eq.coexistence:
                row["classification"] = "NoCoexistence"
            else:
                report = reduced.reduced_jacobian(profile, alpha, r, l, rule)
                mu = max(report.eigenvalues, key=lambda z: (z.real, z.imag))
                row.update(
                    S=reduced.S_of_l(profile, alpha, r, l, rule),
                    trace=report.trace, det=report.det,
                    re_mu_over_lambda=mu.real, im_mu_over_lambda=abs(mu.imag),
                    classification=report.classification.value,
                )
    except (NumericalError, ArithmeticError, ValueError):
        row = {c: None for c in SWEEP_COLUMNS}
        row.update(alpha=alpha, l=l, classification="error")
    return [row[c] for c in SWEEP_COLUMNS]


def _sweep_cell(args):
    return sweep_row(*args)


GNUPLOT_TEMPLATE = """\
# Two-parameter stability map of the reduced system.
set datafile separator ","
set datafile missing "NA"
set key outside
set xlabel "alpha"
set ylabel "l"
set title "trace of the reduced Jacobian (sign marks stability)"
set palette defined (-1 "blue", 0 "white", 1 "red")
set cbrange [-1:1]
plot "{csv}" using 1:2:(sgn($7)) with points pt 5 ps 1.5 palette title "sign(trace)", \\
     "{csv}" using 1:3 with lines lw 2 title "tilde l", \\
     "{csv}" using 1:12 with lines lw 2 dt 2 title "l0"
"""


def cmd_sweep(ctx: Context, jobs: int) -> int:
    config = ctx.config
    alphas = range_values(config.get("alpha_range", (config["alpha"], config["alpha"], 1)))
    ls = range_values(config.get("l_range", (config["l"], config["l"], 1)))
    cells = [(config.values, a, l) for a in alphas for l in ls]  # lexicographic (alpha, l)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_cell, cells, chunksize=max(1, len(cells) // (4 * jobs))))
    else:
        rows = [_sweep_cell(c) for c in cells]
    path = ctx.path(".csv")
    write_csv(path, SWEEP_COLUMNS, rows)
    script = ctx.path(".gp")
    script.write_text(GNUPLOT_TEMPLATE.format(csv=path.name), encoding="utf-8")
    ctx.write_meta([path, script])
    failed = sum(1 for row in rows if row[SWEEP_COLUMNS.index("classification")] == "error")
    print(f"{len(rows)} rows written to {path} ({failed} failed)")
    return EXIT_PARTIAL if failed else EXIT_OK


# --- ode-sim ----------------------------------------------------------------


def _ode_initial(config, profile, rule):
    alpha, r, l = config["alpha"], config["r"], config["l"]
    u0, v0 = config.get("ode.u0"), config.get("ode.v0")
    if u0 is None or v0 is None:
        # default: 10% off the coexistence equilibrium, or the prey-only level
        if l > r:
            eq = reduced.solve_c0l(profile, alpha, r, l, rule)
            guess = (1.1 * eq.c0, max(eq.q0, 1e-3)) if eq.coexistence else (eq.c0, 1.0)
        else:
            guess = (reduced.tilde_c(profile, alpha, rule), 1.0)
        u0 = guess[0] if u0 is None else u0
        v0 = guess[1] if v0 is None else v0
    if u0 < 0 or v0 < 0:
        raise ConfigError("initial state must be nonnegative", key="ode.u0")
    return odesim.OdeState(u0, v0)


def cmd_ode_sim(ctx: Context, jobs: int) -> int:
    config = ctx.config
    profile, rule = profile_of(config), rule_of(config)
    alpha, r, l = config["alpha"], config["r"], config["l"]
    hopf = reduced.find_hopf(profile, alpha, r, rule)
    dt = config.get("ode.dt") or odesim.default_dt(r, hopf.nu0 if hopf else None)
    traj = odesim.integrate(_ode_initial(config, profile, rule), profile, alpha, r, l,
                            config["ode.t_end"], dt=dt, rule=rule)
    path = ctx.path(".csv")
    traj.to_csv(path)
    ctx.write_meta([path])
    summary = {"attractor": None, "amplitude": None, "period_estimate": None}
    if len(traj.t) >= 2000:
        s = odesim.classify(traj, hopf_distance=abs(l - hopf.l0) / hopf.l0 if hopf else None)
        summary = {"attractor": s.attractor.value, "amplitude": s.amplitude,
                   "period_estimate": s.period_estimate}
    summary.update(final_u=traj.final.u, final_v=traj.final.v, clamps=traj.clamp_count,
                   file=str(path))
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


# --- pde-sim ----------------------------------------------------------------


def cmd_pde_sim(ctx: Context, jobs: int) -> int:
    config = ctx.config
    profile, params = profile_of(config), config.params
    grid = pdesim.Grid1D(config["grid.n"], profile)
    u0 = config.get("pde.u0", reduced.tilde_c(profile, params.alpha, rule_of(config)))
    v0 = config.get("pde.v0", 1.0)
    bump = 1.0 + config["pde.perturbation"] * np.cos(np.pi * grid.x)
    state = pdesim.FieldPair(u0 * bump, v0 * bump)
    method = config["pde.method"]
    limit = pdesim.stable_dt(grid, params)
    dt = config.get("pde.dt") or (pdesim.IMEX_DT_FACTOR * limit if method == "imex" else limit)
    traj = pdesim.time_step(state, grid, params, dt, config["pde.t_end"], method=method)
    snapshot, series = ctx.path(".csv"), ctx.path("-series.csv")
    traj.final.to_csv(snapshot, grid)
    write_csv(series, SERIES_COLUMNS,
              zip(traj.t, traj.mean_u(), traj.mean_v(), traj.v.max(axis=1)))
    ctx.write_meta([snapshot, series])
    mean_v = traj.mean_v()
    tail = mean_v[len(mean_v) // 2:]
    print(json.dumps({
        "final_max_v": float(traj.v[-1].max()),
        "final_min_u": float(traj.u[-1].min()),
        "mean_v_amplitude": float(np.ptp(tail)),
        "dt": dt, "method": method, "file": str(snapshot),
    }, indent=2, sort_keys=True))
    return EXIT_OK


# --- spectrum ---------------------------------------------------------------


def cmd_spectrum(ctx: Context, jobs: int) -> int:
    config = ctx.config
    profile, params = profile_of(config), config.params
    grid = pdesim.Grid1D(config["grid.n"], profile)
    note = "positive steady state"
    if params.lam > 0:
        steady = pdesim.newton_steady_state(grid, params).state
    else:
        # λ = 0 decouples reaction; linearize at the constant reduced equilibrium
        try:
            eq = reduced.solve_c0l(profile, params.alpha, params.r, params.l, rule_of(config))
            steady = pdesim.FieldPair.constant(grid, eq.c0, eq.q0)
        except NoRoot:
            steady = pdesim.FieldPair.constant(grid, reduced.tilde_c(profile, params.alpha), 0.0)
        note = "constant state (lambda = 0)"
    report = pdesim.spectrum(steady, grid, params)
    path = ctx.path(".csv")
    report.to_csv(path)
    ctx.write_meta([path])
    summary = {
        "linearized_at": note,
        "stability": report.stability.value,
        "rightmost_re": report.rightmost_pair.real,
        "rightmost_im": report.rightmost_pair.imag,
        "file": str(path),
    }
    if params.lam > 0:
        summary.update(
            rightmost_re_over_lambda=report.rightmost_over_lambda.real,
            rightmost_im_over_lambda=report.rightmost_over_lambda.imag,
        )
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


# --- hopf -------------------------------------------------------------------


def cmd_hopf(ctx: Context, jobs: int) -> int:
    config = ctx.config
    profile, params, rule = profile_of(config), config.params, rule_of(config)
    grid = pdesim.Grid1D(config["grid.n"], profile)
    eps = config["hopf.eps"]
    lo = config.get("hopf.l_min", reduced.tilde_l(profile, params.alpha, params.r, rule) + eps)
    hi = config.get("hopf.l_max", 1.0 / eps)
    limit = reduced.find_hopf(profile, params.alpha, params.r, rule)
    rows = []
    for lam in config.get("hopf.lambdas", (params.lam,)):
        point = pdesim.find_l_lambda(grid, params.with_lam(lam), bracket=(lo, hi))
        rows.append([
            lam, point.l_lambda, point.mu.real, point.mu.imag, point.nu_over_lambda,
            point.transversality,
            limit.l0 if limit else None, limit.nu0 if limit else None,
            limit.transversality if limit else None,
        ])
    path = ctx.path(".csv")
    write_csv(path, HOPF_COLUMNS, rows)
    ctx.write_meta([path])
    for row in rows:
        print(",".join(fmt(v) for v in row[:2]))
    return EXIT_OK


COMMANDS = {
    "analyze": cmd_analyze,
    "sweep": cmd_sweep,
    "ode-sim": cmd_ode_sim,
    "pde-sim": cmd_pde_sim,
    "spectrum": cmd_spectrum,
    "hopf": cmd_hopf,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hetero-hopf", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="TOML configuration file")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override one configuration key")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        if args.config:
            config = load_config(args.config, args.overrides)
        else:
            config = build_config("", args.overrides)
        profile_of(config)
        return COMMANDS[args.command](Context(config, args.command), args.jobs)
    except (ConfigError, ExprError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HeteroHopfError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
