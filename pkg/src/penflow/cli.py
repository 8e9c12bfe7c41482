"""Command-line orchestration and CSV artifact emission.

Subcommands:

* ``solve``     one control solve; writes the trace table
* ``mc``        Monte Carlo undersupply study; writes study tables
* ``figures``   full case-study matrix (alpha in {1, 3} x {cm1, cm2}) on one
                seed; writes figure-ready CSVs (traces, counts, bands)
* ``selfcheck`` oracle cross-checks; nonzero exit on failure

Exit codes: 0 success, 1 validation error, 2 solver failure, 3 I/O failure.
Failures emit a machine-readable JSON record on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, apply_overrides, build_config
from .control import SolveResult, solve_cm1, solve_cm2
from .demand import simulate_path
from .errors import SolverError, ValidationError
from .csvio import CSVTable, from_arrays, write_csv
from .gaussian import inv_cdf
from .montecarlo import MCConfig, MCStudy, band_data, run_study
from .selfcheck import run_selfchecks

#: Penalty intensities of the case-study figure matrix.
FIGURE_ALPHAS = (1.0, 3.0)
#: Substream index of the single realized path shown in trace/band artifacts.
FIGURE_STREAM = 0


def _alpha_tag(alpha: float) -> str:
    if float(alpha).is_integer():
        return f"alpha{int(alpha)}"
    return "alpha" + repr(float(alpha)).replace(".", "p").replace("-", "m")


def _level_tag(q: float) -> str:
    return repr(float(q)).replace("-", "m")


def _trace_table(cfg: RunConfig, res: SolveResult, levels) -> CSVTable:
    u_feed = np.array([res.schedule.value_at(t - 1.0 / cfg.grid.lam)
                       for t in res.node_times])
    cols = ["t", "u", "y", "mean_demand"]
    arrays = [res.node_times, u_feed, res.output_trace,
              np.array([l.mean for l in res.node_laws])]
    for q in levels:
        z = inv_cdf(0.5 * (1.0 + q))
        sd = np.sqrt(np.array([l.variance for l in res.node_laws]))
        means = np.array([l.mean for l in res.node_laws])
        cols += [f"band_lo_{_level_tag(q)}", f"band_hi_{_level_tag(q)}"]
        arrays += [means - z * sd, means + z * sd]
    return from_arrays("trace.v1 output nodes with feeding control, conditional mean "
                       "and bands", cols, arrays)


def _undersupply_table(study: MCStudy) -> CSVTable:
    return from_arrays("undersupply.v1 per-node exceedance count and mean shortfall",
                       ("t", "count", "avg_undersupply"),
                       (study.times, study.undersupply_count, study.avg_undersupply))


def _quantile_table(study: MCStudy) -> CSVTable:
    cols = ["t"] + [f"q_{_level_tag(q)}" for q in study.quantile_levels]
    arrays = [study.times] + [study.band_quantiles[i]
                              for i in range(len(study.quantile_levels))]
    return from_arrays("ensemble_quantiles.v1 per-node demand quantiles",
                       cols, arrays)


def _band_table(cfg: RunConfig, path) -> CSVTable:
    bands = band_data(cfg.ou, path, cfg.updates, cfg.band_levels)
    cols = ["t", "path", "updated_mean"]
    arrays = [bands.times, path.values, bands.center]
    for i, q in enumerate(bands.levels):
        cols += [f"band_lo_{_level_tag(q)}", f"band_hi_{_level_tag(q)}"]
        arrays += [bands.lower[i], bands.upper[i]]
    return from_arrays("bands.v1 re-conditioned demand bands along one realized path",
                       cols, arrays)


def _figure_path(cfg: RunConfig):
    return simulate_path(cfg.ou, cfg.grid.times(), cfg.ou.y0, cfg.mc.seed,
                         stream=FIGURE_STREAM)


def _solve_for_policy(cfg: RunConfig, policy: str) -> SolveResult:
    if policy == "cm1":
        return solve_cm1(cfg.ou, cfg.pen, cfg.horizon, cfg.grid, cfg.bounds)
    return solve_cm2(cfg.ou, cfg.pen, cfg.horizon, cfg.grid, cfg.bounds,
                     cfg.updates, _figure_path(cfg))


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_solve(cfg: RunConfig) -> int:
    res = _solve_for_policy(cfg, cfg.mc.policy)
    out = _out_dir(cfg)
    name = f"trace_{cfg.mc.policy}_{_alpha_tag(cfg.pen.alpha)}_seed{cfg.mc.seed}.csv"
    write_csv(_trace_table(cfg, res, cfg.band_levels), out / name)
    d = res.diagnostics
    print(f"solve [{cfg.mc.policy}, {_alpha_tag(cfg.pen.alpha)}]: objective "
          f"{res.objective_value:.12g}, {d.method} iterations {d.iterations}, "
          f"grad norm {d.grad_norm:.3e}, converged {d.converged}")
    print(f"wrote {out / name}")
    return 0


def _cmd_mc(cfg: RunConfig) -> int:
    study = run_study(cfg.ou, cfg.pen, cfg.horizon, cfg.grid, cfg.mc, cfg.bounds)
    out = _out_dir(cfg)
    tag = f"{cfg.mc.policy}_{_alpha_tag(cfg.pen.alpha)}_seed{cfg.mc.seed}"
    files = {f"undersupply_{tag}.csv": _undersupply_table(study),
             f"quantiles_{tag}.csv": _quantile_table(study)}
    for name, table in files.items():
        write_csv(table, out / name)
        print(f"wrote {out / name}")
    print(f"mc [{cfg.mc.policy}, {_alpha_tag(cfg.pen.alpha)}]: {study.n_paths} paths, "
          f"summed undersupply count {int(study.undersupply_count.sum())}, "
          f"mean per-path loss {study.per_path_objective_mean:.12g}")
    return 0


def _cmd_figures(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    written = []
    band_name = f"bands_seed{cfg.mc.seed}.csv"
    write_csv(_band_table(cfg, _figure_path(cfg)), out / band_name)
    written.append(band_name)
    for alpha in FIGURE_ALPHAS:
        cfg_a = RunConfig(ou=cfg.ou, grid=cfg.grid, horizon=cfg.horizon,
                          pen=type(cfg.pen)(alpha), bounds=cfg.bounds,
                          updates=cfg.updates, mc=cfg.mc,
                          band_levels=cfg.band_levels, out_dir=cfg.out_dir)
        for policy in ("cm1", "cm2"):
            res = _solve_for_policy(cfg_a, policy)
            trace_name = f"trace_{policy}_{_alpha_tag(alpha)}_seed{cfg.mc.seed}.csv"
            write_csv(_trace_table(cfg_a, res, cfg.band_levels), out / trace_name)
            mc_cfg = MCConfig(seed=cfg.mc.seed, n_paths=cfg.mc.n_paths, policy=policy,
                              updates=cfg.updates,
                              quantile_levels=cfg.mc.quantile_levels)
            study = run_study(cfg_a.ou, cfg_a.pen, cfg_a.horizon, cfg_a.grid,
                              mc_cfg, cfg_a.bounds)
            us_name = f"undersupply_{policy}_{_alpha_tag(alpha)}_seed{cfg.mc.seed}.csv"
            write_csv(_undersupply_table(study), out / us_name)
            written += [trace_name, us_name]
            print(f"figures [{policy}, {_alpha_tag(alpha)}]: summed undersupply count "
                  f"{int(study.undersupply_count.sum())}, max avg undersupply "
                  f"{study.avg_undersupply.max():.6g}")
    for name in written:
        print(f"wrote {out / name}")
    return 0


def _cmd_selfcheck(cfg: RunConfig) -> int:
    results = run_selfchecks(cfg)
    for r in results:
        print(f"selfcheck {r.name}: {'PASS' if r.passed else 'FAIL'} ({r.detail})")
    if all(r.passed for r in results):
        print(f"selfcheck: all {len(results)} checks passed")
        return 0
    raise SolverError("one or more self-checks failed")


_COMMANDS = {"solve": _cmd_solve, "mc": _cmd_mc, "figures": _cmd_figures,
             "selfcheck": _cmd_selfcheck}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="penflow",
        description="Inflow control of a transport line under uncertain demand "
                    "with an undersupply penalty")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (("solve", "solve one control problem and write the trace table"),
                      ("mc", "run the Monte Carlo undersupply study"),
                      ("figures", "run the full case-study matrix and write figure data"),
                      ("selfcheck", "run the built-in oracle cross-checks")):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--config", required=True, help="path to the JSON configuration")
        p.add_argument("--out", help="output directory (overrides output.directory)")
        p.add_argument("--seed", type=int, help="ensemble seed (overrides mc.seed)")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="configuration override, e.g. penalty.alpha=3")
    return parser


def run_command(command: str, cfg: RunConfig) -> int:
    """Dispatch one validated configuration to a subcommand."""
    return _COMMANDS[command](cfg)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ValidationError(f"cannot read configuration {args.config}: {exc}") from exc
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"configuration is not valid JSON: {exc}") from exc
        overrides = list(args.override)
        if args.seed is not None:
            overrides.append(f"mc.seed={args.seed}")
        if args.out is not None:
            overrides.append(f"output.directory={json.dumps(args.out)}")
        cfg = build_config(apply_overrides(doc, overrides))
        for key, value in cfg.defaulted():
            print(f"config {key} = {value!r} (default)")
        return run_command(args.command, cfg)
    except ValidationError as exc:
        _emit_error("validation", exc)
        return 1
    except SolverError as exc:
        _emit_error("solver", exc)
        return 2
    except OSError as exc:
        _emit_error("io", exc)
        return 3


def _emit_error(kind: str, exc: Exception) -> None:
    print(json.dumps({"error": kind, "detail": str(exc)}), file=sys.stderr)


def entrypoint() -> None:
    raise SystemExit(main())
