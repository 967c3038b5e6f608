"""Command-line front end: dual/nested solves, two-cell curves, rate-region
boundaries, and the Monte-Carlo experiments, all emitting CSV/JSON plus a
reproducibility manifest.

Exit codes: 0 success, 2 unreadable or invalid config, 3 infeasible targets,
4 a two-cell command was given a config with L != 2.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .dual_solver import solve_dual, verify_kkt
from .finite_mc import run_avg_rate_region, run_convergence, run_rate_cdf
from .model_core import (ConfigError, ConvergenceError, DimensionExhaustedError,
                         InfeasibleError, SystemConfig, validate_config)
from .power_alloc import nested_solve, solve_bs_powers
from .rate_region import sweep_boundary
from .two_cell import solve_two_cell, two_cell_curves

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_NOT_TWO_CELL = 4


def _fmt(x: float) -> str:
    """Floats with 17 significant digits: byte-stable and round-trip exact."""
    return format(float(x), ".17g")


def _write_csv(path: str, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if isinstance(v, float) else str(v)
                              for v in row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_json(path: str, doc: dict) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _manifest(path: str, cfg: SystemConfig, args: dict) -> None:
    doc = {
        "version": __version__,
        "config_sha256": cfg.content_hash(),
        "config": cfg.to_dict(),
        "args": args,
    }
    _write_json(path, doc)


def _load_config(path: str) -> SystemConfig:
    cfg = SystemConfig.from_json(path)
    result = validate_config(cfg)
    if not result.ok:
        raise ConfigError("invalid config: " + "; ".join(result.violations))
    return cfg


def cmd_solve_dual(args) -> int:
    cfg = _load_config(args.config)
    sol = nested_solve(cfg)
    top = sol.levels[0].dual
    doc = {"dual": top.to_dict(), "nested": sol.to_dict(), "phi": sol.phi}
    _write_json(args.out, doc)
    _manifest(args.out + ".manifest.json", cfg, {"command": "solve-dual"})
    print(f"objective {_fmt(top.objective)}  phi {_fmt(sol.phi)}")
    print(f"selfish {list(top.selfish)}  altruistic {list(top.altruistic)}")
    return EXIT_OK


def cmd_two_cell(args) -> int:
    cfg = _load_config(args.config)
    if cfg.L != 2:
        print(f"two-cell command needs L = 2, got L = {cfg.L}", file=sys.stderr)
        return EXIT_NOT_TWO_CELL
    sol = solve_two_cell(cfg)
    _write_json(args.out, sol.to_dict())
    curves = two_cell_curves(cfg)
    rows = curves.sample_rows(args.grid)
    _write_csv(args.out_csv, ["rho", "g1", "g2", "h"], rows)
    _manifest(args.out + ".manifest.json", cfg,
              {"command": "two-cell", "grid": args.grid})
    print(f"case {sol.case_tag.value}  rho* "
          f"{'inf' if np.isinf(sol.rho_star) else _fmt(sol.rho_star)}")
    return EXIT_OK


def cmd_rate_region(args) -> int:
    cfg = _load_config(args.config)
    rows = sweep_boundary(cfg, args.alpha_points)
    header = ([f"alpha_{k+1}" for k in range(cfg.L)] + ["r_star"]
              + [f"rate_{k+1}" for k in range(cfg.L)])
    _write_csv(args.out, header, rows)
    _manifest(args.out + ".manifest.json", cfg,
              {"command": "rate-region", "alpha_points": args.alpha_points})
    print(f"wrote {len(rows)} boundary points to {args.out}")
    return EXIT_OK


def cmd_monte_carlo(args) -> int:
    cfg = _load_config(args.config)
    nt_list = [int(x) for x in args.nt.split(",")]
    meta = {
        "command": "monte-carlo", "experiment": args.experiment,
        "mode": args.mode, "nt": nt_list, "draws": args.draws,
        "seed": args.seed, "alpha_points": args.alpha_points,
        "alpha": args.alpha, "users": args.users,
    }
    if args.draws == 0:
        print("warning: --draws 0 produces an empty table", file=sys.stderr)
        _write_csv(args.out, _mc_header(args.experiment, cfg), [])
        _manifest(args.out + ".manifest.json", cfg, meta)
        return EXIT_OK

    if args.experiment == "region":
        users = [int(x) for x in args.users.split(",")]
        mode = {"finite_opt": "finite_opt", "ls": "ls", "pc": "pc"}[args.mode]
        rows = run_avg_rate_region(cfg, nt_list[0], users, args.draws,
                                   args.alpha_points, mode, args.seed)
    elif args.experiment == "cdf":
        alpha = [float(x) for x in args.alpha.split(",")]
        tables = run_rate_cdf(cfg, alpha, nt_list, args.draws, args.seed)
        rows = [(nt, r, p) for nt in nt_list for (r, p) in tables[nt]]
    else:  # convergence
        stats = run_convergence(cfg, nt_list, args.draws, args.seed)
        rows = [(s["Nt"], s["mean_sinr_err"], s["mean_power_err"]) for s in stats]
    _write_csv(args.out, _mc_header(args.experiment, cfg), rows)
    _manifest(args.out + ".manifest.json", cfg, meta)
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def _mc_header(experiment: str, cfg: SystemConfig):
    if experiment == "region":
        return ["alpha_1", "mean_rate_1", "mean_rate_2"]
    if experiment == "cdf":
        return ["Nt", "rate", "prob"]
    return ["Nt", "mean_sinr_err", "mean_power_err"]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="minmaxbeam",
        description="Min-max fair coordinated beamforming: large-system solves "
                    "and finite-system Monte-Carlo validation")
    sub = p.add_subparsers(dest="command", required=True)

    sd = sub.add_parser("solve-dual", help="nested dual solve of a config")
    sd.add_argument("config")
    sd.add_argument("--out", default="dual_solution.json")
    sd.set_defaults(func=cmd_solve_dual)

    tc = sub.add_parser("two-cell", help="closed-form two-cell solution + curves")
    tc.add_argument("config")
    tc.add_argument("--out", default="two_cell_solution.json")
    tc.add_argument("--out-csv", default="two_cell_curves.csv")
    tc.add_argument("--grid", type=int, default=200)
    tc.set_defaults(func=cmd_two_cell)

    rr = sub.add_parser("rate-region", help="large-system rate-region boundary")
    rr.add_argument("config")
    rr.add_argument("--alpha-points", type=int, default=21)
    rr.add_argument("--out", default="rate_region.csv")
    rr.set_defaults(func=cmd_rate_region)

    mc = sub.add_parser("monte-carlo", help="finite-system experiments")
    mc.add_argument("config")
    mc.add_argument("--experiment", choices=["region", "cdf", "convergence"],
                    default="region")
    mc.add_argument("--mode", choices=["finite_opt", "ls", "pc"],
                    default="finite_opt")
    mc.add_argument("--nt", default="4", help="antenna counts, comma separated")
    mc.add_argument("--users", default="2,3", help="users per cell (region mode)")
    mc.add_argument("--draws", type=int, default=100)
    mc.add_argument("--seed", type=int, default=0)
    mc.add_argument("--alpha-points", type=int, default=11)
    mc.add_argument("--alpha", default="0.5,0.5", help="profile for the cdf experiment")
    mc.add_argument("--out", default="monte_carlo.csv")
    mc.set_defaults(func=cmd_monte_carlo)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"config not readable: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"{exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InfeasibleError, DimensionExhaustedError) as exc:
        print(f"{exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ConvergenceError as exc:
        print(f"did not converge: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
