"""Command-line driver.

Commands
--------
solve      compute feedback/value coefficients, write them with a summary
simulate   solve, then run one closed- or open-loop simulation
table      per-degree value series and simulated cost (CSV + figure)
validate   run the built-in dense-oracle and invariant suites

Configuration comes from an optional JSON document (``--config``) merged
with command-line flags; flags win.  Exit codes: 0 success, 1 failed
validation, 2 solver error, 3 configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time

import numpy as np

from . import kron
from .albrekht import eval_value, pqr
from .errors import ConfigError, PqrError
from .models import BenchmarkInstance, burgers_fem, lorenz, vdp_ring
from .plots import render_table_figure, render_trajectory_figure
from .serialize import (
    _atomic_write_text,
    load_custom_system,
    save_coefficients,
    write_table_csv,
    write_trajectory_csv,
)
from .sim import closed_loop_cost, open_loop_cost
from .validate import run_all

EXIT_OK = 0
EXIT_VALIDATION_FAILED = 1
EXIT_SOLVER_ERROR = 2
EXIT_CONFIG_ERROR = 3

MAX_DEGREE = 8


@dataclasses.dataclass
class RunConfig:
    """Validated run parameters shared by all commands."""

    model: str = "lorenz"
    degree: int = 3
    horizon: float | None = None
    x0: list | None = None
    g: int = 4
    nodes: list = dataclasses.field(default_factory=lambda: [1, 2])
    y0: float = 0.3
    n_elements: int = 16
    eps: float = 0.005
    alpha: float = 0.3
    m: int = 3
    q_scale: float = 1.0
    r_scale: float = 1.0
    rtol: float = 1e-9
    atol: float = 1e-11
    out: str = "out"
    strict_paper_rhs: bool = False
    memory_budget: int = kron.DEFAULT_ENTRY_BUDGET
    system_file: str | None = None
    open_loop: bool = False
    seed: int = 1234

    def validate(self):
        if self.model not in ("lorenz", "vdp", "burgers", "custom"):
            raise ConfigError(f"unknown model {self.model!r}")
        if not (1 <= int(self.degree) <= MAX_DEGREE):
            raise ConfigError(f"degree must be in 1..{MAX_DEGREE}")
        if self.horizon is not None and not float(self.horizon) > 0:
            raise ConfigError("horizon must be positive")
        if not (float(self.rtol) > 0 and float(self.atol) > 0):
            raise ConfigError("tolerances must be positive")
        if int(self.memory_budget) <= 0:
            raise ConfigError("memory budget must be positive")
        if int(self.g) < 2:
            raise ConfigError("g must be at least 2")
        if not self.nodes:
            raise ConfigError("nodes must be nonempty")
        if int(self.n_elements) < 3:
            raise ConfigError("n_elements must be at least 3")
        if not float(self.eps) > 0:
            raise ConfigError("eps must be positive")
        if int(self.m) < 1:
            raise ConfigError("m must be at least 1")
        if float(self.q_scale) <= 0 or float(self.r_scale) <= 0:
            raise ConfigError("weight scales must be positive")
        if self.model == "custom" and not self.system_file:
            raise ConfigError("model=custom requires a system file")


_CONFIG_KEYS = {f.name for f in dataclasses.fields(RunConfig)}


def _parse_int_list(text: str):
    try:
        return [int(part) for part in str(text).split(",") if part != ""]
    except ValueError as exc:
        raise ConfigError(f"expected a comma-separated integer list, got {text!r}") from exc


def _parse_float_list(text: str):
    try:
        return [float(part) for part in str(text).split(",") if part != ""]
    except ValueError as exc:
        raise ConfigError(f"expected a comma-separated number list, got {text!r}") from exc


def build_config(args: argparse.Namespace) -> RunConfig:
    """Merge the optional config document with flag overrides (flags win)."""
    values: dict = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as handle:
                doc = json.load(handle)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config document must be a JSON object")
        unknown = set(doc) - _CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        values.update(doc)

    for key in _CONFIG_KEYS:
        flag_val = getattr(args, key, None)
        if flag_val is not None:
            values[key] = flag_val

    if isinstance(values.get("nodes"), str):
        values["nodes"] = _parse_int_list(values["nodes"])
    if isinstance(values.get("x0"), str):
        values["x0"] = _parse_float_list(values["x0"])

    try:
        cfg = RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    cfg.validate()
    return cfg


def make_instance(cfg: RunConfig) -> BenchmarkInstance:
    if cfg.model == "lorenz":
        inst = lorenz()
    elif cfg.model == "vdp":
        inst = vdp_ring(g=cfg.g, actuated_nodes=cfg.nodes, y0=cfg.y0,
                        q_scale=cfg.q_scale, r_scale=cfg.r_scale)
    elif cfg.model == "burgers":
        inst = burgers_fem(n_elements=cfg.n_elements, eps=cfg.eps,
                           alpha=cfg.alpha, m=cfg.m)
    else:
        inst = load_custom_system(cfg.system_file)
    if cfg.horizon is not None:
        inst = dataclasses.replace(inst, horizon=float(cfg.horizon))
    if cfg.x0 is not None:
        x0 = np.asarray(cfg.x0, dtype=float)
        if x0.size != inst.system.n:
            raise ConfigError(
                f"x0 override has length {x0.size}, model needs {inst.system.n}"
            )
        inst = dataclasses.replace(inst, x0=x0)
    return inst


def _solve(cfg: RunConfig, inst: BenchmarkInstance):
    info: dict = {}
    vf, law = pqr(inst.system, inst.cost, cfg.degree,
                  classical_rhs=cfg.strict_paper_rhs, info=info)
    return vf, law, info


def _summary_doc(cfg, inst, vf, law, info, total_seconds):
    return {
        "model": cfg.model,
        "label": inst.label,
        "n": inst.system.n,
        "m": inst.system.m,
        "degree": cfg.degree,
        "are_residual": info.get("are_residual"),
        "newton_residuals": info.get("newton_residuals"),
        "per_degree": info.get("degrees"),
        "value_coefficient_norms": {
            str(k): float(np.linalg.norm(vf.coefficients[k]))
            for k in sorted(vf.coefficients)
        },
        "gain_norms": {
            str(j): float(np.linalg.norm(law.coefficients[j]))
            for j in sorted(law.coefficients)
        },
        "total_seconds": total_seconds,
    }


def cmd_solve(cfg: RunConfig) -> int:
    inst = make_instance(cfg)
    t0 = time.perf_counter()
    vf, law, info = _solve(cfg, inst)
    total = time.perf_counter() - t0
    os.makedirs(cfg.out, exist_ok=True)
    coeff_path = os.path.join(cfg.out, "coefficients.json")
    save_coefficients(coeff_path, vf, law)
    summary = _summary_doc(cfg, inst, vf, law, info, total)
    _atomic_write_text(os.path.join(cfg.out, "summary.json"),
                       json.dumps(summary, indent=2))
    print(f"{inst.label}: n={inst.system.n} m={inst.system.m} degree={cfg.degree}")
    print(f"ARE residual: {info['are_residual']:.3e}")
    for entry in info["degrees"]:
        print(f"  degree {entry['degree']}: {entry['seconds']:.3f} s")
    print(f"coefficients written to {coeff_path}")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    inst = make_instance(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    if cfg.open_loop:
        traj, total = open_loop_cost(inst, rtol=cfg.rtol, atol=cfg.atol)
        label = f"{inst.label} open loop"
    else:
        vf, law, _ = _solve(cfg, inst)
        traj, total = closed_loop_cost(inst, law, up_to_degree=cfg.degree,
                                       rtol=cfg.rtol, atol=cfg.atol)
        label = f"{inst.label} degree-{cfg.degree} feedback"
    csv_path = os.path.join(cfg.out, "trajectory.csv")
    write_trajectory_csv(csv_path, traj)
    render_trajectory_figure(traj, os.path.join(cfg.out, "trajectory.png"), label)
    if traj.status == "completed":
        print(f"{label}: integrated cost {total:.17g}")
    else:
        print(f"{label}: {traj.status} at t = {traj.escape_time:.6g}")
    print(f"trajectory written to {csv_path}")
    return EXIT_OK


def cmd_table(cfg: RunConfig) -> int:
    inst = make_instance(cfg)
    t0 = time.perf_counter()
    vf, law, info = _solve(cfg, inst)
    rows = []
    for d in range(1, cfg.degree + 1):
        t_deg = time.perf_counter()
        value = eval_value(vf, inst.x0, up_to_degree=d + 1)
        traj, total = closed_loop_cost(inst, law, up_to_degree=d,
                                       rtol=cfg.rtol, atol=cfg.atol)
        rows.append({
            "degree": d,
            "value_series": value,
            "integrated_cost": total,
            "status": traj.status,
        })
        cost_text = f"{total:.6f}" if traj.status == "completed" else traj.status
        print(f"d={d}: value series {value:.6f}, integrated cost {cost_text} "
              f"({time.perf_counter() - t_deg:.2f} s)")
    os.makedirs(cfg.out, exist_ok=True)
    csv_path = os.path.join(cfg.out, "table.csv")
    write_table_csv(csv_path, rows)
    render_table_figure(rows, os.path.join(cfg.out, "table.png"), inst.label)
    print(f"table written to {csv_path} "
          f"(total {time.perf_counter() - t0:.2f} s)")
    return EXIT_OK


def cmd_validate(cfg: RunConfig) -> int:
    results = run_all(cfg.seed)
    all_ok = True
    for res in results:
        mark = "PASS" if res.passed else "FAIL"
        print(f"[{mark}] {res.name}: {res.detail}")
        all_ok &= res.passed
    return EXIT_OK if all_ok else EXIT_VALIDATION_FAILED


class _Parser(argparse.ArgumentParser):
    # config errors (including malformed flags) exit with code 3
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pqr", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config document; flags override it")
        p.add_argument("--model", choices=["lorenz", "vdp", "burgers", "custom"])
        p.add_argument("--degree", type=int, help="feedback polynomial degree (1..8)")
        p.add_argument("--horizon", type=float, help="simulation final time")
        p.add_argument("--x0", help="initial state override, comma-separated")
        p.add_argument("--g", type=int, help="oscillator count (vdp)")
        p.add_argument("--nodes", help="actuated nodes, e.g. 1,2 (vdp)")
        p.add_argument("--y0", type=float, help="initial displacement (vdp)")
        p.add_argument("--n-elements", dest="n_elements", type=int,
                       help="element count (burgers)")
        p.add_argument("--eps", type=float, help="diffusion coefficient (burgers)")
        p.add_argument("--alpha", type=float, help="reaction coefficient (burgers)")
        p.add_argument("--m", type=int, help="control patch count (burgers)")
        p.add_argument("--q-scale", dest="q_scale", type=float,
                       help="state weight scale (vdp)")
        p.add_argument("--r-scale", dest="r_scale", type=float,
                       help="control weight scale (vdp)")
        p.add_argument("--rtol", type=float, help="integrator relative tolerance")
        p.add_argument("--atol", type=float, help="integrator absolute tolerance")
        p.add_argument("--out", help="output directory")
        p.add_argument("--strict-paper-rhs", dest="strict_paper_rhs",
                       action="store_const", const=True, default=None,
                       help="use the classical explicit recurrences, which omit "
                            "the coupling of the highest-degree drift term with "
                            "the quadratic value coefficient")
        p.add_argument("--memory-budget", dest="memory_budget", type=int,
                       help="entry budget for the memory guard")
        p.add_argument("--system-file", dest="system_file",
                       help="custom system document (model=custom)")
        p.add_argument("--seed", type=int, help="seed for the validate suites")

    p_solve = sub.add_parser("solve", help="compute and store coefficients")
    add_common(p_solve)
    p_sim = sub.add_parser("simulate", help="simulate one feedback law")
    add_common(p_sim)
    p_sim.add_argument("--open-loop", dest="open_loop", action="store_const",
                       const=True, default=None, help="simulate with u = 0")
    p_table = sub.add_parser("table", help="per-degree value/cost table")
    add_common(p_table)
    p_val = sub.add_parser("validate", help="run built-in check suites")
    add_common(p_val)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = build_config(args)
        kron.set_entry_budget(cfg.memory_budget)
        handler = {
            "solve": cmd_solve,
            "simulate": cmd_simulate,
            "table": cmd_table,
            "validate": cmd_validate,
        }[args.command]
        return handler(cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except PqrError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER_ERROR


def console_main():  # entry point
    sys.exit(main())


if __name__ == "__main__":
    console_main()
