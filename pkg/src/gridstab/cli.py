"""Command-line front end.

Subcommands::

    gridstab powerflow CASE   -> equilibrium.csv, line_angles.csv
    gridstab stability CASE   -> report.json, laplacian.csv, critical_lines.csv, spectrum.svg
    gridstab simulate  CASE   -> trajectory.csv, metrics.csv, plot.svg
    gridstab sweep     CASE   -> sweep.csv, sweep.svg

Exit status is 0 whenever the computation finished (an unstable verdict is a
result, not a failure), 1 for bad input or usage and 2 for numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import GridStabError, InputError, NoFeasibleBranch, NumericalError
from .flowgraph import build_flow_graph, critical_lines, write_critical_lines, write_laplacian
from .netmodel import BUILTIN_BALANCE, BUILTIN_PREFIX, NetworkCase, builtin_dir, is_radial, load_case
from .powerflow import (
    Equilibrium,
    SolveOptions,
    balanced_case,
    read_seed,
    solve_equilibrium,
    solve_radial,
    write_equilibrium,
)
from .stability import DEFAULT_EPS1, DEFAULT_EPS2, assemble_jacobian, full_report, jacobian_verdict
from .simulate import (
    Disturbance,
    SimOptions,
    default_disturbance,
    overshoot,
    settling_time,
    simulate_first_order,
    simulate_second_order,
    write_metrics,
    write_trajectory,
)

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2
DEFAULT_TD = (0.1, 1.0, 10.0)
MAX_SAMPLES = 5000


class UsageError(InputError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage, which collides with the
    # numerical-failure code
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    case_ref: str
    ref_bus: int | None = None
    td_list: tuple[float, ...] = DEFAULT_TD
    eps1: float = DEFAULT_EPS1
    eps2: float = DEFAULT_EPS2
    seed_path: str | None = None
    auto_balance: int | None = None
    output_dir: Path = Path(".")
    t_end: float = 10.0
    h: float = 1e-3
    method: str = "implicit_trapezoidal"
    model: str = "second"
    blowup: float = 10.0
    stride: int | None = None
    disturb: dict[int, float] = field(default_factory=dict)
    buses: tuple[int, ...] = ()
    jobs: int = 1


# -- argument parsing --------------------------------------------------------


def _td_list(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty T_D list")
    if any(not math.isfinite(v) or v <= 0 for v in vals):
        raise argparse.ArgumentTypeError("T_D values must be positive")
    return vals


def _disturb(text: str) -> tuple[int, float]:
    bus, sep, rad = text.partition("=")
    try:
        if not sep:
            raise ValueError
        return int(bus), float(rad)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected BUS=RAD, got {text!r}") from None


def _balance(text: str):
    if text.lower() == "none":
        return "none"
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a bus id or 'none', got {text!r}") from None


def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid value {text!r}") from None
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v

    return conv


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("case", nargs="?", help="case directory or builtin:NAME")
    common.add_argument("--case", dest="case_opt", metavar="CASE", help="same as the positional argument")
    common.add_argument("--ref-bus", type=int, help="reference bus (default: highest id)")
    common.add_argument("--seed", help="initial guess: bus,angle_deg or from,to,diff_deg CSV")
    common.add_argument("--auto-balance", type=_balance, metavar="BUS|none",
                        help="solve for this bus's generation (builtin default applies otherwise)")
    common.add_argument("--out", type=Path, default=None,
                        help="output directory (default: $GRIDSTAB_OUT or .)")

    dyn = argparse.ArgumentParser(add_help=False)
    dyn.add_argument("--td", type=_td_list, default=DEFAULT_TD,
                     help="comma-separated filter constants in s (default 0.1,1,10)")
    dyn.add_argument("--eps1", type=_positive(float), default=DEFAULT_EPS1)
    dyn.add_argument("--eps2", type=_positive(float), default=DEFAULT_EPS2)

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--tend", type=_positive(float), default=10.0, help="horizon in s")
    sim.add_argument("--h", type=_positive(float), default=1e-3, help="step in s")
    sim.add_argument("--method", choices=("implicit_trapezoidal", "explicit_rk4"),
                     default="implicit_trapezoidal")
    sim.add_argument("--model", choices=("second", "first"), default="second",
                     help="filtered swing model or the no-filter first-order model")
    sim.add_argument("--disturb", type=_disturb, action="append", default=[], metavar="BUS=RAD",
                     help="initial angle offset (repeatable)")
    sim.add_argument("--blowup", type=_positive(float), default=10.0,
                     help="divergence threshold on relative angles in rad")
    sim.add_argument("--stride", type=_positive(int), default=None,
                     help="keep every k-th sample (default: at most 5000 rows)")
    sim.add_argument("--buses", type=lambda s: tuple(int(v) for v in s.split(",")), default=(),
                     help="buses to plot")

    p = _Parser(prog="gridstab", description="Small-signal stability of droop-controlled microgrids.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("powerflow", parents=[common], help="solve the operating point")
    sub.add_parser("stability", parents=[common, dyn], help="certificates and Jacobian verdicts")
    sub.add_parser("simulate", parents=[common, dyn, sim], help="nonlinear transient for one T_D")
    sw = sub.add_parser("sweep", parents=[common, dyn, sim], help="verdict and transient per T_D")
    sw.add_argument("--jobs", type=_positive(int), default=1, help="parallel workers")
    return p


def config_from_args(args) -> RunConfig:
    case_ref = args.case_opt or args.case
    if args.case_opt and args.case and args.case_opt != args.case:
        raise UsageError("case given both positionally and with --case")
    if not case_ref:
        raise UsageError("no case given")
    if args.out is not None:
        out = args.out
    else:
        out = Path(os.environ.get("GRIDSTAB_OUT") or ".")
    cfg = RunConfig(case_ref=case_ref, ref_bus=args.ref_bus, seed_path=args.seed, output_dir=out)
    if args.auto_balance == "none":
        cfg.auto_balance = None
    elif args.auto_balance is not None:
        cfg.auto_balance = args.auto_balance
    elif case_ref.startswith(BUILTIN_PREFIX):
        cfg.auto_balance = BUILTIN_BALANCE.get(case_ref[len(BUILTIN_PREFIX):])
    for name in ("td", "eps1", "eps2"):
        if hasattr(args, name):
            setattr(cfg, "td_list" if name == "td" else name, getattr(args, name))
    if hasattr(args, "tend"):
        cfg.t_end, cfg.h, cfg.method, cfg.model = args.tend, args.h, args.method, args.model
        cfg.blowup, cfg.stride, cfg.buses = args.blowup, args.stride, args.buses
        cfg.disturb = {}
        for bus, rad in args.disturb:
            cfg.disturb[bus] = cfg.disturb.get(bus, 0.0) + rad
    cfg.jobs = getattr(args, "jobs", 1)
    return cfg


# -- shared steps ------------------------------------------------------------


def _resolve_seed(path: str) -> Path:
    # builtin:NAME/FILE points at a file shipped with a builtin case
    if path.startswith(BUILTIN_PREFIX):
        name, _, fname = path[len(BUILTIN_PREFIX):].partition("/")
        return Path(str(builtin_dir(name) / fname))
    return Path(path)


def prepare(cfg: RunConfig) -> tuple[NetworkCase, Equilibrium]:
    case = load_case(cfg.case_ref)
    for label, bus in (("--ref-bus", cfg.ref_bus), ("--auto-balance", cfg.auto_balance)):
        if bus is not None and bus not in case.bus_ids:
            raise UsageError(f"{label}: unknown bus {bus}")
    seed = None
    if cfg.seed_path:
        seed = read_seed(_resolve_seed(cfg.seed_path), case, cfg.ref_bus)
    opts = SolveOptions(seed=seed, auto_balance=cfg.auto_balance, ref_bus=cfg.ref_bus)
    eq = None
    if seed is None and is_radial(case):
        try:
            eq = solve_radial(case, opts)
        except NoFeasibleBranch as exc:
            print(f"gridstab: leaf recursion failed ({exc}); falling back to Newton", file=sys.stderr)
    if eq is None:
        eq = solve_equilibrium(case, opts)
    return case, eq


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {out}: {exc.strerror}") from None
    if not os.access(out, os.W_OK):
        raise UsageError(f"output directory not writable: {out}")
    return out


def _sim_options(cfg: RunConfig, td: float) -> SimOptions:
    stride = cfg.stride
    if stride is None:
        steps = max(1, round(cfg.t_end / cfg.h))
        stride = max(1, math.ceil(steps / MAX_SAMPLES))
    return SimOptions(t_end=cfg.t_end, h=cfg.h, method=cfg.method, eps1=cfg.eps1, eps2=cfg.eps2,
                      td_override=td, blowup=cfg.blowup, sample_stride=stride)


def _disturbance(cfg: RunConfig, case: NetworkCase) -> Disturbance:
    if not cfg.disturb:
        return default_disturbance(case)
    unknown = sorted(set(cfg.disturb) - set(case.bus_ids))
    if unknown:
        raise UsageError(f"--disturb: unknown bus {unknown[0]}")
    return Disturbance(dict(cfg.disturb))


def _run_sim(case, eq, dist, opts, model):
    fn = simulate_second_order if model == "second" else simulate_first_order
    return fn(case, eq, dist, opts)


# -- commands ----------------------------------------------------------------


def cmd_powerflow(cfg: RunConfig) -> int:
    case, eq = prepare(cfg)
    out = _out_dir(cfg)
    write_equilibrium(case, eq, out)
    print(f"converged in {eq.iterations} iterations, max mismatch {eq.max_residual:.3e}")
    if eq.balance_bus is not None:
        print(f"balance bus {eq.balance_bus}: p_gen = {eq.balance_value:.6f}")
    return EXIT_OK


def cmd_stability(cfg: RunConfig) -> int:
    from .plotting import plot_spectrum
    from .report import write_report

    case, eq = prepare(cfg)
    rep = full_report(case, eq, cfg.td_list, cfg.eps1, cfg.eps2)
    out = _out_dir(cfg)
    graph = build_flow_graph(balanced_case(case, eq), eq)
    write_report(rep, out / "report.json")
    write_laplacian(graph, out / "laplacian.csv")
    write_critical_lines(rep.critical, out / "critical_lines.csv")
    plot_spectrum(rep.verdicts, out / "spectrum.svg", title=f"Jacobian spectrum: {rep.case_name}")
    crit = ", ".join(f"({a},{b})" for a, b in rep.critical.critical) or "none"
    print(f"critical lines: {crit}")
    if rep.lemma3 is not None:
        print(f"critical filter constant r* = {rep.lemma3.r_star:.6g} s")
    for td, v in rep.verdicts.items():
        print(f"T_D = {td:g}: {'stable' if v.stable else 'unstable'} (max real part {v.max_real:.6g})")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    from .plotting import plot_angle_response

    if len(cfg.td_list) != 1:
        raise UsageError("simulate takes exactly one --td value")
    td = cfg.td_list[0]
    case, eq = prepare(cfg)
    dist = _disturbance(cfg, case)
    traj = _run_sim(case, eq, dist, _sim_options(cfg, td), cfg.model)
    out = _out_dir(cfg)
    write_trajectory(traj, out / "trajectory.csv")
    write_metrics(traj, eq, out / "metrics.csv")
    plot_angle_response(traj, out / "plot.svg", buses=cfg.buses or None,
                        title=f"Small-disturbance angle response, T_D = {td:g} s")
    print(f"diverged: {str(traj.diverged).lower()} (t = {traj.times[-1]:.6g} s)")
    return EXIT_OK


def _sweep_entry(case, eq, dist, cfg: RunConfig, td: float):
    graph = build_flow_graph(balanced_case(case, eq), eq)
    verdict = jacobian_verdict(assemble_jacobian(balanced_case(case, eq), graph, td, cfg.eps1, cfg.eps2))
    traj = _run_sim(case, eq, dist, _sim_options(cfg, td), cfg.model)
    over = float(np.max(overshoot(traj, eq)))
    settle = math.nan if traj.diverged else float(np.max(settling_time(traj, eq)))
    return td, verdict.stable, verdict.max_real, settle, over, traj


def cmd_sweep(cfg: RunConfig) -> int:
    from .plotting import plot_sweep_responses, select_buses

    if len(cfg.td_list) < 2:
        raise UsageError("sweep needs at least two --td values")
    case, eq = prepare(cfg)
    dist = _disturbance(cfg, case)
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            futures = [pool.submit(_sweep_entry, case, eq, dist, cfg, td) for td in cfg.td_list]
            rows = [f.result() for f in futures]
    else:
        rows = [_sweep_entry(case, eq, dist, cfg, td) for td in cfg.td_list]
    out = _out_dir(cfg)
    with (out / "sweep.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["td", "verdict", "max_real", "max_settling_s", "max_overshoot_rad", "diverged"])
        for td, stable, max_real, settle, over, traj in rows:
            w.writerow([f"{td:.12g}", "stable" if stable else "unstable", f"{max_real:.12g}",
                        f"{settle:.12g}", f"{over:.12g}", str(traj.diverged).lower()])
    trajs = {r[0]: r[5] for r in rows}
    first = rows[0][5]
    bus = (cfg.buses or select_buses(first))[0]
    plot_sweep_responses(trajs, out / "sweep.svg", bus, relative_to=first.ref_bus,
                         title=f"Bus {bus} response across T_D")
    for td, stable, max_real, settle, over, traj in rows:
        print(f"T_D = {td:g}: {'stable' if stable else 'unstable'}, "
              f"max settling {settle:.6g} s, diverged {str(traj.diverged).lower()}")
    return EXIT_OK


COMMANDS = {
    "powerflow": cmd_powerflow,
    "stability": cmd_stability,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # --help / --version exit 0; usage errors were mapped to 1 above
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT
    try:
        cfg = config_from_args(args)
        return COMMANDS[args.command](cfg)
    except InputError as exc:
        print(f"gridstab: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"gridstab: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except GridStabError as exc:
        print(f"gridstab: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"gridstab: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
