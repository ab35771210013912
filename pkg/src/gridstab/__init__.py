"""Small-signal stability analysis of droop-controlled inverter microgrids."""

__version__ = "0.1.0"

from .errors import GridStabError, InputError, NumericalError  # noqa: E402
from .flowgraph import FlowGraph, build_flow_graph, critical_lines  # noqa: E402
from .netmodel import Bus, BusKind, Line, NetworkCase, load_case, save_case  # noqa: E402
from .powerflow import Equilibrium, SolveOptions, solve_equilibrium, solve_radial  # noqa: E402
from .simulate import (  # noqa: E402
    Disturbance,
    SimOptions,
    Trajectory,
    simulate_first_order,
    simulate_linear,
    simulate_second_order,
)
from .stability import (  # noqa: E402
    assemble_jacobian,
    certificate_lossless,
    certificate_lossy_nofilter,
    full_report,
    inertia,
    jacobian_verdict,
    lemma3_critical_time_constant,
    tree_symmetrizer,
)

__all__ = [
    "Bus",
    "BusKind",
    "Disturbance",
    "Equilibrium",
    "FlowGraph",
    "GridStabError",
    "InputError",
    "Line",
    "NetworkCase",
    "NumericalError",
    "SimOptions",
    "SolveOptions",
    "Trajectory",
    "assemble_jacobian",
    "build_flow_graph",
    "certificate_lossless",
    "certificate_lossy_nofilter",
    "critical_lines",
    "full_report",
    "inertia",
    "jacobian_verdict",
    "lemma3_critical_time_constant",
    "load_case",
    "save_case",
    "simulate_first_order",
    "simulate_linear",
    "simulate_second_order",
    "solve_equilibrium",
    "solve_radial",
    "tree_symmetrizer",
]
