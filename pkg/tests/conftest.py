from __future__ import annotations

import sys
from pathlib import Path

import pytest

from gridstab.netmodel import builtin_dir, load_case
from gridstab.powerflow import SolveOptions, angles_from_diffs, solve_equilibrium, solve_radial

from . import tables


def seed_path(case: str, name: str) -> Path:
    return Path(str(builtin_dir(case) / name))


@pytest.fixture(scope="session")
def nine_bus():
    return load_case("builtin:ieee9-lossless")


@pytest.fixture(scope="session")
def point_a(nine_bus):
    return solve_equilibrium(nine_bus)


@pytest.fixture(scope="session")
def point_b(nine_bus):
    seed = angles_from_diffs(nine_bus, tables.NINE_BUS_B, max(nine_bus.bus_ids))
    return solve_equilibrium(nine_bus, SolveOptions(seed=seed))


@pytest.fixture(scope="session")
def lossy3():
    return load_case("builtin:lossy3")


@pytest.fixture(scope="session")
def lossy3_eq(lossy3):
    return solve_equilibrium(lossy3, SolveOptions(auto_balance=1))


@pytest.fixture(scope="session")
def radial():
    return load_case("builtin:ieee9-radial-lossy")


@pytest.fixture(scope="session")
def radial_eq(radial):
    return solve_radial(radial, SolveOptions(auto_balance=1))


@pytest.fixture(scope="session")
def radial_newton(radial):
    return solve_equilibrium(radial, SolveOptions(auto_balance=1))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[number][1])
