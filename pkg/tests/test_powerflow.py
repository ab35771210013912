import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridstab.errors import InputError, NoFeasibleBranch, NonConvergence, NotRadial
from gridstab.netmodel import Bus, BusKind, Line, NetworkCase, edge_arrays
from gridstab.powerflow import (
    SolveOptions,
    angles_from_diffs,
    auto_balance_value,
    balanced_case,
    display_diff_deg,
    flow_jacobian,
    line_angle_diffs,
    read_seed,
    residual,
    solve_equilibrium,
    solve_radial,
    write_equilibrium,
)

from . import tables
from .conftest import seed_path
from .helpers import random_case
from .oracles import fd_laplacian, mismatch, two_bus_angle_deg, wrap_deg


def two_bus(p=1.0, x=0.2, r=0.0):
    return NetworkCase(
        (Bus(1, BusKind.A, p, 0.0, 1.0, 1.0, 0.0, 1.0), Bus(2, BusKind.B, 0.0, p, 1.0, 0.0, 1.0, 0.0)),
        (Line(1, 2, r, x),),
    )


def diffs(case, eq):
    return {(a, b): d for a, b, d in line_angle_diffs(case, eq)}


def assert_diffs(got, want, tol):
    for key, value in want.items():
        assert abs(wrap_deg(got[key] - value)) <= tol, (key, got[key], value)


class TestTwoBus:
    def test_arcsine(self):
        eq = solve_equilibrium(two_bus())
        assert math.degrees(eq.angles[0] - eq.angles[1]) == pytest.approx(two_bus_angle_deg(1, 5), abs=1e-9)
        assert two_bus_angle_deg(1, 5) == pytest.approx(11.537, abs=1e-3)

    def test_radial_matches(self):
        eq = solve_radial(two_bus())
        assert math.degrees(eq.angles[0] - eq.angles[1]) == pytest.approx(11.537, abs=1e-3)

    def test_infeasible_branch(self):
        with pytest.raises(NoFeasibleBranch):
            solve_radial(two_bus(p=6.0))

    def test_infeasible_newton(self):
        with pytest.raises(NonConvergence):
            solve_equilibrium(two_bus(p=6.0))


class TestResidual:
    def test_zero_flow_lossy(self):
        case = NetworkCase(
            tuple(Bus(i, BusKind.A, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0) for i in (1, 2, 3)),
            (Line(1, 2, 0.3, 0.5), Line(2, 3, 0.9, 0.1), Line(1, 3, 0.2, 0.4)),
        )
        assert np.abs(residual(case, np.full(3, 0.4))).max() < 1e-15

    def test_published_point_a(self, nine_bus):
        th = angles_from_diffs(nine_bus, tables.NINE_BUS_A, 9)
        assert np.abs(mismatch(nine_bus, th)).max() < 0.02
        assert np.abs(residual(nine_bus, th)).max() < 0.02

    def test_published_lossy3(self, lossy3, lossy3_eq):
        th = angles_from_diffs(lossy3, tables.LOSSY3_DIFFS, 3)
        case = balanced_case(lossy3, lossy3_eq)
        assert np.abs(mismatch(case, th)).max() < 0.02

    def test_wrong_length(self, lossy3):
        with pytest.raises(ValueError):
            residual(lossy3, np.zeros(2))


class TestNineBus:
    def test_point_a(self, nine_bus, point_a):
        assert_diffs(diffs(nine_bus, point_a), tables.NINE_BUS_A, 0.05)
        assert point_a.max_residual < 1e-10

    def test_point_b(self, nine_bus, point_b):
        got = diffs(nine_bus, point_b)
        assert_diffs(got, tables.NINE_BUS_B, 0.05)
        assert got[(5, 6)] == pytest.approx(-122.17, abs=0.05)

    def test_seed_file_diff_header(self, nine_bus, point_b):
        seed = read_seed(seed_path("ieee9-lossless", "seed_point_b.csv"), nine_bus)
        eq = solve_equilibrium(nine_bus, SolveOptions(seed=seed))
        assert np.allclose(eq.angles, point_b.angles, atol=1e-9)

    def test_seed_file_angle_header(self, tmp_path, nine_bus, point_b):
        p = tmp_path / "seed.csv"
        p.write_text("bus,angle_deg\n" + "".join(
            f"{b},{math.degrees(a)}\n" for b, a in zip(nine_bus.bus_ids, point_b.angles)))
        seed = read_seed(p, nine_bus)
        assert np.allclose(seed, point_b.angles, atol=1e-12)

    def test_equilibrium_files(self, tmp_path, nine_bus, point_a):
        write_equilibrium(nine_bus, point_a, tmp_path)
        line_rows = (tmp_path / "line_angles.csv").read_text().splitlines()
        assert line_rows[0] == "from,to,diff_deg"
        assert (tmp_path / "equilibrium.csv").read_text().startswith("bus,angle_deg\n")
        seed = read_seed(tmp_path / "line_angles.csv", nine_bus)
        assert np.allclose(seed, point_a.angles, atol=1e-9)

    def test_reference_choice_irrelevant(self, nine_bus, point_a):
        eq = solve_equilibrium(nine_bus, SolveOptions(ref_bus=1))
        assert eq.angles[0] == 0
        for (a, b, d1), (_, _, d2) in zip(line_angle_diffs(nine_bus, eq), line_angle_diffs(nine_bus, point_a)):
            assert d1 == pytest.approx(d2, abs=1e-9)


class TestBalance:
    def test_radial_balance(self, radial_eq):
        assert radial_eq.balance_bus == 1
        assert auto_balance_value(None, radial_eq) == pytest.approx(tables.RADIAL_BALANCE, abs=1e-3)

    def test_lossy3_balance(self, lossy3_eq):
        assert lossy3_eq.balance_value == pytest.approx(0.5295, abs=1e-3)

    def test_lossless_balance_is_identity(self, nine_bus):
        eq = solve_equilibrium(nine_bus, SolveOptions(auto_balance=1))
        assert eq.balance_value == pytest.approx(nine_bus.bus(1).p_gen0, abs=1e-10)

    def test_unbalanced_without_slack(self, lossy3):
        # rounded injections do not cover the losses exactly
        from gridstab.errors import UnbalancedCase

        with pytest.raises((UnbalancedCase, NonConvergence)):
            solve_equilibrium(lossy3)


class TestRadial:
    def test_table(self, radial, radial_eq):
        assert_diffs(diffs(radial, radial_eq), tables.RADIAL_DIFFS, 0.05)

    def test_agrees_with_newton(self, radial_eq, radial_newton):
        assert np.abs(radial_eq.angles - radial_newton.angles).max() < 1e-8
        assert radial_eq.balance_value == pytest.approx(radial_newton.balance_value, abs=1e-10)

    def test_zero_injection(self):
        case = NetworkCase(
            tuple(Bus(i, BusKind.A, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0) for i in (1, 2, 3, 4)),
            (Line(1, 2, 0.3, 0.5), Line(2, 3, 0.9, 0.1), Line(2, 4, 0.2, 0.4)),
        )
        eq = solve_radial(case)
        assert np.abs(eq.angles).max() < 1e-14

    def test_mesh_rejected(self, nine_bus):
        with pytest.raises(NotRadial):
            solve_radial(nine_bus)


def test_display_window():
    assert display_diff_deg(math.radians(338.33)) == pytest.approx(338.33)
    assert display_diff_deg(math.radians(-181.0)) == pytest.approx(179.0)
    assert display_diff_deg(math.radians(725.0)) == pytest.approx(5.0)


def test_bad_seed_length(nine_bus):
    with pytest.raises(InputError):
        solve_equilibrium(nine_bus, SolveOptions(seed=np.zeros(3)))


def test_bad_seed_header(tmp_path, nine_bus):
    p = tmp_path / "s.csv"
    p.write_text("x,y\n1,2\n")
    with pytest.raises(InputError, match="header"):
        read_seed(p, nine_bus)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_newton_jacobian_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    case, _ = random_case(rng, mixed=True)
    th = rng.uniform(-math.pi, math.pi, case.n)
    jac = flow_jacobian(case.n, th, edge_arrays(case))
    fd = fd_laplacian(case, th)
    scale = max(1.0, np.abs(fd).max())
    assert np.abs(jac - fd).max() / scale < 1e-6


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), shift=st.floats(-10, 10))
def test_shift_invariance(seed, shift):
    rng = np.random.default_rng(seed)
    case, _ = random_case(rng)
    th = rng.uniform(-1, 1, case.n)
    assert np.allclose(residual(case, th), residual(case, th + shift), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_solution_residual_independent(seed):
    rng = np.random.default_rng(seed)
    case, truth = random_case(rng, mixed=True, spread=0.2)
    eq = solve_equilibrium(case)
    assert np.abs(mismatch(case, eq.angles)).max() <= 1e-10
    assert np.allclose(eq.angles, truth.angles, atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_radial_and_newton_agree_random(seed):
    rng = np.random.default_rng(seed)
    case, _ = random_case(rng, extra=0, spread=0.2)
    a = solve_radial(case)
    b = solve_equilibrium(case)
    assert np.abs(a.angles - b.angles).max() < 1e-8
