"""Electrothermal model: steady state, hexagon workspace, allocation, lag."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fiberctl import (OutsideWorkspace, PowerCommand, PowerLimitExceeded,
                      SafetyLimits, ThermalParams, ThermalState,
                      allocate_powers, steady_state_deflection, step_dynamics,
                      workspace_contains, workspace_vertices)
from fiberctl.thermal import Workspace, peak_temperature_ss, power_from_voltage

# Frozen hexagon metrics for alpha = 2.4375 mm/W and a 0.8 W cap.
CIRCUMRADIUS = 1.95
INRADIUS = 1.6887495373796557
BBOX_W = 3.9
BBOX_H = 3.377499074759311


def test_steady_state_single_channel(thermal):
    u = steady_state_deflection(thermal, PowerCommand((0.8, 0.0, 0.0)))
    assert u[0] == pytest.approx(0.8 * thermal.alpha)
    assert u[1] == pytest.approx(0.0, abs=1e-15)


def test_steady_state_superposition(thermal, rng):
    for _ in range(20):
        pa, pb = rng.uniform(0.0, 0.8, 3), rng.uniform(0.0, 0.8, 3)
        ua = steady_state_deflection(thermal, PowerCommand(tuple(pa)))
        ub = steady_state_deflection(thermal, PowerCommand(tuple(pb)))
        uab = steady_state_deflection(thermal, PowerCommand(tuple(pa + pb)))
        assert np.allclose(ua + ub, uab, atol=1e-12)


def test_equal_drive_cancels(thermal):
    # The triad sums to zero, so symmetric heating produces no deflection.
    u = steady_state_deflection(thermal, PowerCommand((0.5, 0.5, 0.5)))
    assert np.linalg.norm(u) < 1e-12


def test_hexagon_metrics(thermal, limits):
    v = workspace_vertices(thermal, limits)
    assert len(v) == 6
    radii = np.linalg.norm(v, axis=1)
    assert np.allclose(radii, CIRCUMRADIUS, atol=1e-9)
    w = v[:, 0].max() - v[:, 0].min()
    h = v[:, 1].max() - v[:, 1].min()
    assert w == pytest.approx(BBOX_W, abs=1e-9)
    assert h == pytest.approx(BBOX_H, abs=1e-9)
    # Regular hexagon: inradius = circumradius * cos(30 deg).
    mids = 0.5 * (v + np.roll(v, -1, axis=0))
    assert np.allclose(np.linalg.norm(mids, axis=1), INRADIUS, atol=1e-9)


def test_membership_basics(thermal, limits):
    assert workspace_contains(thermal, limits, (0.0, 0.0))
    assert workspace_contains(thermal, limits, (CIRCUMRADIUS - 1e-9, 0.0))
    assert not workspace_contains(thermal, limits, (CIRCUMRADIUS + 1e-6, 0.0))
    assert not workspace_contains(thermal, limits, (0.0, INRADIUS + 1e-6))
    assert workspace_contains(thermal, limits, (0.0, INRADIUS - 1e-9))


def test_clip_segment(workspace):
    t = workspace.clip_segment((-5.0, 0.0), (5.0, 0.0))
    assert t is not None
    x0 = -5.0 + t[0] * 10.0
    x1 = -5.0 + t[1] * 10.0
    assert x0 == pytest.approx(-CIRCUMRADIUS, abs=1e-9)
    assert x1 == pytest.approx(CIRCUMRADIUS, abs=1e-9)
    assert workspace.clip_segment((0.0, 5.0), (1.0, 5.0)) is None
    inside = workspace.clip_segment((-0.2, 0.1), (0.3, -0.1))
    assert inside == (0.0, 1.0)


@given(st.floats(0.0, 0.8), st.floats(0.0, 0.8), st.floats(0.0, 0.8))
@settings(max_examples=150, deadline=None)
def test_allocation_roundtrip_property(p0, p1, p2):
    """Any feasible steady state is reproduced by the minimal allocation."""
    thermal, limits = ALLOC_PARAMS
    u = steady_state_deflection(thermal, PowerCommand((p0, p1, p2)))
    cmd = allocate_powers(thermal, u, limits)
    back = steady_state_deflection(thermal, cmd)
    assert np.linalg.norm(back - u) < 1e-9
    # Minimal allocations drive the slack channel to zero.
    assert sorted(cmd.p)[0] <= 1e-9
    assert sum(cmd.p) <= p0 + p1 + p2 + 1e-9


ALLOC_PARAMS = (ThermalParams(), SafetyLimits())


def test_allocation_uses_adjacent_channels(thermal, limits, rng):
    """Active channels of a minimal allocation are angularly adjacent."""
    for _ in range(100):
        ang = rng.uniform(0.0, 2.0 * math.pi)
        r = rng.uniform(0.0, INRADIUS - 1e-6)
        cmd = allocate_powers(thermal, (r * math.cos(ang), r * math.sin(ang)),
                              limits)
        active = [i for i, p in enumerate(cmd.p) if p > 1e-9]
        assert len(active) <= 2
        if len(active) == 2:
            i, j = active
            gap = abs(ALLOC_ANGLES[i] - ALLOC_ANGLES[j]) % (2.0 * math.pi)
            gap = min(gap, 2.0 * math.pi - gap)
            assert gap == pytest.approx(2.0 * math.pi / 3.0, abs=1e-9)


ALLOC_ANGLES = (0.0, 2.0 * math.pi / 3.0, 4.0 * math.pi / 3.0)


def test_allocation_minimises_total_power(thermal, limits, rng):
    """Exhaustive check against the one-parameter solution family."""
    units = np.stack([np.cos(ALLOC_ANGLES), np.sin(ALLOC_ANGLES)], axis=1)
    for _ in range(50):
        ang = rng.uniform(0.0, 2.0 * math.pi)
        r = rng.uniform(0.0, INRADIUS - 1e-6)
        u = np.array([r * math.cos(ang), r * math.sin(ang)])
        cmd = allocate_powers(thermal, u, limits)
        p = np.asarray(cmd.p)
        # All solutions are p + c*(1,1,1); c > 0 only adds power, c < 0
        # breaks nonnegativity at the zero channel, so p must be minimal.
        base = p - p.min()
        assert np.allclose(
            thermal.alpha * base @ units, u, atol=1e-9)
        assert p.sum() == pytest.approx(base.sum(), abs=1e-9)


def test_allocation_rejects_outside(thermal, limits):
    with pytest.raises(OutsideWorkspace):
        allocate_powers(thermal, (CIRCUMRADIUS + 0.01, 0.0), limits)
    with pytest.raises(OutsideWorkspace):
        allocate_powers(thermal, (0.0, INRADIUS + 0.01), limits)


def test_power_command_validation(limits):
    with pytest.raises(PowerLimitExceeded):
        PowerCommand((0.1, -0.2, 0.0))
    with pytest.raises(PowerLimitExceeded):
        PowerCommand((float("nan"), 0.0, 0.0))
    with pytest.raises(PowerLimitExceeded):
        PowerCommand.checked((0.9, 0.0, 0.0), limits)
    cmd = PowerCommand.checked((0.8, 0.0, 0.0), limits)
    assert cmd.p == (0.8, 0.0, 0.0)


def test_step_dynamics_exact_exponential(thermal):
    """Composing two dt/2 steps equals one dt step: exact discretisation."""
    cmd = PowerCommand((0.6, 0.1, 0.0))
    s0 = ThermalState.at_rest(thermal)
    one = step_dynamics(thermal, s0, cmd, 10.0)
    half = step_dynamics(thermal, step_dynamics(thermal, s0, cmd, 5.0),
                         cmd, 5.0)
    assert np.allclose(one.deflection, half.deflection, atol=1e-12)
    assert one.peak_temperature == pytest.approx(half.peak_temperature,
                                                 abs=1e-12)


def test_step_dynamics_time_constant(thermal):
    cmd = PowerCommand((0.8, 0.0, 0.0))
    s = step_dynamics(thermal, ThermalState.at_rest(thermal), cmd,
                      thermal.time_constant)
    u_ss = steady_state_deflection(thermal, cmd)
    frac = s.deflection[0] / u_ss[0]
    assert frac == pytest.approx(1.0 - math.exp(-1.0), abs=1e-12)


def test_peak_temperature_at_cap(thermal, limits):
    # 22 + 66.25 * 0.8 = 75: the temperature limit binds exactly at the
    # power cap, so respecting one respects the other.
    t = peak_temperature_ss(thermal, PowerCommand((0.8, 0.5, 0.0)))
    assert t == pytest.approx(limits.max_temperature)
    t2 = peak_temperature_ss(thermal, PowerCommand((0.4, 0.0, 0.0)))
    assert t2 == pytest.approx(22.0 + 66.25 * 0.4)


def test_power_from_voltage(thermal, limits):
    cmd = power_from_voltage(thermal, (8.0, 0.0, 0.0), limits)
    assert cmd.p[0] == pytest.approx(0.64)
    with pytest.raises(PowerLimitExceeded):
        power_from_voltage(thermal, (-1.0, 0.0, 0.0), limits)
    with pytest.raises(PowerLimitExceeded):
        power_from_voltage(thermal, (9.5, 0.0, 0.0), limits)  # 0.9025 W


def test_workspace_contains_points_vectorised(workspace, rng):
    pts = rng.uniform(-2.5, 2.5, (500, 2))
    got = workspace.contains_points(pts)
    want = np.array([workspace.contains(p) for p in pts])
    assert np.array_equal(got, want)
