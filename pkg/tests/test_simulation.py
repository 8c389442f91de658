import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carfollow.model import ModelParams, RandomGapPolicy
from carfollow.simulation import (ConstantLeader, PiecewiseLeader, PlatoonConfig, RecordedLeader,
                                  RingConfig, SinusoidLeader, StationaryLeader, advance,
                                  branch_switches, compute_gaps, leader_motion,
                                  measure_flow_density, phase_labels, simulate_platoon,
                                  simulate_ring, spacing_velocity_loop, velocity_amplitude,
                                  wave_speeds)

P = ModelParams(a=1.5, b=1.5, v0=20.0, T=1.0, s0=2.0, lam=0.5, d_c=10.0)


def test_ballistic_step_is_exact_for_constant_acceleration():
    x, v, a = advance(np.array([0.0]), np.array([3.0]), np.array([0.5]), 0.2)[:3]
    assert x[0] == pytest.approx(3.0 * 0.2 + 0.5 * 0.5 * 0.04)
    assert v[0] == pytest.approx(3.1)


def test_euler_step():
    x, v, _, _ = advance(np.array([0.0]), np.array([3.0]), np.array([0.5]), 0.2, integrator="euler")
    assert x[0] == pytest.approx(0.6)
    assert v[0] == pytest.approx(3.1)


def test_clamp_stops_at_the_stopping_point():
    x, v, a, clamped = advance(np.array([10.0]), np.array([1.0]), np.array([-4.0]), 1.0)
    assert clamped[0] and v[0] == 0.0
    assert x[0] == pytest.approx(10.0 + 1.0 / 8.0)
    assert a[0] == pytest.approx(-1.0)


def test_unclamped_speed_can_turn_negative():
    _, v, _, clamped = advance(np.array([0.0]), np.array([1.0]), np.array([-4.0]), 1.0, clamp=False)
    assert v[0] == -3.0 and not clamped[0]


def test_ring_gaps_wrap():
    x = np.array([0.0, 20.0, 50.0])
    gaps = compute_gaps(x, np.array([1, 2, 0]), 5.0, 100.0)
    assert gaps.tolist() == [15.0, 25.0, 45.0]


def test_leader_profiles_integrate_consistently():
    t = np.arange(0, 100.01, 0.1)
    for prof in (ConstantLeader(5.0), StationaryLeader(), PiecewiseLeader((0.0, 20.0, 40.0), (0.0, 10.0, 10.0)),
                 SinusoidLeader(7.0, 1.4, 60.0)):
        x, v, a = leader_motion(prof, t, 100.0)
        assert x[0] == 100.0
        assert np.allclose(np.diff(x), 0.5 * (v[1:] + v[:-1]) * 0.1, atol=1e-9)
        assert np.all(v >= 0)
    rec = RecordedLeader(np.array([0.0, 1.0, 2.0]), np.array([0.0, 1.0, 3.0]), np.array([1.0, 1.5, 2.5]))
    assert rec.speeds(np.array([0.5]))[0] == pytest.approx(1.25)


def test_platoon_is_deterministic_and_shapes():
    cfg = PlatoonConfig(4, P, SinusoidLeader(8.0, 1.0, 30.0), 60.0, initial_gaps=15.0, initial_velocities=8.0,
                        gap_policy=RandomGapPolicy(0.2, 3.0, "symmetric"), seed=5)
    a, b = simulate_platoon(cfg), simulate_platoon(cfg)
    assert a.position.shape == (601, 4)
    assert np.array_equal(a.position, b.position)
    assert np.array_equal(a.d_c, b.d_c)
    assert np.all(np.isnan(a.gap[:, 0]))
    c = simulate_platoon(PlatoonConfig(**{**cfg.__dict__, "seed": 6}))
    assert not np.array_equal(a.d_c, c.d_c)


@settings(max_examples=15, deadline=None)
@given(gap=st.floats(3.0, 60.0), v=st.floats(0.0, 15.0), amp=st.floats(0.0, 3.0))
def test_clamped_platoon_never_reverses(gap, v, amp):
    cfg = PlatoonConfig(3, P, SinusoidLeader(max(v, amp), amp, 40.0), 60.0, initial_gaps=gap,
                        initial_velocities=v, on_collision="continue")
    traj = simulate_platoon(cfg)
    assert np.all(traj.velocity >= 0)
    assert np.all(np.isfinite(traj.position))


@settings(max_examples=10, deadline=None)
@given(n=st.integers(5, 30), pert=st.floats(0.0, 2.0))
def test_ring_conserves_total_gap(n, pert):
    cfg = RingConfig(400.0, n, P, 30.0, perturbation=pert)
    traj = simulate_ring(cfg)
    totals = np.nansum(traj.gap, axis=1)
    assert np.allclose(totals, 400.0 - n * 5.0, atol=1e-8)


def test_ring_homogeneous_equilibrium_is_steady():
    traj = simulate_ring(RingConfig(600.0, 40, P, 120.0))
    assert np.ptp(traj.velocity) < 1e-6


def test_jam_initialisation_geometry():
    cfg = RingConfig(600.0, 20, P, 1.0, init_mode="jam", jam_gap=3.0)
    traj = simulate_ring(cfg)
    g = traj.gap[0]
    assert np.allclose(g[:-1], 3.0)
    assert g[-1] == pytest.approx(600.0 - 20 * 5.0 - 19 * 3.0)
    assert np.all(traj.velocity[0] == 0.0)


def test_ring_rejects_overfull_road():
    with pytest.raises(ValueError):
        RingConfig(100.0, 20, P, 10.0)


@pytest.mark.parametrize("kwargs", [dict(dt=0.0), dict(duration=-1.0), dict(on_collision="explode"),
                                    dict(integrator="rk4"), dict(model="krauss")])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        PlatoonConfig(2, P, ConstantLeader(5.0), **{"duration": 10.0, **kwargs})


def test_collision_halts_and_is_logged():
    fast = ModelParams(a=3.0, b=0.5, v0=30.0, T=0.1, s0=0.5, lam=0.0, d_c=0.0)
    cfg = PlatoonConfig(2, fast, StationaryLeader(), 60.0, initial_gaps=30.0, initial_velocities=25.0)
    traj = simulate_platoon(cfg)
    hits = traj.events_of("collision")
    assert hits and hits[0].vehicle == 1
    assert traj.time[-1] < 60.0
    cont = simulate_platoon(PlatoonConfig(**{**cfg.__dict__, "on_collision": "continue"}))
    assert cont.time[-1] == pytest.approx(60.0)


def test_negative_velocity_event_without_clamp():
    p = ModelParams(a=3.0, b=2.0, v0=10.0, T=1.6, s0=5.0)
    traj = simulate_platoon(PlatoonConfig(2, p, StationaryLeader(), 10.0, model="idm", initial_gaps=4.0,
                                          velocity_clamp=False))
    assert traj.events_of("negative_velocity")


def test_mixed_fleet_models():
    cfg = PlatoonConfig(3, [P, P], ConstantLeader(10.0), 30.0, model=["idm", "sigmoid_idm"], initial_gaps=30.0,
                        initial_velocities=10.0)
    traj = simulate_platoon(cfg)
    assert np.all(traj.idm_branch[:, 1])


def test_measurements():
    cfg = RingConfig(600.0, 40, P, 200.0, v_init=5.0)
    traj = simulate_ring(cfg)
    fd = measure_flow_density(traj, cfg, 50.0)
    assert fd.density == pytest.approx(40 / 600)
    assert fd.flow == pytest.approx(fd.density * fd.speed)
    with pytest.raises(ValueError):
        measure_flow_density(traj, cfg, 500.0)
    assert velocity_amplitude(traj, 0) >= 0
    loop = spacing_velocity_loop(traj, 3)
    assert loop.gap.shape == loop.velocity.shape == loop.phase.shape
    assert 0.0 <= loop.coasting_fraction <= 1.0
    assert isinstance(branch_switches(traj), list)
    speeds = wave_speeds(traj)
    assert np.ndim(speeds) >= 0


def test_phase_labels_require_sustained_quiet():
    dt = 0.1
    a = np.concatenate([np.full(20, 1.0), np.full(5, 0.0), np.full(20, -1.0), np.full(30, 0.01), np.full(10, 1.0)])
    v = np.full(a.size, 5.0)
    labels = phase_labels(a, v, dt)
    assert labels[22] == "decelerating" or labels[22] == "accelerating"
    assert labels[22] != "coasting"
    assert labels[50] == "coasting"
    v[:3] = 0.0
    assert phase_labels(a, v, dt)[0] == "standstill"
