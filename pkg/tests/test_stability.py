import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from carfollow.model import ModelParams
from carfollow.stability import (DegenerateEquilibriumError, analyze, equilibrium_branch,
                                 local_stability, max_transfer_magnitude, partial_derivatives,
                                 stability_map, string_criterion, transfer_magnitude)

P = ModelParams(a=1.73, b=2.0, v0=33.33, T=1.0, s0=2.0, lam=1.0, d_c=10.0)

derivs = st.tuples(st.floats(1e-4, 5.0), st.floats(-5.0, -1e-3), st.floats(0.0, 5.0))


@settings(max_examples=40, deadline=None)
@given(v=st.floats(0.5, 30.0), s=st.floats(3.0, 80.0))
def test_idm_derivatives_match_oracle(v, s):
    got = partial_derivatives(P, "idm", v, s)
    ref = oracles.derivatives(oracles.idm_expr, s, v, P.to_dict())
    for x, y in zip(got, ref):
        assert x == pytest.approx(float(y), rel=1e-8, abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(v=st.floats(0.5, 30.0), s=st.floats(3.0, 80.0))
def test_sigmoid_derivatives_match_oracle_off_boundary(v, s):
    if abs(s - (P.s0 + v * P.T)) < 1e-6:
        return
    got = partial_derivatives(P, "sigmoid_idm", v, s)
    ref = oracles.derivatives(oracles.sigmoid_idm_expr, s, v, P.to_dict())
    for x, y in zip(got, ref):
        assert x == pytest.approx(float(y), rel=1e-8, abs=1e-14)


def test_boundary_uses_logistic_side():
    v = 8.0
    s = P.s0 + v * P.T
    branch, boundary = equilibrium_branch(P, "sigmoid_idm", v, s)
    assert branch == "sigmoid" and boundary
    got = partial_derivatives(P, "sigmoid_idm", v, s)
    ref = oracles.derivatives(oracles.logistic_expr, s, v, P.to_dict())
    for x, y in zip(got, ref):
        assert x == pytest.approx(float(y), rel=1e-10)


@settings(max_examples=200, deadline=None)
@given(d=derivs)
def test_eigenvalues_match_companion_matrix(d):
    f_s, f_v, f_dv = d
    g_plus, g_minus, stable = local_stability(f_s, f_v, f_dv)
    # state (gap perturbation, speed perturbation) with a steady leader
    J = np.array([[0.0, -1.0], [f_s, f_v - f_dv]])
    eig = np.linalg.eigvals(J)
    assert sorted(np.round([g_plus, g_minus], 8), key=lambda z: (z.real, z.imag)) == \
        pytest.approx(sorted(np.round(eig, 8), key=lambda z: (z.real, z.imag)), abs=1e-6)
    assert bool(stable) == bool(np.all(eig.real < 0))


@settings(max_examples=200, deadline=None)
@given(d=derivs, omega=st.floats(1e-3, 10.0))
def test_transfer_magnitude_matches_complex_evaluation(d, omega):
    got = float(transfer_magnitude(*d, omega))
    assert got == pytest.approx(oracles.transfer_abs(*d, omega), rel=1e-10)


@settings(max_examples=300, deadline=None)
@given(d=derivs)
def test_criterion_sign_predicts_low_frequency_gain(d):
    f_s, f_v, f_dv = d
    crit, positive = string_criterion(f_s, f_v, f_dv)
    if abs(crit) < 1e-3:
        return
    # the critical frequency of an unstable case must lie inside the sweep
    w_c2 = -2.0 * f_v ** 2 * crit
    if not positive and w_c2 < (2e-3) ** 2:
        return
    g = max_transfer_magnitude(f_s, f_v, f_dv)
    assert (g < 1.0) == bool(positive)


def test_string_criterion_rejects_zero_f_v():
    with pytest.raises(DegenerateEquilibriumError):
        string_criterion(1.0, 0.0, 1.0)


def test_transfer_rejects_non_positive_frequency():
    with pytest.raises(ValueError):
        transfer_magnitude(1.0, -1.0, 1.0, 0.0)


def test_analyze_exact_and_quasi():
    rep = analyze(P, "sigmoid_idm", 15.0)
    assert not rep.quasi and rep.branch == "sigmoid"
    assert rep.s_e == pytest.approx(23.848257, abs=1e-5)
    assert rep.classification in ("stable", "string_unstable")
    low = ModelParams(a=1.73, b=2.0, v0=21.667, T=1.0, s0=2.0, lam=0.1, d_c=15.0)
    q = analyze(low, "sigmoid_idm", 6.944)
    assert q.quasi and q.boundary
    idm = analyze(P, "idm", 15.0)
    assert idm.branch == "idm" and not idm.quasi


def test_exact_logistic_criterion_does_not_depend_on_d_c():
    # at an exact logistic equilibrium the bell term is r (1 - r), r = (v/v0)^delta
    values = [analyze(P.replace(d_c=d), "sigmoid_idm", 20.0).string_criterion for d in (2.0, 8.0, 16.0)]
    # only the bisection tolerance on s_e separates them
    assert np.ptp(values) < 1e-7


def test_stability_map_layout():
    lam = np.linspace(0.1, 2.0, 4)
    dc = np.linspace(0.0, 20.0, 5)
    smap = stability_map(P, 20.0, lam, dc)
    assert smap.criterion.shape == (4, 5)
    cell = smap.cell(lam[2], dc[3])
    rep = analyze(P.replace(lam=lam[2], d_c=dc[3]), "sigmoid_idm", 20.0)
    assert cell["criterion"] == pytest.approx(rep.string_criterion)
    assert cell["classification"] == rep.classification
    with pytest.raises(ValueError):
        stability_map(P, 20.0, [], dc)


def test_map_classification_agrees_with_simulated_growth():
    from carfollow.simulation import PlatoonConfig, SinusoidLeader, simulate_platoon, velocity_amplitude
    smap = stability_map(P, 20.0, np.linspace(0.02, 2.0, 50), np.linspace(0.0, 20.0, 51))
    usable = np.argwhere(~smap.quasi & ~smap.boundary & (np.abs(smap.criterion) > 0.05))
    pick = usable[np.random.default_rng(0).choice(len(usable), 20, replace=False)]
    agree = 0
    for i, j in pick:
        p = P.replace(lam=smap.lam_grid[i], d_c=smap.dc_grid[j])
        traj = simulate_platoon(PlatoonConfig(11, p, SinusoidLeader(20.0, 0.2, 60.0), 600.0,
                                              initial_gaps=smap.s_e[i, j], initial_velocities=20.0))
        decays = velocity_amplitude(traj, 10, 300.0) < velocity_amplitude(traj, 2, 300.0)
        agree += decays == bool(smap.criterion[i, j] > 0)
    assert agree >= 0.9 * len(pick)
