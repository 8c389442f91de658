import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from carfollow.equilibrium import (equilibrium_spacing, equilibrium_velocity, fit_steady_state,
                                   fundamental_diagram, idm_equilibrium_spacing,
                                   sigmoid_idm_closed_form, sigmoid_idm_equilibrium)
from carfollow.model import ModelParams, acceleration

P = ModelParams(a=1.73, b=2.0, v0=33.33, T=1.0, s0=2.0, lam=1.0, d_c=10.0)


def test_idm_closed_form_zeroes_the_law():
    for v in (0.0, 5.0, 20.0, 33.0):
        s = float(idm_equilibrium_spacing(v, P))
        assert float(acceleration("idm", s, v, v, P)) == pytest.approx(0.0, abs=1e-12)


def test_idm_spacing_diverges_at_v0():
    with pytest.raises(ValueError):
        idm_equilibrium_spacing(P.v0, P)
    with pytest.raises(ValueError):
        idm_equilibrium_spacing(-1.0, P)


@settings(max_examples=60, deadline=None)
@given(v=st.floats(1.0, 33.0), lam=st.floats(0.1, 2.0), d_c=st.floats(0.0, 20.0))
def test_sigmoid_root_matches_oracle(v, lam, d_c):
    p = P.replace(lam=lam, d_c=d_c)
    point = sigmoid_idm_equilibrium(v, p)
    if not point.exact:
        return
    ref = float(oracles.sigmoid_equilibrium_root(v, p.to_dict()))
    assert point.s_e == pytest.approx(ref, abs=2e-9)
    assert point.s_e == pytest.approx(float(sigmoid_idm_closed_form(v, p)), abs=2e-9)


@settings(max_examples=60, deadline=None)
@given(v=st.floats(0.0, 33.0), lam=st.floats(0.05, 2.0), d_c=st.floats(0.0, 20.0))
def test_vectorised_spacing_matches_bisection(v, lam, d_c):
    p = P.replace(lam=lam, d_c=d_c)
    point = sigmoid_idm_equilibrium(v, p)
    assert float(equilibrium_spacing("sigmoid_idm", v, p)) == pytest.approx(point.s_e, abs=1e-8)
    # the equilibrium never lies inside the IDM branch
    assert point.s_e >= p.s0 + v * p.T - 1e-12


def test_quasi_equilibrium_at_low_speed():
    p = P.replace(lam=0.1, d_c=15.0)
    point = sigmoid_idm_equilibrium(6.944, ModelParams(a=1.73, b=2.0, v0=21.667, T=1.0, s0=2.0, lam=0.1, d_c=15.0))
    assert point.branch == "quasi"
    assert point.s_e == pytest.approx(2.0 + 6.944)
    assert point.residual > 0
    assert sigmoid_idm_equilibrium(0.0, p).branch == "quasi"


def test_equilibrium_velocity_inverts_spacing():
    for model in ("idm", "sigmoid_idm"):
        for v in (2.0, 10.0, 25.0):
            s = float(equilibrium_spacing(model, v, P))
            assert equilibrium_velocity(model, s, P) == pytest.approx(v, abs=1e-7)
    assert equilibrium_velocity("sigmoid_idm", P.s0, P) == 0.0


@pytest.mark.parametrize("model", ["idm", "sigmoid_idm"])
def test_fundamental_diagram_invariants(model):
    fd = fundamental_diagram(P, model, 5.0)
    assert np.all(np.diff(fd.density) > 0)
    assert np.allclose(fd.flow, fd.density * fd.speed)
    eq = fd.branch != "free_ray"
    assert np.allclose(fd.density[eq], 1.0 / (fd.spacing[eq] + 5.0))
    assert np.all(fd.speed <= P.v0)
    rho_c, q_max = fd.capacity()
    assert q_max == pytest.approx(fd.flow.max())
    assert 0 < rho_c < 1 / 5.0


def test_sigmoid_diagram_drops_after_capacity():
    fd = fundamental_diagram(P, "sigmoid_idm", 5.0, v_grid=np.linspace(0, P.v0, 400, endpoint=False))
    i = int(np.argmax(fd.flow))
    # the last free-ray point and the first equilibrium point bracket a drop
    assert fd.branch[i - 1] == "free_ray" or fd.branch[i] == "free_ray" or fd.flow[i + 1] < fd.flow[i]


def test_fit_steady_state_recovers_idm():
    truth = ModelParams(a=1.0, b=1.0, v0=30.0, T=1.2, s0=3.0)
    v = np.linspace(1.0, 25.0, 25)
    s = idm_equilibrium_spacing(v, truth)
    fit = fit_steady_state(v, s, "idm", x0={"v0": 28.0, "T": 1.0, "s0": 2.0})
    assert fit.params.T == pytest.approx(1.2, rel=1e-5)
    assert fit.params.s0 == pytest.approx(3.0, rel=1e-5)
    assert fit.params.v0 == pytest.approx(30.0, rel=1e-5)
    assert fit.sse < 1e-12


def test_fit_steady_state_sigmoid_reduces_residual():
    truth = ModelParams(a=1.0, b=1.0, v0=30.0, T=1.0, s0=2.0, lam=0.8, d_c=6.0)
    v = np.linspace(5.0, 28.0, 20)
    s = equilibrium_spacing("sigmoid_idm", v, truth)
    fit = fit_steady_state(v, s, "sigmoid_idm", x0={"v0": 30.0, "T": 1.0, "s0": 2.0, "lam": 0.8, "d_c": 6.0})
    assert fit.sse < 1e-10


def test_fit_steady_state_needs_enough_points():
    with pytest.raises(ValueError):
        fit_steady_state([1.0, 2.0], [5.0, 6.0], "sigmoid_idm")
