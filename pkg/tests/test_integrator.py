import math
import warnings

import numpy as np
import pytest

from llcontrol.discretization import Discretization, MagnetizationField
from llcontrol.errors import StepSizeError
from llcontrol.integrator import (MAX_SAMPLES, IntegratorOptions, check_step_size,
                                  default_renormalize, integrate, stable_dt, step_rk4)
from llcontrol.model import ControlSpec, Drive, Equilibrium, PhysicalParams

from .conftest import sine_cosine

E1 = Equilibrium(np.array([1.0, 0.0, 0.0]))


def test_rk4_amplification_factor():
    # one step of y' = -y with dt = 0.1 is the degree-4 Taylor polynomial of exp(-0.1)
    y = step_rk4(np.array([1.0]), 0.0, 0.1, lambda y, t: -y)
    assert y[0] == pytest.approx(0.9048375, abs=1e-15)


def test_rk4_is_fourth_order():
    def solve(n):
        y = np.array([1.0])
        for i in range(n):
            y = step_rk4(y, i / n, 1.0 / n, lambda y, t: np.cos(t) * y)
        return abs(y[0] - math.exp(math.sin(1.0)))

    errs = [solve(n) for n in (10, 20, 40)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(orders - 4) < 0.2)


def test_rk4_uses_time_argument():
    y = step_rk4(np.array([0.0]), 1.0, 0.5, lambda y, t: np.array([2 * t]))
    assert y[0] == pytest.approx(1.5**2 - 1.0, abs=1e-14)


def test_step_rk4_keeps_field_type(disc12):
    f = MagnetizationField.uniform(disc12.mesh, [2.0, 0, 0])
    out = step_rk4(f, 0.0, 0.1, lambda y, t: np.zeros_like(y), renormalize=True)
    assert isinstance(out, MagnetizationField)
    np.testing.assert_allclose(out.values, np.tile([1.0, 0, 0], (13, 1)))


def test_step_rk4_rejects_bad_dt():
    with pytest.raises(ValueError):
        step_rk4(np.ones(3), 0.0, 0.0, lambda y, t: y)


@pytest.mark.parametrize("kwargs", [
    dict(dt=0.0, t_final=1.0), dict(dt=-1e-3, t_final=1.0), dict(dt=1e-3, t_final=0.0),
    dict(dt=2.0, t_final=1.0), dict(dt=1e-3, t_final=1.0, record_stride=0),
    dict(dt=math.nan, t_final=1.0),
])
def test_options_validation(kwargs):
    with pytest.raises(ValueError):
        IntegratorOptions(**kwargs)


@pytest.mark.parametrize("dt, t_final, steps", [(1e-3, 1.0, 1000), (0.3, 1.0, 4), (1e-4, 10.0, 100000)])
def test_options_steps_and_stride(dt, t_final, steps):
    opts = IntegratorOptions(dt, t_final)
    assert opts.n_steps == steps
    assert math.ceil(steps / opts.stride()) + 1 <= MAX_SAMPLES


def test_stable_dt_shrinks_like_h_squared(default_params):
    d1 = stable_dt(Discretization.uniform(12).mesh, default_params)
    d2 = stable_dt(Discretization.uniform(24).mesh, default_params)
    assert d2 == pytest.approx(d1 / 4, rel=1e-12)


def test_step_guard(default_params, disc12):
    limit = stable_dt(disc12.mesh, default_params)
    assert check_step_size(limit, disc12.mesh, default_params) == limit
    with pytest.raises(StepSizeError, match="dt too large for mesh"):
        check_step_size(2 * limit, disc12.mesh, default_params)
    check_step_size(2 * limit, disc12.mesh, default_params, allow_large_dt=True)


def test_figure_presets_pass_the_guard(default_params, disc12):
    spec = ControlSpec(0.5, E1)
    assert stable_dt(disc12.mesh, default_params, spec) >= 0.002
    assert stable_dt(disc12.mesh, default_params) >= 1e-4


def test_renormalize_policy():
    assert default_renormalize(None) is True
    assert default_renormalize(ControlSpec(0.0, E1)) is True
    assert default_renormalize(ControlSpec(0.5, E1)) is False
    assert default_renormalize(ControlSpec(0.0, E1, Drive(0.001, 1.0))) is False


def test_renormalize_mismatch_warns(default_params, disc12):
    opts = IntegratorOptions(1e-3, 0.01, renormalize=True)
    with pytest.warns(UserWarning, match="renormalize"):
        integrate(sine_cosine(disc12), default_params, ControlSpec(0.5, E1), opts, disc12)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        integrate(sine_cosine(disc12), default_params, None, IntegratorOptions(1e-3, 0.01), disc12)


def test_oversized_step_returns_partial_trajectory(default_params, disc12):
    opts = IntegratorOptions(0.05, 50.0, allow_large_dt=True, record_stride=1)
    traj = integrate(sine_cosine(disc12), default_params, ControlSpec(0.5, E1), opts, disc12)
    assert traj.failed
    assert "blow-up" in traj.failure
    assert 1 <= len(traj) < opts.n_steps + 1
    assert np.all(np.isfinite(traj.values()))


def test_oversized_step_rejected_by_default(default_params, disc12):
    with pytest.raises(StepSizeError):
        integrate(sine_cosine(disc12), default_params, None, IntegratorOptions(0.05, 1.0), disc12)


def test_trajectory_layout(default_params, disc12):
    traj = integrate(sine_cosine(disc12), default_params, None, IntegratorOptions(1e-3, 0.1, record_stride=10),
                     disc12)
    assert len(traj) == 11 and len(traj.diagnostics) == 11
    np.testing.assert_allclose(traj.times, np.linspace(0, 0.1, 11), atol=1e-15)
    assert traj.values().shape == (11, 13, 3)
    assert traj.column("t")[-1] == traj.times[-1]
    assert not traj.failed


def test_last_step_lands_on_t_final(default_params, disc12):
    traj = integrate(sine_cosine(disc12), default_params, None, IntegratorOptions(3e-3, 0.01), disc12)
    assert traj.times[-1] == pytest.approx(0.01, abs=1e-15)


def test_constant_state_is_stationary(default_params, disc12):
    f = MagnetizationField.uniform(disc12.mesh, [0, 0, 1])
    traj = integrate(f, default_params, None, IntegratorOptions(1e-3, 1.0), disc12)
    assert np.max(np.abs(traj.final.values - f.values)) <= 1e-13


def test_uniform_control_relaxation_matches_closed_form(default_params, disc12):
    # a uniform start stays uniform; m - r decays like exp(-k t) in every component
    f = MagnetizationField.uniform(disc12.mesh, [0, 1, 0])
    spec = ControlSpec(0.5, E1)
    traj = integrate(f, default_params, spec, IntegratorOptions(2e-3, 2.0), disc12)
    expected = E1.a + (np.array([0, 1, 0]) - E1.a) * math.exp(-1.0)
    np.testing.assert_allclose(traj.final.values, np.tile(expected, (13, 1)), atol=1e-9)


def test_uncontrolled_energy_never_increases(default_params, disc12):
    traj = integrate(sine_cosine(disc12), default_params, None, IntegratorOptions(2e-3, 10.0), disc12)
    e = traj.column("exchange_energy")
    assert np.max(np.diff(e)) <= 1e-12
    assert e[-1] < 0.5 * e[0]


def test_mesh_mismatch(default_params, disc12):
    other = Discretization.uniform(6)
    with pytest.raises(ValueError):
        integrate(sine_cosine(other), default_params, None, IntegratorOptions(1e-3, 0.01), disc12)
