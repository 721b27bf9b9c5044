"""Estimator-style wrappers so runs compose with scikit-learn tooling.

Hyperparameters live in ``__init__`` and are exposed through
``get_params``/``set_params``; ``fit`` takes the initial magnetization and
stores fitted results in trailing-underscore attributes.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import diagnostics as dg
from .discretization import Discretization, build_mesh
from .hysteresis import DEFAULT_OMEGAS, HysteresisConfig, hysteresis_sweep, persistence_test
from .integrator import IntegratorOptions, integrate
from .model import ControlSpec, Drive, PhysicalParams, gain_threshold
from .spectral import assemble_linear_operator, discrete_eigenvalues, match_spectrum
from .validation import check_equilibrium, check_field, check_scalar


class _LLBase(BaseEstimator):
    def _params(self):
        check_scalar(self.nu, "nu", min_val=0.0)
        check_scalar(self.length, "length", min_val=0.0, include_min=False)
        check_scalar(self.n_elements, "n_elements", min_val=2, target_type=int)
        return PhysicalParams(float(self.nu), float(self.length))


class LandauLifshitzSimulator(TransformerMixin, _LLBase):
    """Integrates the (optionally controlled) equation from the field passed to ``fit``.

    ``gain=0`` with no drive is the free system. ``transform`` maps an
    initial field to the field at ``t_final``.
    """

    def __init__(self, nu=0.02, length=1.0, n_elements=12, gain=0.0, target=(1.0, 0.0, 0.0),
                 drive_amplitude=0.0, drive_omega=1.0, drive_component=1,
                 dt=1e-3, t_final=10.0, renormalize=None, record_stride=None,
                 allow_large_dt=False):
        self.nu = nu
        self.length = length
        self.n_elements = n_elements
        self.gain = gain
        self.target = target
        self.drive_amplitude = drive_amplitude
        self.drive_omega = drive_omega
        self.drive_component = drive_component
        self.dt = dt
        self.t_final = t_final
        self.renormalize = renormalize
        self.record_stride = record_stride
        self.allow_large_dt = allow_large_dt

    def _spec(self):
        check_scalar(self.gain, "gain", min_val=0.0)
        drive = None
        if self.drive_amplitude > 0:
            drive = Drive(float(self.drive_amplitude), float(self.drive_omega), int(self.drive_component))
        if self.gain == 0 and drive is None:
            return None
        return ControlSpec(float(self.gain), check_equilibrium(self.target), drive)

    def _run(self, X):
        params = self._params()
        disc = Discretization(build_mesh(self.n_elements, params.length))
        m0 = check_field(X, disc.mesh)
        opts = IntegratorOptions(dt=self.dt, t_final=self.t_final, renormalize=self.renormalize,
                                 record_stride=self.record_stride,
                                 allow_large_dt=self.allow_large_dt)
        return integrate(m0, params, self._spec(), opts, disc)

    def fit(self, X, y=None):
        self.trajectory_ = self._run(X)
        self.mesh_ = self.trajectory_.final.mesh
        self.final_state_ = self.trajectory_.final.values
        self.gain_threshold_ = gain_threshold(self._params())
        return self

    def transform(self, X):
        return self._run(X).final.values

    def predict(self, t):
        """Recorded states nearest to the requested times, shape ``(len(t), n_nodes, 3)``."""
        check_is_fitted(self, "trajectory_")
        times = self.trajectory_.times
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.clip(np.searchsorted(times, t), 0, len(times) - 1)
        prev = np.clip(idx - 1, 0, len(times) - 1)
        idx = np.where(np.abs(times[prev] - t) <= np.abs(times[idx] - t), prev, idx)
        return self.trajectory_.values()[idx]

    def score(self, X=None, y=None):
        """Negative final L2 distance to the target (higher is better)."""
        check_is_fitted(self, "trajectory_")
        return -self.trajectory_.diagnostics[-1].l2_distance_to_target

    def decay_rate(self, window_fraction=0.75):
        check_is_fitted(self, "trajectory_")
        return dg.decay_rate_fit(self.trajectory_, window_fraction)


class HysteresisSweep(_LLBase):
    """Frequency sweep of the input-output loop; ``fit`` takes the initial field."""

    def __init__(self, nu=0.02, length=1.0, n_elements=5, omegas=DEFAULT_OMEGAS,
                 amplitude=0.001, component=1, observation_point=0.6, n_periods=3,
                 gain=0.0, target=(1.0, 0.0, 0.0), model="nonlinear",
                 samples_per_period=256, threshold=0.1, n_jobs=1):
        self.nu = nu
        self.length = length
        self.n_elements = n_elements
        self.omegas = omegas
        self.amplitude = amplitude
        self.component = component
        self.observation_point = observation_point
        self.n_periods = n_periods
        self.gain = gain
        self.target = target
        self.model = model
        self.samples_per_period = samples_per_period
        self.threshold = threshold
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        params = self._params()
        mesh = build_mesh(self.n_elements, params.length)
        m0 = check_field(X, mesh)
        check_scalar(self.observation_point, "observation_point", min_val=0.0, max_val=params.length)
        controlled = self.gain > 0
        cfg = HysteresisConfig(omega=max(self.omegas), amplitude=self.amplitude,
                               component=self.component,
                               observation_point=self.observation_point,
                               n_periods=self.n_periods, controlled=controlled, model=self.model,
                               samples_per_period=self.samples_per_period)
        target = check_equilibrium(self.target)
        spec = ControlSpec(float(self.gain), target)
        self.loops_ = hysteresis_sweep(cfg, m0, params, spec, self.omegas, self.n_jobs,
                                       base=target if self.model == "linear" else None)
        self.areas_ = np.array([lp.area for lp in self.loops_])
        self.verdict_ = persistence_test(self.loops_, self.threshold)
        return self


class LinearizedSpectrum(_LLBase):
    """Discrete spectrum of the linearization about ``base`` matched to the closed forms."""

    def __init__(self, nu=0.02, length=1.0, n_elements=64, base=(1.0, 0.0, 0.0),
                 match_tol=0.10, zero_tol=1e-10):
        self.nu = nu
        self.length = length
        self.n_elements = n_elements
        self.base = base
        self.match_tol = match_tol
        self.zero_tol = zero_tol

    def fit(self, X=None, y=None):
        params = self._params()
        mesh = build_mesh(self.n_elements, params.length)
        op = assemble_linear_operator(check_equilibrium(self.base, "base"), params, mesh)
        self.eigenvalues_ = discrete_eigenvalues(op)
        self.match_ = match_spectrum(self.eigenvalues_, params, zero_tol=self.zero_tol,
                                     match_tol=self.match_tol)
        return self
