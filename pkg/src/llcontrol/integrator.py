"""Fixed-step RK4 marching of the semidiscrete system, with trajectory recording."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .discretization import Discretization, MagnetizationField, Mesh, rhs_values
from .errors import BlowUpError, StepSizeError
from .model import ControlSpec, Equilibrium, PhysicalParams, project_to_sphere

MAX_SAMPLES = 10_000
DIFFUSIVE_SAFETY = 0.25
RK4_SAFETY = 2.5  # RK4 stability region reaches ~2.78 on the real axis and 2.83 on the imaginary


@dataclass(frozen=True)
class IntegratorOptions:
    dt: float
    t_final: float
    renormalize: Optional[bool] = None  # None picks the policy default
    record_stride: Optional[int] = None  # None keeps at most MAX_SAMPLES samples
    allow_large_dt: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not (math.isfinite(self.t_final) and self.t_final > 0):
            raise ValueError(f"t_final must be > 0, got {self.t_final}")
        if self.dt > self.t_final:
            raise ValueError(f"dt = {self.dt} exceeds t_final = {self.t_final}")
        if self.record_stride is not None and self.record_stride < 1:
            raise ValueError(f"record_stride must be >= 1, got {self.record_stride}")

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.t_final / self.dt - 1e-9))

    def stride(self) -> int:
        if self.record_stride is not None:
            return self.record_stride
        return max(1, int(math.ceil(self.n_steps / (MAX_SAMPLES - 1))))


@dataclass(frozen=True)
class DiagnosticRecord:
    t: float
    l2_distance_to_target: float
    h1_distance_to_target: float
    lyapunov: float
    max_norm_drift: float
    exchange_energy: float


@dataclass
class Trajectory:
    times: np.ndarray
    states: List[MagnetizationField]
    diagnostics: List[DiagnosticRecord]
    failed: bool = False
    failure: Optional[str] = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    @property
    def final(self) -> MagnetizationField:
        return self.states[-1]

    def values(self) -> np.ndarray:
        """All recorded states stacked as ``(n_samples, n_nodes, 3)``."""
        return np.stack([s.values for s in self.states])

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(d, name) for d in self.diagnostics])


def stable_dt(mesh: Mesh, params: PhysicalParams, spec: Optional[ControlSpec] = None,
              lumped: bool = True) -> float:
    """Largest step accepted without ``allow_large_dt``.

    Combines the diffusive rule ``0.25 h^2 / max(nu, 0.01)`` with an RK4
    bound on the full linear part ``(nu + i) m_xx - k m``, whose dispersive
    half is usually the binding one.
    """
    h = mesh.h
    diffusive = DIFFUSIVE_SAFETY * h**2 / max(params.nu, 0.01)
    gain = spec.gain if spec is not None else 0.0
    radius = math.hypot(params.nu, 1.0) * (4.0 if lumped else 12.0) / h**2 + gain
    return min(diffusive, RK4_SAFETY / radius)


def check_step_size(dt, mesh, params, spec=None, allow_large_dt=False, lumped=True):
    limit = stable_dt(mesh, params, spec, lumped)
    if dt > limit and not allow_large_dt:
        raise StepSizeError(f"dt too large for mesh: dt = {dt:g} > {limit:.4g} "
                            f"(h = {mesh.h:g}); pass allow_large_dt to override")
    return limit


def _rk4_values(y, t, dt, f):
    k1 = f(y, t)
    k2 = f(y + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = f(y + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = f(y + dt * k3, t + dt)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_rk4(state, t: float, dt: float, rhs_fn: Callable, renormalize: bool = False):
    """One classic RK4 step.

    ``state`` is a :class:`MagnetizationField` or a plain array;
    ``rhs_fn(values, t)`` must accept and return arrays of the same shape.
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    is_field = isinstance(state, MagnetizationField)
    y = state.values if is_field else np.asarray(state, dtype=float)
    y_new = _rk4_values(y, t, dt, rhs_fn)
    if not np.all(np.isfinite(y_new)):
        raise BlowUpError(f"numerical blow-up at t = {t + dt:g}", t=t + dt)
    if renormalize:
        y_new = project_to_sphere(y_new)
    return MagnetizationField(y_new, state.mesh) if is_field else y_new


def default_renormalize(spec: Optional[ControlSpec]) -> bool:
    # any input, feedback or drive, moves m off the sphere on purpose
    return spec is None or (spec.gain == 0 and not spec.is_driven)


def march(initial: MagnetizationField, f: Callable, opts: IntegratorOptions,
          diagnose: Callable[[float, np.ndarray], DiagnosticRecord],
          renormalize: bool = False) -> Trajectory:
    """Shared time loop: RK4 steps, optional projection, recording every ``stride`` steps.

    Blow-up ends the loop early and returns what was recorded so far with
    ``failed`` set.
    """
    mesh = initial.mesh
    n_steps, stride, dt = opts.n_steps, opts.stride(), opts.dt
    y = initial.values.copy()
    times, states, diags = [0.0], [initial], [diagnose(0.0, y)]
    failure = None
    for i in range(1, n_steps + 1):
        t0 = (i - 1) * dt
        t1 = min(i * dt, opts.t_final)
        try:
            # overflow on the way to a blow-up is detected explicitly below
            with np.errstate(over="ignore", invalid="ignore"):
                y = step_rk4(y, t0, t1 - t0, f, renormalize=renormalize)
        except BlowUpError as exc:
            failure = f"numerical blow-up at t = {t1:g}: {exc}"
            break
        if i % stride == 0 or i == n_steps:
            times.append(t1)
            states.append(MagnetizationField(y, mesh))
            with np.errstate(over="ignore", invalid="ignore"):
                diags.append(diagnose(t1, y))
    return Trajectory(np.array(times), states, diags, failed=failure is not None, failure=failure)


def integrate(initial: MagnetizationField, params: PhysicalParams,
              spec: Optional[ControlSpec], opts: IntegratorOptions,
              disc: Optional[Discretization] = None) -> Trajectory:
    """Integrate the (optionally controlled) Landau-Lifshitz system from ``initial``."""
    from . import diagnostics as dg

    disc = disc or Discretization(initial.mesh)
    if disc.mesh != initial.mesh:
        raise ValueError("initial field and discretization live on different meshes")
    check_step_size(opts.dt, initial.mesh, params, spec, opts.allow_large_dt, disc.lumped)

    policy = default_renormalize(spec)
    renormalize = policy if opts.renormalize is None else opts.renormalize
    if renormalize != policy:
        warnings.warn(
            f"renormalize={renormalize} differs from the default for this run "
            f"({'controlled/driven' if spec is not None else 'uncontrolled'}: {policy})",
            stacklevel=2)

    lap, nu = disc.laplacian, params.nu

    def f(y, t):
        return rhs_values(y, lap, nu, spec, t)

    target = spec.target if spec is not None else None

    def diagnose(t, y):
        return dg.record(t, MagnetizationField(y, initial.mesh), target, disc)

    traj = march(initial, f, opts, diagnose, renormalize=renormalize)
    traj.meta.update(renormalize=renormalize, dt=opts.dt, stride=opts.stride(),
                     target=None if target is None else target.a.tolist())
    return traj
