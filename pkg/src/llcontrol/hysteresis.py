"""Periodic-forcing experiments and the low-frequency loop-persistence test."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence

import numpy as np

from .diagnostics import nearest_equilibrium
from .discretization import Discretization, MagnetizationField
from .errors import DegenerateLoopError
from .integrator import IntegratorOptions, integrate, stable_dt
from .model import ControlSpec, Drive, Equilibrium, PhysicalParams

DEFAULT_OMEGAS = (1.0, 0.1, 0.01, 0.001)
PERSISTENCE_THRESHOLD = 0.1


@dataclass(frozen=True)
class HysteresisConfig:
    omega: float
    amplitude: float = 0.001
    component: int = 1
    observation_point: float = 0.6
    n_periods: int = 3
    controlled: bool = False
    model: str = "nonlinear"  # or "linear"
    samples_per_period: int = 256

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError(f"omega must be > 0, got {self.omega}")
        if not self.amplitude >= 0:
            raise ValueError(f"amplitude must be >= 0, got {self.amplitude}")
        if self.component not in (1, 2, 3):
            raise ValueError(f"component must be 1, 2 or 3, got {self.component}")
        if self.n_periods < 3:
            raise ValueError(f"n_periods must be >= 3 to discard the transient, got {self.n_periods}")
        if self.samples_per_period < 64:
            raise ValueError("need at least 64 samples per period")
        if self.model not in ("nonlinear", "linear"):
            raise ValueError(f"model must be 'nonlinear' or 'linear', got {self.model!r}")

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega


@dataclass(frozen=True)
class HysteresisLoop:
    samples: np.ndarray  # (n, 2): input, output over the final period
    omega: float
    area: float

    @property
    def inputs(self):
        return self.samples[:, 0]

    @property
    def outputs(self):
        return self.samples[:, 1]


def loop_area(loop) -> float:
    """Absolute shoelace area of the closed polygon through the samples."""
    pts = loop.samples if isinstance(loop, HysteresisLoop) else np.asarray(loop, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise DegenerateLoopError("degenerate loop: need at least 3 samples")
    # shift to the centroid first so the cross terms do not cancel catastrophically
    x = pts[:, 0] - pts[:, 0].mean()
    y = pts[:, 1] - pts[:, 1].mean()
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y)))


def _schedule(cfg: HysteresisConfig, dt_max: float):
    spp = cfg.samples_per_period
    steps_per_period = spp * math.ceil(cfg.period / (dt_max * spp))
    return cfg.period / steps_per_period, steps_per_period // spp, steps_per_period


def run_hysteresis(config: HysteresisConfig, m0: MagnetizationField, params: PhysicalParams,
                   spec: Optional[ControlSpec] = None,
                   base: Optional[Equilibrium] = None) -> HysteresisLoop:
    """Drive the system for ``n_periods`` and return the loop traced in the last one.

    ``spec`` supplies gain and target when ``config.controlled``; its own
    drive, if any, is replaced by the one the config describes. ``base`` is
    the linearization point for ``model="linear"`` (default: nearest
    equilibrium to ``m0``).
    """
    drive = Drive(config.amplitude, config.omega, config.component) if config.amplitude > 0 else None
    if config.controlled:
        if spec is None:
            raise ValueError("controlled hysteresis run needs a ControlSpec")
        run_spec = ControlSpec(spec.gain, spec.target, drive)
    else:
        target = spec.target if spec is not None else nearest_equilibrium(m0)
        run_spec = ControlSpec(0.0, target, drive)

    disc = Discretization(m0.mesh)
    dt, stride, steps_per_period = _schedule(config, stable_dt(m0.mesh, params, run_spec))
    opts = IntegratorOptions(dt=dt, t_final=config.n_periods * config.period, record_stride=stride)
    if config.model == "linear":
        from .spectral import integrate_linear
        traj = integrate_linear(m0, params, run_spec, opts,
                                base=base or nearest_equilibrium(m0), disc=disc)
    else:
        if drive is not None:
            # the drive moves m off the sphere by design, so never project here
            opts = replace(opts, renormalize=False)
        traj = integrate(m0, params, run_spec, opts, disc)
    if traj.failed:
        from .errors import BlowUpError
        raise BlowUpError(traj.failure)

    spp = config.samples_per_period
    last = slice(len(traj.times) - spp - 1, len(traj.times))
    t = traj.times[last]
    u = config.amplitude * np.cos(config.omega * t)
    y = np.array([s.sample(config.observation_point, config.component) for s in traj.states[last]])
    samples = np.column_stack((u, y))
    return HysteresisLoop(samples, config.omega, loop_area(samples))


def _run_one(args):
    return run_hysteresis(*args)


def hysteresis_sweep(config: HysteresisConfig, m0: MagnetizationField, params: PhysicalParams,
                     spec: Optional[ControlSpec] = None, omegas: Sequence[float] = DEFAULT_OMEGAS,
                     n_jobs: int = 1, base: Optional[Equilibrium] = None) -> List[HysteresisLoop]:
    """One loop per frequency, ordered by decreasing omega regardless of ``n_jobs``."""
    omegas = sorted((float(w) for w in omegas), reverse=True)
    jobs = [(replace(config, omega=w), m0, params, spec, base) for w in omegas]
    if n_jobs == 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(_run_one, jobs))


@dataclass(frozen=True)
class PersistenceVerdict:
    persistent: bool
    ratio: float
    threshold: float
    table: tuple  # ((omega, area), ...) in decreasing omega

    @property
    def label(self) -> str:
        return "persistent" if self.persistent else "not persistent"


def persistence_test(loops: Sequence, threshold: float = PERSISTENCE_THRESHOLD,
                     omegas: Optional[Sequence[float]] = None) -> PersistenceVerdict:
    """Loops (or bare areas with ``omegas``) must come in strictly decreasing frequency."""
    if omegas is None:
        omegas = [lp.omega for lp in loops]
        areas = [lp.area for lp in loops]
    else:
        areas = [float(a) for a in loops]
    if len(areas) < 2 or len(areas) != len(omegas):
        raise ValueError("persistence test needs at least two loops at distinct frequencies")
    if any(b >= a for a, b in zip(omegas, omegas[1:])):
        raise ValueError("frequencies must be strictly decreasing")
    first, last = areas[0], areas[-1]
    ratio = last / first if first > 0 else (math.inf if last > 0 else 0.0)
    table = tuple((float(w), float(a)) for w, a in zip(omegas, areas))
    return PersistenceVerdict(bool(first > 0 and ratio >= threshold), ratio, threshold, table)


def loop_rows(loops: Sequence[HysteresisLoop]):
    """Long-format rows: omega, input, output, sample_index."""
    for lp in loops:
        for i, (u, y) in enumerate(lp.samples):
            yield lp.omega, u, y, i


def summary_rows(loops: Sequence[HysteresisLoop], verdict: PersistenceVerdict):
    for lp in loops:
        yield lp.omega, lp.area, verdict.label
