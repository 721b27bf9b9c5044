"""Spectrum of the linearization ``A z = nu z_xx + a x z_xx`` and the linear closed loop."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.linalg

from .discretization import Discretization, MagnetizationField, Mesh
from .integrator import IntegratorOptions, Trajectory, check_step_size, march
from .model import ControlSpec, Equilibrium, PhysicalParams, control_input

FAMILIES = ("zero", "lambda2_plus", "lambda2_minus", "lambda3",
            "lambda4_plus", "lambda4_minus", "lambda5")


@dataclass(frozen=True)
class EigenvalueFamily:
    label: str
    n: int
    value: complex


def analytic_eigenvalues(params: PhysicalParams, n_max: int) -> List[EigenvalueFamily]:
    """The zero eigenvalue followed by the odd-mode and even-mode families for ``n = 0..n_max``.

    Odd modes use wavenumber ``(1 + 2n) pi / L``; even modes ``2n pi / L``
    (so ``n = 0`` of the even families repeats the zero eigenvalue).
    """
    if n_max < 0:
        raise ValueError(f"n_max must be >= 0, got {n_max}")
    nu, L = params.nu, params.length
    out = [EigenvalueFamily("zero", 0, 0j)]
    for n in range(n_max + 1):
        odd = (1 + 2 * n) ** 2 * math.pi**2 / L**2
        even = (2 * n) ** 2 * math.pi**2 / L**2
        out += [
            EigenvalueFamily("lambda2_plus", n, complex(-odd * nu, odd)),
            EigenvalueFamily("lambda2_minus", n, complex(-odd * nu, -odd)),
            EigenvalueFamily("lambda3", n, complex(-odd * nu, 0.0)),
            EigenvalueFamily("lambda4_plus", n, complex(-even * nu, even)),
            EigenvalueFamily("lambda4_minus", n, complex(-even * nu, -even)),
            EigenvalueFamily("lambda5", n, complex(-even * nu, 0.0)),
        ]
    return out


def analytic_targets(params: PhysicalParams, n_max: int) -> np.ndarray:
    """Distinct nonzero analytic eigenvalues, sorted by magnitude."""
    # apart from zero the families never coincide, so exact values deduplicate cleanly
    vals = {f.value for f in analytic_eigenvalues(params, n_max) if f.value != 0}
    return np.array(sorted(vals, key=lambda z: (abs(z), z.imag)))


def cross_matrix(a) -> np.ndarray:
    a1, a2, a3 = np.asarray(a, dtype=float)
    return np.array([[0.0, -a3, a2], [a3, 0.0, -a1], [-a2, a1, 0.0]])


@dataclass
class LinearOperator:
    """Stacked component-major operator: ``mass @ dz/dt = stiff @ z``.

    ``matrix`` is the explicit ``(nu I + [a]x) (x) L_h`` with ``L_h = -M^{-1} K``.
    """
    mass: np.ndarray
    stiff: np.ndarray
    matrix: np.ndarray
    block: np.ndarray
    disc: Discretization


def assemble_linear_operator(a: Equilibrium, params: PhysicalParams, mesh: Mesh,
                             lumped: bool = True) -> LinearOperator:
    disc = Discretization(mesh, lumped=lumped)
    block = params.nu * np.eye(3) + cross_matrix(a.a)
    if lumped:
        mass1 = np.diag(disc.lumped_mass)
    else:
        mass1 = disc.mass.to_dense()
    k1 = disc.stiffness.to_dense()
    return LinearOperator(
        mass=np.kron(np.eye(3), mass1),
        stiff=-np.kron(block, k1),
        matrix=np.kron(block, disc.laplacian),
        block=block,
        disc=disc,
    )


def discrete_eigenvalues(op: LinearOperator) -> np.ndarray:
    """Generalized eigenvalues of ``stiff v = lambda mass v``, sorted by magnitude."""
    vals = scipy.linalg.eigvals(op.stiff, op.mass)
    return vals[np.argsort(np.abs(vals), kind="stable")]


@dataclass
class SpectrumMatch:
    zero_modes: np.ndarray
    pairs: list  # (analytic, discrete, relative error)
    unmatched: np.ndarray = field(default_factory=lambda: np.array([]))

    def relative_errors(self, count: Optional[int] = None) -> np.ndarray:
        errs = np.array([p[2] for p in self.pairs])
        return errs if count is None else errs[:count]


def match_spectrum(discrete: np.ndarray, params: PhysicalParams, n_max: Optional[int] = None,
                   zero_tol: float = 1e-10, match_tol: float = 0.10) -> SpectrumMatch:
    """Pair each analytic eigenvalue with its nearest unused discrete one.

    Analytic values are visited from the smallest magnitude up; a pair counts
    when the relative distance is within ``match_tol``. Discrete values left
    over are reported in ``unmatched``.
    """
    discrete = np.asarray(discrete, dtype=complex)
    is_zero = np.abs(discrete) <= zero_tol
    zero_modes = discrete[is_zero]
    rest = list(discrete[~is_zero])
    if n_max is None:
        n_max = int(math.isqrt(len(discrete))) + 1
    pairs = []
    for lam in analytic_targets(params, n_max):
        if not rest:
            break
        dist = np.abs(np.array(rest) - lam)
        j = int(np.argmin(dist))
        rel = float(dist[j] / abs(lam))
        if rel <= match_tol:
            pairs.append((complex(lam), complex(rest.pop(j)), rel))
    return SpectrumMatch(zero_modes, pairs, np.array(rest))


def smallest_real_mode_errors(params, n_elements, count=5, a=None, lumped=True):
    """Relative errors of the ``count`` smallest-magnitude nonzero analytic eigenvalues."""
    a = a or Equilibrium(np.array([1.0, 0.0, 0.0]))
    mesh = Mesh(n_elements, params.length)
    match = match_spectrum(discrete_eigenvalues(assemble_linear_operator(a, params, mesh, lumped)),
                           params)
    return match.relative_errors(count), match


@dataclass(frozen=True)
class LinearState:
    values: np.ndarray
    base: Equilibrium


def linear_rhs_values(z, lap, block, spec: Optional[ControlSpec], t):
    out = (lap @ z) @ block.T
    if spec is not None:
        out += control_input(spec, z, t)
    return out


def integrate_linear(z0, params: PhysicalParams, spec: Optional[ControlSpec],
                     opts: IntegratorOptions, mesh: Optional[Mesh] = None,
                     base: Optional[Equilibrium] = None,
                     disc: Optional[Discretization] = None) -> Trajectory:
    """RK4 integration of ``z_t = nu z_xx + a x z_xx + k (r - z) (+ drive)``.

    ``z0`` may be a :class:`LinearState` (carrying the base equilibrium) or a
    :class:`MagnetizationField` together with ``base``.
    """
    from . import diagnostics as dg

    if isinstance(z0, LinearState):
        base = z0.base
        if mesh is None:
            raise ValueError("a mesh is required with a LinearState")
        z0 = MagnetizationField(z0.values, mesh)
    if base is None:
        raise ValueError("linearization point (base) is required")
    disc = disc or Discretization(z0.mesh)
    check_step_size(opts.dt, z0.mesh, params, spec, opts.allow_large_dt, disc.lumped)
    block = params.nu * np.eye(3) + cross_matrix(base.a)
    lap = disc.laplacian
    target = spec.target if spec is not None else base

    def f(z, t):
        return linear_rhs_values(z, lap, block, spec, t)

    def diagnose(t, z):
        return dg.record(t, MagnetizationField(z, z0.mesh), target, disc, linear=True)

    traj = march(z0, f, opts, diagnose, renormalize=False)
    traj.meta.update(model="linear", base=base.a.tolist(), dt=opts.dt, stride=opts.stride(),
                     target=target.a.tolist())
    return traj
