"""Linear-spline Galerkin discretization of [0, L] with natural Neumann conditions.

The second derivative is recovered from a mass solve ``M w = -K m`` and the
nonlinear terms are then evaluated node by node. By default ``M`` is the
row-summed (lumped) mass: with nodal collocation it is the only choice for
which ``sum_i h_i w_i . (m_i x w_i) = 0`` holds exactly, so the discrete
exchange energy and the closed-loop Lyapunov value decay monotonically as in
the continuum. The consistent mass is available with ``lumped=False``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

from .errors import BlowUpError, MeshError, SemilinearDomainError
from .model import ControlSpec, PhysicalParams, control_input, cross


@dataclass(frozen=True)
class Mesh:
    n_elements: int
    length: float

    @property
    def n_nodes(self) -> int:
        return self.n_elements + 1

    @property
    def h(self) -> float:
        return self.length / self.n_elements

    @cached_property
    def nodes(self) -> np.ndarray:
        x = np.linspace(0.0, self.length, self.n_nodes)
        x.setflags(write=False)
        return x


def build_mesh(n_elements: int, length: float = 1.0) -> Mesh:
    if int(n_elements) != n_elements or n_elements < 2:
        raise MeshError(f"mesh too coarse: need at least 2 elements, got {n_elements}")
    if not length > 0:
        raise MeshError(f"mesh length must be > 0, got {length}")
    return Mesh(int(n_elements), float(length))


@dataclass(frozen=True)
class TridiagonalMatrix:
    """Symmetric-or-not tridiagonal matrix; ``sub``/``sup`` have ``n - 1`` entries."""

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray

    @property
    def n(self) -> int:
        return len(self.diag)

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.sub, -1) + np.diag(self.sup, 1)

    def matvec(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        out = self.diag.reshape((-1,) + (1,) * (v.ndim - 1)) * v
        off = (-1,) + (1,) * (v.ndim - 1)
        out[1:] += self.sub.reshape(off) * v[:-1]
        out[:-1] += self.sup.reshape(off) * v[1:]
        return out

    def upper_banded(self) -> np.ndarray:
        ab = np.zeros((2, self.n))
        ab[0, 1:] = self.sup
        ab[1] = self.diag
        return ab


def assemble_mass(mesh: Mesh) -> TridiagonalMatrix:
    h = mesh.h
    diag = np.full(mesh.n_nodes, 4.0 * h / 6.0)
    diag[0] = diag[-1] = 2.0 * h / 6.0
    off = np.full(mesh.n_elements, h / 6.0)
    return TridiagonalMatrix(off.copy(), diag, off.copy())


def assemble_stiffness(mesh: Mesh) -> TridiagonalMatrix:
    inv_h = 1.0 / mesh.h
    diag = np.full(mesh.n_nodes, 2.0 * inv_h)
    diag[0] = diag[-1] = inv_h
    off = np.full(mesh.n_elements, -inv_h)
    return TridiagonalMatrix(off.copy(), diag, off.copy())


class Discretization:
    """Mesh plus assembled matrices and the mass-solved Neumann Laplacian."""

    def __init__(self, mesh: Mesh, lumped: bool = True):
        self.mesh = mesh
        self.lumped = lumped
        self.mass = assemble_mass(mesh)
        self.stiffness = assemble_stiffness(mesh)
        self._mass_chol = cholesky_banded(self.mass.upper_banded())

    @classmethod
    def uniform(cls, n_elements: int, length: float = 1.0, lumped: bool = True) -> "Discretization":
        return cls(build_mesh(n_elements, length), lumped=lumped)

    @cached_property
    def lumped_mass(self) -> np.ndarray:
        d = self.mass.diag.copy()
        d[1:] += self.mass.sub
        d[:-1] += self.mass.sup
        return d

    def solve_mass(self, rhs) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        if self.lumped:
            return rhs / self.lumped_mass.reshape((-1,) + (1,) * (rhs.ndim - 1))
        return cho_solve_banded((self._mass_chol, False), rhs)

    @cached_property
    def laplacian(self) -> np.ndarray:
        """Dense ``-M^{-1} K``; applying it equals the tridiagonal solve."""
        lap = -self.solve_mass(self.stiffness.to_dense())
        lap.setflags(write=False)
        return lap

    @property
    def max_laplacian_eigenvalue(self) -> float:
        """Upper bound on the spectrum of ``M^{-1} K`` (approached by the alternating mode)."""
        return (4.0 if self.lumped else 12.0) / self.mesh.h**2


@dataclass(frozen=True)
class MagnetizationField:
    values: np.ndarray
    mesh: Mesh

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.mesh.n_nodes, 3):
            raise ValueError(
                f"field needs shape ({self.mesh.n_nodes}, 3) for this mesh, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field has non-finite entries")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, mesh: Mesh, fn) -> "MagnetizationField":
        return cls(np.asarray(fn(mesh.nodes), dtype=float), mesh)

    @classmethod
    def uniform(cls, mesh: Mesh, a) -> "MagnetizationField":
        return cls(np.tile(np.asarray(a, dtype=float), (mesh.n_nodes, 1)), mesh)

    def sample(self, x: float, component: Optional[int] = None):
        """Linear-spline interpolation at ``x``; ``component`` is 1-based."""
        if not 0.0 <= x <= self.mesh.length:
            raise ValueError(f"x = {x} lies outside [0, {self.mesh.length}]")
        cols = range(3) if component is None else [component - 1]
        out = np.array([np.interp(x, self.mesh.nodes, self.values[:, c]) for c in cols])
        return out if component is None else float(out[0])


def _check_disc(field: MagnetizationField, disc: Discretization):
    if field.mesh != disc.mesh:
        raise ValueError("field and discretization live on different meshes")


def discrete_second_derivative(field: MagnetizationField, disc: Discretization) -> MagnetizationField:
    _check_disc(field, disc)
    return MagnetizationField(disc.laplacian @ field.values, field.mesh)


def _raise_if_nonfinite(values: np.ndarray, t):
    bad = ~np.all(np.isfinite(values), axis=1)
    if np.any(bad):
        node = int(np.argmax(bad))
        raise BlowUpError(f"numerical blow-up at node {node} (t={t})", node=node, t=t)


def rhs_values(m: np.ndarray, lap: np.ndarray, nu: float,
               spec: Optional[ControlSpec], t: float) -> np.ndarray:
    """Array kernel behind :func:`rhs`; used directly by the time stepper.

    No finiteness check here: the stepper checks each completed step.
    """
    w = lap @ m
    mw = cross(m, w)
    out = mw - nu * cross(m, mw)
    if spec is not None:
        out += control_input(spec, m, t)
    return out


def rhs(field: MagnetizationField, params: PhysicalParams, disc: Discretization,
        spec: Optional[ControlSpec] = None, t: float = 0.0) -> MagnetizationField:
    """``m x m_xx - nu m x (m x m_xx) + u`` at every node."""
    _check_disc(field, disc)
    out = rhs_values(field.values, disc.laplacian, params.nu, spec, t)
    _raise_if_nonfinite(out, t)
    return MagnetizationField(out, field.mesh)


def nodal_gradient(field: MagnetizationField) -> np.ndarray:
    """Centered differences inside, one-sided differences at the two ends."""
    return np.gradient(field.values, field.mesh.h, axis=0, edge_order=1)


def rhs_semilinear(field: MagnetizationField, params: PhysicalParams, disc: Discretization,
                   spec: Optional[ControlSpec] = None, t: float = 0.0) -> MagnetizationField:
    """``nu m_xx + m x m_xx + nu |m_x|^2 m``; only valid on the unit sphere."""
    _check_disc(field, disc)
    m = field.values
    drift = np.max(np.abs(np.linalg.norm(m, axis=1) - 1.0))
    if drift > 1e-3:
        raise SemilinearDomainError(
            f"semilinear form invalid off the sphere (max | |m| - 1 | = {drift:.3g})")
    w = disc.laplacian @ m
    mx2 = np.sum(nodal_gradient(field) ** 2, axis=1)
    out = params.nu * w + cross(m, w) + params.nu * mx2[:, None] * m
    if spec is not None:
        out += control_input(spec, m, t)
    _raise_if_nonfinite(out, t)
    return MagnetizationField(out, field.mesh)


__all__ = [
    "Mesh", "TridiagonalMatrix", "MagnetizationField", "Discretization",
    "build_mesh", "assemble_mass", "assemble_stiffness", "discrete_second_derivative",
    "rhs", "rhs_semilinear", "rhs_values", "nodal_gradient",
]
