"""Continuum vocabulary: vectors, equilibria, physical parameters and the control law.

Vectors are plain ``numpy`` arrays of shape ``(3,)``; every function also
accepts stacks of shape ``(n, 3)`` and works row by row.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateMagnetizationError

UNIT_TOL = 1e-12


def as_vec3(v, name="vector") -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.shape != (3,):
        raise ValueError(f"{name} must have exactly three components, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite components: {a}")
    return a


def cross(u, v) -> np.ndarray:
    """Right-handed cross product, broadcasting over leading axes."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    out = np.empty(np.broadcast_shapes(u.shape, v.shape))
    u1, u2, u3 = u[..., 0], u[..., 1], u[..., 2]
    v1, v2, v3 = v[..., 0], v[..., 1], v[..., 2]
    out[..., 0] = u2 * v3 - u3 * v2
    out[..., 1] = u3 * v1 - u1 * v3
    out[..., 2] = u1 * v2 - u2 * v1
    return out


def double_cross(m, h) -> np.ndarray:
    """``m x (m x h)`` in the expanded form ``m (m.h) - h |m|^2``."""
    m = np.asarray(m, dtype=float)
    h = np.asarray(h, dtype=float)
    mh = np.sum(m * h, axis=-1)[..., None]
    mm = np.sum(m * m, axis=-1)[..., None]
    return m * mh - h * mm


def project_to_sphere(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    norms = np.linalg.norm(m, axis=-1)
    if np.any(norms == 0.0) or not np.all(np.isfinite(norms)):
        raise DegenerateMagnetizationError("degenerate magnetization")
    return m / norms[..., None]


@dataclass(frozen=True)
class Equilibrium:
    """A spatially constant unit magnetization ``a`` (a member of the equilibrium set)."""

    a: np.ndarray

    def __post_init__(self):
        a = as_vec3(self.a, "equilibrium")
        if abs(np.linalg.norm(a) - 1.0) > UNIT_TOL:
            raise ValueError(f"equilibrium must be a unit vector, |a| = {np.linalg.norm(a):.16g}")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    def __eq__(self, other):
        return isinstance(other, Equilibrium) and np.array_equal(self.a, other.a)

    def __hash__(self):
        return hash(tuple(self.a))

    def __repr__(self):
        return f"Equilibrium({self.a.tolist()})"


@dataclass(frozen=True)
class PhysicalParams:
    nu: float = 0.02
    length: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.nu) and self.nu >= 0):
            raise ValueError(f"nu must be >= 0, got {self.nu}")
        if not (math.isfinite(self.length) and self.length > 0):
            raise ValueError(f"length must be > 0, got {self.length}")


@dataclass(frozen=True)
class Drive:
    """Spatially uniform periodic input ``amplitude * cos(omega t)`` on one component (1-based)."""

    amplitude: float
    omega: float
    component: int = 1

    def __post_init__(self):
        if not (math.isfinite(self.amplitude) and self.amplitude >= 0):
            raise ValueError(f"drive amplitude must be >= 0, got {self.amplitude}")
        if not (math.isfinite(self.omega) and self.omega > 0):
            raise ValueError(f"drive omega must be > 0, got {self.omega}")
        if self.component not in (1, 2, 3):
            raise ValueError(f"drive component must be 1, 2 or 3, got {self.component}")

    def value(self, t: float) -> np.ndarray:
        u = np.zeros(3)
        u[self.component - 1] = self.amplitude * math.cos(self.omega * t)
        return u


@dataclass(frozen=True)
class ControlSpec:
    gain: float
    target: Equilibrium
    drive: Optional[Drive] = field(default=None)

    def __post_init__(self):
        if not (math.isfinite(self.gain) and self.gain >= 0):
            raise ValueError(f"gain must be >= 0, got {self.gain}")
        if not isinstance(self.target, Equilibrium):
            object.__setattr__(self, "target", Equilibrium(self.target))

    @property
    def is_feedback(self) -> bool:
        return self.gain > 0

    @property
    def is_driven(self) -> bool:
        return self.drive is not None and self.drive.amplitude > 0


def control_input(spec: ControlSpec, m, t: float) -> np.ndarray:
    """Feedback ``k (r - m)`` plus the additive periodic drive, if any."""
    m = np.asarray(m, dtype=float)
    u = spec.gain * (spec.target.a - m)
    if spec.drive is not None:
        u = u + spec.drive.value(t)
    return u


def gain_threshold(params: PhysicalParams) -> float:
    """Sufficient gain for global stability of the closed loop: ``8 nu L^4``."""
    return 8.0 * params.nu * params.length**4
