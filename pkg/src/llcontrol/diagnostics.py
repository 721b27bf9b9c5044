"""Norms, Lyapunov functionals, decay-rate fitting and executable lemma checks.

L2 quantities use the trapezoid rule on nodal values. Derivative terms are
integrated exactly element by element, since the spline derivative is
constant on each element.
"""
from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .discretization import Discretization, MagnetizationField, nodal_gradient
from .errors import RateUndefinedError
from .model import Equilibrium, cross

INF_RATIO = math.inf


def _trapezoid_weights(field: MagnetizationField) -> np.ndarray:
    w = np.full(field.mesh.n_nodes, field.mesh.h)
    w[0] = w[-1] = 0.5 * field.mesh.h
    return w


def integrate_nodal(field: MagnetizationField, f: np.ndarray) -> float:
    """Trapezoid integral of nodal scalars ``f`` over the field's mesh."""
    return float(_trapezoid_weights(field) @ f)


def l2_norm_sq(field: MagnetizationField, offset=None) -> float:
    v = field.values if offset is None else field.values - offset
    return integrate_nodal(field, np.sum(v * v, axis=1))


def grad_norm_sq(field: MagnetizationField) -> float:
    """``||m_x||^2``: exact for the piecewise linear interpolant."""
    d = np.diff(field.values, axis=0)
    return float(np.sum(d * d) / field.mesh.h)


def l2_norm(field: MagnetizationField) -> float:
    return math.sqrt(l2_norm_sq(field))


def h1_norm(field: MagnetizationField) -> float:
    return math.sqrt(l2_norm_sq(field) + grad_norm_sq(field))


def exchange_energy(field: MagnetizationField) -> float:
    return 0.5 * grad_norm_sq(field)


def lyapunov_V(field: MagnetizationField, r: Equilibrium) -> float:
    """``1/2 ||m - r||^2 + 1/2 ||m_x||^2``."""
    return 0.5 * l2_norm_sq(field, r.a) + 0.5 * grad_norm_sq(field)


def nearest_equilibrium(field: MagnetizationField) -> Equilibrium:
    """The constant unit field closest to ``field`` in L2: its normalized mean.

    When the mean vanishes every equilibrium is equally far and ``e1`` is
    returned.
    """
    mean = _trapezoid_weights(field) @ field.values
    norm = np.linalg.norm(mean)
    if norm < 1e-12:
        return Equilibrium(np.array([1.0, 0.0, 0.0]))
    return Equilibrium(mean / norm)


def max_norm_drift(field: MagnetizationField) -> float:
    return float(np.max(np.abs(np.linalg.norm(field.values, axis=1) - 1.0)))


def record(t: float, field: MagnetizationField, target: Optional[Equilibrium],
           disc: Optional[Discretization] = None, linear: bool = False):
    """One diagnostic sample.

    With a target, distances and ``V`` refer to it. Without one, distances
    are to the equilibrium set and the Lyapunov value is the exchange energy.
    For linear runs the Lyapunov value is ``1/2 ||z - r||^2``.
    """
    from .integrator import DiagnosticRecord

    ref = target if target is not None else nearest_equilibrium(field)
    l2sq = l2_norm_sq(field, ref.a)
    gsq = grad_norm_sq(field)
    if target is None:
        lyap = 0.5 * gsq
    elif linear:
        lyap = 0.5 * l2sq
    else:
        lyap = 0.5 * (l2sq + gsq)
    return DiagnosticRecord(
        t=float(t),
        l2_distance_to_target=math.sqrt(l2sq),
        h1_distance_to_target=math.sqrt(l2sq + gsq),
        lyapunov=lyap,
        max_norm_drift=max_norm_drift(field),
        exchange_energy=0.5 * gsq,
    )


def decay_rate_fit(traj, window_fraction: float = 0.75) -> float:
    """Exponential rate of ``h1_distance^2`` over the trailing window (positive means decay)."""
    if not 0.0 < window_fraction < 1.0:
        raise ValueError(f"window_fraction must lie in (0, 1), got {window_fraction}")
    t = np.asarray(traj.times, dtype=float)
    y = np.array([d.h1_distance_to_target for d in traj.diagnostics]) ** 2
    n = len(t)
    start = int(math.floor(n * (1.0 - window_fraction)))
    t, y = t[start:], y[start:]
    if len(t) < 10:
        raise ValueError(f"need at least 10 samples in the fit window, got {len(t)}")
    if np.any(y <= 0.0):
        raise RateUndefinedError("trajectory reached target; rate undefined")
    slope = np.polyfit(t, np.log(y), 1)[0]
    return float(-slope)


def _second_derivative(field, disc):
    disc = disc or Discretization(field.mesh)
    return disc.laplacian @ field.values


def check_lemma_zero_integral(field: MagnetizationField, r: Equilibrium,
                              disc: Optional[Discretization] = None) -> float:
    """Quadrature of ``(m - r) . (m x m_xx)``; zero in the continuum."""
    m = field.values
    w = _second_derivative(field, disc)
    return integrate_nodal(field, np.sum((m - r.a) * cross(m, w), axis=1))


def cross_grad_norm_sq(field: MagnetizationField) -> float:
    """``||m x m_x||^2`` integrated exactly on each element (integrand is quadratic)."""
    m = field.values
    d = np.diff(m, axis=0) / field.mesh.h
    p = cross(m[:-1], d)
    q = cross(m[1:], d)
    per_elem = np.sum(p * p + p * q + q * q, axis=1) / 3.0
    return float(field.mesh.h * per_elem.sum())


def check_lemma_poincare_cross(field: MagnetizationField,
                               disc: Optional[Discretization] = None) -> float:
    """``||m x m_x|| / ||m x m_xx||``; infinite when the denominator vanishes."""
    m = field.values
    w = _second_derivative(field, disc)
    den = math.sqrt(integrate_nodal(field, np.sum(cross(m, w) ** 2, axis=1)))
    if den < 1e-14:
        return INF_RATIO
    return math.sqrt(cross_grad_norm_sq(field)) / den


def check_cross_bound(a: Equilibrium, field: MagnetizationField):
    """Returns ``(||a x m||, ||m||)`` in L2."""
    axm = cross(np.broadcast_to(a.a, field.values.shape), field.values)
    lhs = math.sqrt(integrate_nodal(field, np.sum(axm * axm, axis=1)))
    return lhs, l2_norm(field)


def check_product_rule_identity(field: MagnetizationField,
                                disc: Optional[Discretization] = None):
    """``int (m x m_x).(m x m_xx) dx`` against ``1/2 [|m x m_x|^2]_0^L``."""
    m = field.values
    w = _second_derivative(field, disc)
    g = cross(m, nodal_gradient(field))
    lhs = integrate_nodal(field, np.sum(g * cross(m, w), axis=1))
    rhs = 0.5 * (float(g[-1] @ g[-1]) - float(g[0] @ g[0]))
    return lhs, rhs


def random_cosine_field(mesh, rng, n_modes: int = 4, unit: bool = True) -> MagnetizationField:
    """Random Neumann-compatible field: each component a cosine series with
    amplitudes decaying like ``1/j^2``, then normalized pointwise when ``unit``.

    Normalization keeps ``m_x = 0`` at both ends because every raw component
    already has zero slope there.
    """
    x = mesh.nodes / mesh.length
    j = np.arange(n_modes + 1)
    basis = np.cos(np.pi * np.outer(x, j))  # (n_nodes, n_modes + 1)
    coef = rng.standard_normal((n_modes + 1, 3)) / np.maximum(j, 1)[:, None] ** 2
    for _ in range(100):
        raw = basis @ coef
        if np.min(np.linalg.norm(raw, axis=1)) > 0.1 or not unit:
            break
        coef[0] = rng.standard_normal(3) * 2.0  # push the mean away from the origin
    else:
        raise RuntimeError("could not draw a field bounded away from zero")
    if unit:
        raw = raw / np.linalg.norm(raw, axis=1)[:, None]
    return MagnetizationField(raw, mesh)
