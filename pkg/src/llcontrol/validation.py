"""Input checks shared by the estimators, in the spirit of ``sklearn.utils.validation``."""
from __future__ import annotations

import numbers

import numpy as np

from .discretization import MagnetizationField, Mesh
from .model import Equilibrium


def check_scalar(x, name, *, min_val=None, max_val=None, include_min=True, target_type=numbers.Real):
    if isinstance(x, bool) or not isinstance(x, target_type):
        raise TypeError(f"{name} must be {target_type.__name__}, got {type(x).__name__}")
    if min_val is not None and (x < min_val or (not include_min and x == min_val)):
        op = ">=" if include_min else ">"
        raise ValueError(f"{name} must be {op} {min_val}, got {x}")
    if max_val is not None and x > max_val:
        raise ValueError(f"{name} must be <= {max_val}, got {x}")
    return x


def check_equilibrium(a, name="target") -> Equilibrium:
    if isinstance(a, Equilibrium):
        return a
    try:
        return Equilibrium(np.asarray(a, dtype=float))
    except ValueError as exc:
        raise ValueError(f"{name}: {exc}") from None


def check_field(X, mesh: Mesh, *, unit=False, tol=1e-6) -> MagnetizationField:
    """Accept a field, an ``(n_nodes, 3)`` array, or a constant 3-vector."""
    if isinstance(X, MagnetizationField):
        if X.mesh != mesh:
            raise ValueError(f"field lives on {X.mesh}, expected {mesh}")
        field = X
    else:
        arr = np.asarray(X, dtype=float)
        if arr.shape == (3,):
            arr = np.tile(arr, (mesh.n_nodes, 1))
        if arr.shape != (mesh.n_nodes, 3):
            raise ValueError(f"expected shape ({mesh.n_nodes}, 3) or (3,), got {arr.shape}")
        field = MagnetizationField(arr, mesh)
    if unit:
        drift = np.max(np.abs(np.linalg.norm(field.values, axis=1) - 1.0))
        if drift > tol:
            raise ValueError(f"field must be pointwise unit norm (max drift {drift:.3g})")
    return field
