"""Property sweeps behind the ``verify`` scenario.

Each check returns a :class:`CheckResult`; thresholds are fixed here so the
CLI summary and the test-suite agree.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import diagnostics as dg
from .discretization import Discretization, MagnetizationField, rhs, rhs_semilinear
from .model import Equilibrium, PhysicalParams, project_to_sphere
from .spectral import smallest_real_mode_errors

LEMMA_SAFETY = 25.0
ROUNDOFF = 1e-12
POINCARE_SLACK = 0.05
CALIBRATION_ELEMENTS = 32


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    threshold: float
    passed: bool
    detail: str = ""


def calibration_field(mesh) -> MagnetizationField:
    """Smooth, non-planar, Neumann-compatible unit field used to fix lemma constants."""
    x = mesh.nodes / mesh.length
    raw = np.column_stack((1 + 0.3 * np.cos(np.pi * x), 0.5 * np.cos(2 * np.pi * x),
                           0.4 * np.cos(3 * np.pi * x)))
    return MagnetizationField(project_to_sphere(raw), mesh)


def _cross_scales(field, disc):
    m = field.values
    w = disc.laplacian @ m
    cx = math.sqrt(dg.cross_grad_norm_sq(field))
    cxx = math.sqrt(dg.integrate_nodal(field, np.sum(dg.cross(m, w) ** 2, axis=1)))
    return cx, cxx


def zero_integral_residual(field, r, disc):
    """``|int (m - r).(m x m_xx)|`` divided by ``||m - r|| ||m x m_xx||``."""
    value = abs(dg.check_lemma_zero_integral(field, r, disc))
    _, cxx = _cross_scales(field, disc)
    scale = math.sqrt(dg.l2_norm_sq(field, r.a)) * cxx
    return value / scale if scale > 0 else 0.0


def product_rule_residual(field, disc):
    """Product-rule identity residual divided by ``||m x m_x|| ||m x m_xx||``."""
    lhs, rhs_ = dg.check_product_rule_identity(field, disc)
    cx, cxx = _cross_scales(field, disc)
    scale = cx * cxx
    return abs(lhs - rhs_) / scale if scale > 0 else 0.0


def calibrate(n_elements: int = CALIBRATION_ELEMENTS, length: float = 1.0):
    """Constants ``C`` with residual = ``C h^2`` on the calibration field."""
    disc = Discretization.uniform(n_elements, length)
    f = calibration_field(disc.mesh)
    h2 = disc.mesh.h**2
    r = Equilibrium(np.array([1.0, 0.0, 0.0]))
    return {"zero_integral": zero_integral_residual(f, r, disc) / h2,
            "product_rule": product_rule_residual(f, disc) / h2}


def lemma_tolerance(constant: float, h: float) -> float:
    return LEMMA_SAFETY * constant * h**2 + ROUNDOFF


def check_equilibria(n: int = 100, n_elements: int = 12, seed: int = 0,
                     params: PhysicalParams = PhysicalParams()) -> CheckResult:
    rng = np.random.default_rng(seed)
    disc = Discretization.uniform(n_elements, params.length)
    worst = 0.0
    for _ in range(n):
        a = project_to_sphere(rng.standard_normal(3))
        f = MagnetizationField.uniform(disc.mesh, a)
        worst = max(worst, float(np.max(np.abs(rhs(f, params, disc).values))))
    return CheckResult("equilibrium_fidelity", worst, 1e-13, worst <= 1e-13,
                       f"{n} random unit constants")


def lemma_sweeps(n_fields: int = 1000, n_elements: int = 128, seed: int = 0, length: float = 1.0):
    """Cross bound, zero-integral, 4L^2 inequality and product-rule identity over random fields."""
    rng = np.random.default_rng(seed)
    disc = Discretization.uniform(n_elements, length)
    consts = calibrate(length=length)
    h = disc.mesh.h
    tol_zero = lemma_tolerance(consts["zero_integral"], h)
    tol_prod = lemma_tolerance(consts["product_rule"], h)
    bound = 4 * length**2 + POINCARE_SLACK
    cross_gap, zero_worst, ratio_worst, prod_worst = -math.inf, 0.0, 0.0, 0.0
    for _ in range(n_fields):
        f = dg.random_cosine_field(disc.mesh, rng)
        a = Equilibrium(project_to_sphere(rng.standard_normal(3)))
        lhs, rhs_ = dg.check_cross_bound(a, f)
        cross_gap = max(cross_gap, lhs - rhs_)
        zero_worst = max(zero_worst, zero_integral_residual(f, a, disc))
        ratio = dg.check_lemma_poincare_cross(f, disc)
        if math.isfinite(ratio):
            ratio_worst = max(ratio_worst, ratio)
        prod_worst = max(prod_worst, product_rule_residual(f, disc))
    return [
        CheckResult("lemma_cross_bound", cross_gap, 1e-12, cross_gap <= 1e-12,
                    "max ||a x m|| - ||m||"),
        CheckResult("lemma_zero_integral", zero_worst, tol_zero, zero_worst <= tol_zero,
                    "relative to ||m - r|| ||m x m_xx||"),
        CheckResult("lemma_poincare_cross", ratio_worst, bound, ratio_worst <= bound,
                    "max ||m x m_x|| / ||m x m_xx||"),
        CheckResult("lemma_product_rule", prod_worst, tol_prod, prod_worst <= tol_prod,
                    "relative to ||m x m_x|| ||m x m_xx||"),
    ]


def observed_orders(errors):
    errors = np.asarray(errors, dtype=float)
    return np.log2(errors[:-1] / errors[1:])


ORDER_BAND = (1.7, 2.3)


def semilinear_agreement(levels=(16, 32, 64), params: PhysicalParams = PhysicalParams()):
    """Max-norm gap between the two right-hand sides on a unit-sphere field per level."""
    gaps = []
    for n in levels:
        disc = Discretization.uniform(n, params.length)
        f = calibration_field(disc.mesh)
        gaps.append(float(np.max(np.abs(rhs(f, params, disc).values
                                        - rhs_semilinear(f, params, disc).values))))
    return np.array(gaps)


def check_semilinear(levels=(16, 32, 64), params: PhysicalParams = PhysicalParams()) -> CheckResult:
    orders = observed_orders(semilinear_agreement(levels, params))
    ok = bool(np.all((orders >= ORDER_BAND[0]) & (orders <= ORDER_BAND[1])))
    return CheckResult("semilinear_order", float(orders.min()), ORDER_BAND[0], ok,
                       "observed orders " + " ".join(f"{o:.3f}" for o in orders))


def check_spectrum(params: PhysicalParams = PhysicalParams(), coarse=32, fine=64, count=5):
    e_fine, match = smallest_real_mode_errors(params, fine, count)
    e_coarse, _ = smallest_real_mode_errors(params, coarse, count)
    zeros = match.zero_modes
    orders = observed_orders(np.vstack([e_coarse, e_fine])).ravel()
    zmax = float(np.max(np.abs(zeros))) if len(zeros) else math.inf
    return [
        CheckResult("spectrum_zero_multiplicity", float(len(zeros)), 3.0, len(zeros) == 3,
                    f"max |lambda| = {zmax:.3g}"),
        CheckResult("spectrum_low_modes", float(e_fine.max()), 0.02,
                    len(e_fine) == count and bool(e_fine.max() <= 0.02),
                    f"{count} smallest nonzero modes at {fine} elements"),
        CheckResult("spectrum_order", float(orders.min()), ORDER_BAND[0],
                    bool(np.all((orders >= ORDER_BAND[0]) & (orders <= ORDER_BAND[1]))),
                    f"{coarse}->{fine} elements"),
    ]


def run_all(n_fields=1000, n_elements=128, n_equilibria=100, seed=0,
            params: PhysicalParams = PhysicalParams()):
    results = [check_equilibria(n_equilibria, seed=seed, params=params)]
    results += lemma_sweeps(n_fields, n_elements, seed, params.length)
    results.append(check_semilinear(params=params))
    results += check_spectrum(params)
    return results
