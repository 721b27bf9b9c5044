"""Simulation and verification toolkit for the 1D Landau-Lifshitz equation
under proportional affine feedback."""

__version__ = "0.1.0"

from .discretization import (Discretization, MagnetizationField, Mesh, assemble_mass,  # noqa: E402
                             assemble_stiffness, build_mesh, discrete_second_derivative, rhs,
                             rhs_semilinear)
from .estimators import HysteresisSweep, LandauLifshitzSimulator, LinearizedSpectrum  # noqa: E402
from .integrator import IntegratorOptions, Trajectory, integrate, step_rk4  # noqa: E402
from .model import (ControlSpec, Drive, Equilibrium, PhysicalParams, control_input, cross,  # noqa: E402
                    double_cross, gain_threshold, project_to_sphere)

__all__ = [
    "ControlSpec", "Discretization", "Drive", "Equilibrium", "HysteresisSweep", "IntegratorOptions",
    "LandauLifshitzSimulator", "LinearizedSpectrum",
    "MagnetizationField", "Mesh", "PhysicalParams", "Trajectory", "assemble_mass",
    "assemble_stiffness", "build_mesh", "control_input", "cross", "discrete_second_derivative",
    "double_cross", "gain_threshold", "integrate", "project_to_sphere", "rhs", "rhs_semilinear",
    "step_rk4",
]
