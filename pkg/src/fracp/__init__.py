"""Lattice discretisation of nonlocal p-Laplace equations and empirical Harnack-type estimates."""
from .energy import (DiscreteEnergy, QuadratureScheme, apply_operator, classify_solution, energy,
                     energy_gradient, form, seminorm)
from .errors import FracpError, PreconditionError, SingularityError, ValidationError
from .kernel import KernelSpec, eval_kernel, kernel_matrix, symmetric_part, upper_envelope, validate_bounds
from .lattice import Ball, GridFunction, Lattice, Region, ball_region, box_region
from .solver import SolverConfig, SolveResult, solve_dirichlet, solve_linear_p2
from .tail import TailValue, tail, tail_offset_d

__version__ = "0.1.0"
