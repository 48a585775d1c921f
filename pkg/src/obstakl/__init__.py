"""Solver and measurement toolkit for heterogeneous quasilinear obstacle problems.

The package discretizes the zero-obstacle problem for fluxes of
p(x)-Laplacian type on uniform grids, solves it by projected relaxation
with active-set Newton acceleration or by penalized approximation, and
measures the quantitative behavior of the solution near the free
boundary: growth exponents, nondegeneracy, porosity, low-gradient layer
measures, box-counting interface estimates, second-order energies, and
discrete total variation / perimeter.
"""

__version__ = "0.1.0"

from .fields import (ExponentField, FieldFormatError, Grid, ScalarField,
                     VectorField, gradient, read_field_csv, write_field_csv)
from .operator import (AffineProfile, ConstantProfile, DiscreteOperator,
                       FuncProfile, GridProfile, OperatorSpec,
                       StructuralConstants, divergence_of_flux, flux,
                       flux_penalized, verify_structural)
from .solver import (SolveConfig, Solution, SolverError, complementarity_report,
                     heaviside_eps, solve_penalized, solve_vi, write_solution)
from .freeboundary import (FreeBoundaryReport, FreeBoundarySet, bv_norm,
                           energy_E_eps, extract_free_boundary,
                           growth_exponent_fit, hausdorff_box_count,
                           nondegeneracy_check, o_delta_measure,
                           perimeter_of_positivity, porosity_estimate,
                           w22_quotient_energy)
from .oracles import (Exact1DObstacle, ExactRadial, RescaleError,
                      blowup_operator, exact_1d, exact_radial, rescale_to_unit)
from .presets import PRESETS, build_preset

__all__ = [
    "__version__",
    "Grid", "ScalarField", "VectorField", "ExponentField", "FieldFormatError",
    "gradient", "read_field_csv", "write_field_csv",
    "OperatorSpec", "StructuralConstants", "DiscreteOperator",
    "ConstantProfile", "AffineProfile", "GridProfile", "FuncProfile",
    "flux", "flux_penalized", "divergence_of_flux", "verify_structural",
    "SolveConfig", "Solution", "SolverError", "solve_vi", "solve_penalized",
    "complementarity_report", "heaviside_eps", "write_solution",
    "FreeBoundarySet", "FreeBoundaryReport", "extract_free_boundary",
    "growth_exponent_fit", "nondegeneracy_check", "porosity_estimate",
    "o_delta_measure", "energy_E_eps", "hausdorff_box_count",
    "w22_quotient_energy", "bv_norm", "perimeter_of_positivity",
    "Exact1DObstacle", "ExactRadial", "exact_1d", "exact_radial",
    "rescale_to_unit", "blowup_operator", "RescaleError",
    "PRESETS", "build_preset",
]
