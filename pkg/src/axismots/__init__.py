"""Numerical toolkit for axisymmetric marginally outer trapped surfaces.

Modules
-------
geomcore    rotationally symmetric sphere geometry, quadrature, graph surfaces
initdata    product-type initial data, null expansions, omega and Komar integrals
stability   stability operator, adjoint, principal eigenpair, checks
foliation   constant-expansion foliations by Newton continuation
nariai      rotating Nariai horizon: area, omega and the area bound
cli         command-line front end
"""

from .errors import ConfigError, ConvergenceError, DomainError, MotsError, NumericalError

__version__ = "0.1.0"

__all__ = ["ConfigError", "ConvergenceError", "DomainError", "MotsError",
           "NumericalError", "__version__"]
