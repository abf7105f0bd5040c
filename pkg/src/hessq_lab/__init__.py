"""Numerical laboratory for the sigma_n/sigma_k Hessian quotient calculus."""

__version__ = "0.1.0"

from .symfun import EigenTuple
from .operator import QuotientOperator
from .singular import SingularFamily
from .fields import ScalarField

__all__ = [
    "__version__",
    "EigenTuple",
    "QuotientOperator",
    "SingularFamily",
    "ScalarField",
]
