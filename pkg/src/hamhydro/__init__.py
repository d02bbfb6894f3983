"""hamhydro: exact symbolic verification of Hamiltonian structures for
hydrodynamic-type systems.

The package provides an exact rational-function kernel, differential algebra
on jet variables, metric/connection tensor algebra, homogeneous Hamiltonian
operator condition checkers, Lax-pair machinery for conserved densities, and
the Oriented Associativity system as the fully verified canonical dataset.
"""

from .kernel import Expr, KernelError, LinearSystem, ParseError, PoleError, \
    Symbol, Workspace, parse, solve_linear

__all__ = [
    "Expr", "KernelError", "LinearSystem", "ParseError", "PoleError",
    "Symbol", "Workspace", "parse", "solve_linear",
]

__version__ = "0.1.0"
