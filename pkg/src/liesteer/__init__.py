"""liesteer: controllability checks and broadcast steering on matrix Lie groups.

Submodules
----------
algebra      bases, brackets, metrics, exp/log, distances
rank         Lie algebra rank condition, classical and ensemble verdicts
covers       so(3)/su(2) subalgebra covers and root-datum spin triples
gridclosure  Lie closures of parameter-dependent generator families on grids
synthesis    odd-polynomial fitting, Euler charts, flow planning and compilation
simulate     exact piecewise-constant integration for single systems and ensembles
specio       JSON system descriptions
cli          command-line entry points
"""

from . import algebra, covers, errors, gridclosure, rank, simulate, specio, synthesis

__all__ = [
    "algebra", "covers", "errors", "gridclosure", "rank",
    "simulate", "specio", "synthesis",
]

__version__ = "0.1.0"
