"""Numerical verification of weighted Burkholder-Davis-Gundy inequalities."""
from .smooth_space import SpaceDescriptor, make_space
from .dyadic import FiltrationTree, Martingale, martingale_from_terminal
from .bellman import BellmanConstants, concavity_scan
from .conditions import minimal_admissible, sweep
from .extrapolation import FunctionSpaceDescriptor

__version__ = "0.1.0"
