"""Extremal Newtonian potentials of axisymmetric measures on the unit sphere."""
from .errors import ExtremalError
from .kernel import KernelEval, eval_c_n, eval_h, normalized_kernel
from .measure import AxisymMeasure, PoissonMixture, SignedAxisymMeasure, potential_eval

__version__ = "0.1.0"
