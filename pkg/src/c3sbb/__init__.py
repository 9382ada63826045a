"""Global optimization of joint compression and caching energy in tree networks.

The pipeline is: build a model (:mod:`c3sbb.c3model`), lift it into the
bilinear / linear-fractional standard form (:mod:`c3sbb.reformulate`),
then run spatial branch-and-bound (:mod:`c3sbb.sbb`) whose lower bounds
come from McCormick relaxations (:mod:`c3sbb.relax`) solved by the
built-in simplex (:mod:`c3sbb.lp`).
"""
from .c3model import (DecisionVector, NetworkSpec, NodeParams, build_c2a, build_c2o,
                      build_problem, efficiency, evaluate_total, four_node, seven_node,
                      three_node, two_node)
from .reformulate import derive_bounds, reformulate
from .sbb import SolveReport, SolverParams, Status, solve

__version__ = "0.1.0"

__all__ = [
    "DecisionVector", "NetworkSpec", "NodeParams", "SolveReport", "SolverParams", "Status",
    "build_c2a", "build_c2o", "build_problem", "derive_bounds", "efficiency", "evaluate_total",
    "four_node", "reformulate", "seven_node", "solve", "three_node", "two_node",
]
