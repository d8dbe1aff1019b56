from .bellman import (
    BellmanResult,
    CutCase,
    CutResult,
    backward_cut,
    bellman_apply,
    case1_cut,
    case2_cut,
)

__all__ = [
    "BellmanResult",
    "CutCase",
    "CutResult",
    "backward_cut",
    "bellman_apply",
    "case1_cut",
    "case2_cut",
]
