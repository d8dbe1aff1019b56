from .gbdp import (
    BoundsTrace,
    CutAnchor,
    IterationRecord,
    ResampleMode,
    SamplePath,
    SolverConfig,
    backward_sweep,
    derive_rng,
    forward_sweep,
    initial_stack,
    resample_if_converged,
    train,
)
from .simulate import ProfitSummary, simulate, simulate_async

__all__ = [
    "BoundsTrace",
    "CutAnchor",
    "IterationRecord",
    "ProfitSummary",
    "ResampleMode",
    "SamplePath",
    "SolverConfig",
    "backward_sweep",
    "derive_rng",
    "forward_sweep",
    "initial_stack",
    "resample_if_converged",
    "simulate",
    "simulate_async",
    "train",
]
