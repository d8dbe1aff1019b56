from .pwa import (
    Hyperplane,
    PwaValue,
    SubmodularityReport,
    ValueStack,
    fit_hyperplane,
    is_submodular_near,
    is_submodular_on,
    lattice_box,
    local_offsets,
)

__all__ = [
    "Hyperplane",
    "PwaValue",
    "SubmodularityReport",
    "ValueStack",
    "fit_hyperplane",
    "is_submodular_near",
    "is_submodular_on",
    "lattice_box",
    "local_offsets",
]
