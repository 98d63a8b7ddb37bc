"""Modal approximation and stability laboratory for 1-D thermoelastic systems."""

from .model import (
    BoundaryCase,
    CouplingModel,
    GeneratorMatrix,
    Kind,
    Provenance,
    assemble_gram,
    build_basis,
    build_generator,
    build_generator_assembled,
    build_generator_printed,
    discrepancy_report,
    dissipativity_defect,
)

__all__ = [
    "BoundaryCase",
    "CouplingModel",
    "GeneratorMatrix",
    "Kind",
    "Provenance",
    "assemble_gram",
    "build_basis",
    "build_generator",
    "build_generator_assembled",
    "build_generator_printed",
    "discrepancy_report",
    "dissipativity_defect",
]

__version__ = "0.1.0"
