"""Logic gates grown by topology optimization of heat-conducting material.

A density field on a structured grid evolves under a cost-driven
bang-bang update until conductive material forms paths between input,
output, and outlet sites; the converged layout realizes AND, XOR, and
half-adder truth tables read off as element densities.
"""

from .fem import (
    BoundaryConditionSet,
    ConductivityParams,
    IllPosedProblemError,
    SingularSystemError,
    SolverFailure,
    assemble,
    element_conductivity,
    element_cost,
    element_stiffness,
    solve,
)
from .gates import (
    GateSpec,
    ReadoutResult,
    SiteSpec,
    TruthTable,
    build_gate,
    encode_inputs,
    expected_outputs,
    read_output,
    truth_table,
)
from .mesh import GridMesh, build_mesh
from .optimizer import (
    DensityState,
    OptParams,
    RunTrace,
    initial_state,
    run,
    step,
)

__all__ = [
    "BoundaryConditionSet",
    "ConductivityParams",
    "DensityState",
    "GateSpec",
    "GridMesh",
    "IllPosedProblemError",
    "OptParams",
    "ReadoutResult",
    "RunTrace",
    "SingularSystemError",
    "SiteSpec",
    "SolverFailure",
    "TruthTable",
    "assemble",
    "build_gate",
    "build_mesh",
    "element_conductivity",
    "element_cost",
    "element_stiffness",
    "encode_inputs",
    "expected_outputs",
    "initial_state",
    "read_output",
    "run",
    "solve",
    "step",
    "truth_table",
]

__version__ = "0.1.0"
