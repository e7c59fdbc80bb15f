"""Logic-gate layouts on the conduction grid and truth-table evaluation.

A gate is a set of named sites (inputs, outputs, outlets) on a 200x200
grid of unit elements. Input bits become boundary conditions: either
prescribed temperatures on the four nodes of the site's element
(Dirichlet encoding) or a prescribed flux through the element's bottom
face (Neumann encoding). After the density field evolves, the output bit
is read from the density of the output site's element.
"""

from __future__ import annotations

import concurrent.futures
import math
from dataclasses import dataclass, field

import numpy as np

from . import fem, optimizer
from .mesh import GridMesh, build_mesh

GATE_AND = "and"
GATE_XOR = "xor"
GATE_HALF_ADDER = "half_adder"
GATE_KINDS = (GATE_AND, GATE_XOR, GATE_HALF_ADDER)

BC_DIRICHLET = "dirichlet"
BC_NEUMANN = "neumann"
BC_KINDS = (BC_DIRICHLET, BC_NEUMANN)

ROLE_INPUT = "input"
ROLE_OUTPUT = "output"
ROLE_OUTLET = "outlet"

GRID_SIZE = 200
BOUNDARY_MARGIN = 5
READOUT_THRESHOLD = 0.5
INPUT_ROWS = ((0, 0), (0, 1), (1, 0), (1, 1))


@dataclass(frozen=True)
class SiteSpec:
    """A named element of the grid taking part in the gate.

    ``carries_bc`` marks sites that hold a boundary condition: inputs and
    outlets always do, outputs only when the gate grounds them (an output
    at temperature zero doubles as a heat drain).
    """

    name: str
    col: int
    row: int
    role: str
    carries_bc: bool = True

    def element(self, mesh: GridMesh) -> int:
        return mesh.element_index(self.col, self.row)

    def distance(self, other: "SiteSpec") -> float:
        return math.hypot(self.col - other.col, self.row - other.row)


@dataclass(frozen=True)
class GateSpec:
    kind: str
    bc_kind: str
    sites: tuple[SiteSpec, ...]
    mass: float
    nx: int = GRID_SIZE
    ny: int = GRID_SIZE
    input_temperature: float = 100.0
    input_flux: float = 1.0

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if self.bc_kind not in BC_KINDS:
            raise ValueError(f"unknown bc kind {self.bc_kind!r}")
        names = [site.name for site in self.sites]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate site names in {names}")
        for site in self.sites:
            if not (BOUNDARY_MARGIN <= site.col < self.nx - BOUNDARY_MARGIN
                    and BOUNDARY_MARGIN <= site.row < self.ny - BOUNDARY_MARGIN):
                raise ValueError(
                    f"site {site.name} at ({site.col}, {site.row}) closer than "
                    f"{BOUNDARY_MARGIN} elements to the boundary")

    def site(self, name: str) -> SiteSpec:
        for site in self.sites:
            if site.name == name:
                return site
        raise KeyError(name)

    def inputs(self) -> tuple[SiteSpec, ...]:
        return tuple(s for s in self.sites if s.role == ROLE_INPUT)

    def outputs(self) -> tuple[SiteSpec, ...]:
        return tuple(s for s in self.sites if s.role == ROLE_OUTPUT)

    def outlets(self) -> tuple[SiteSpec, ...]:
        return tuple(s for s in self.sites if s.role == ROLE_OUTLET)

    def build_mesh(self) -> GridMesh:
        return build_mesh(self.nx, self.ny)


@dataclass
class ReadoutResult:
    """Density at each output site mapped to a logic bit by threshold."""

    densities: dict[str, float]
    bits: dict[str, bool]
    threshold: float = READOUT_THRESHOLD


@dataclass
class TruthTableRow:
    x: int
    y: int
    readout: ReadoutResult | None = None
    trace: optimizer.RunTrace | None = None
    error: str | None = None


@dataclass
class TruthTable:
    spec: GateSpec
    rows: list[TruthTableRow] = field(default_factory=list)

    def matches_expected(self) -> bool:
        for row in self.rows:
            if row.readout is None:
                return False
            if row.readout.bits != expected_outputs(self.spec.kind, row.x, row.y):
                return False
        return True


# Input sites sit on an isosceles triangle: 102 apart, each 127 from the
# grounded apex (126.7 on the integer grid).
_TRIANGLE_I_X = (49, 150)
_TRIANGLE_I_Y = (151, 150)
_TRIANGLE_APEX = (100, 34)


def build_and_dirichlet() -> GateSpec:
    """AND gate, temperature-encoded inputs, grounded output at the apex."""
    return GateSpec(
        kind=GATE_AND, bc_kind=BC_DIRICHLET, mass=2000.0,
        sites=(
            SiteSpec("I_x", *_TRIANGLE_I_X, role=ROLE_INPUT),
            SiteSpec("I_y", *_TRIANGLE_I_Y, role=ROLE_INPUT),
            SiteSpec("O", *_TRIANGLE_APEX, role=ROLE_OUTPUT, carries_bc=True),
        ))


def build_xor_dirichlet() -> GateSpec:
    """XOR gate: apex becomes an outlet, output is the free midpoint of the inputs."""
    return GateSpec(
        kind=GATE_XOR, bc_kind=BC_DIRICHLET, mass=2000.0,
        sites=(
            SiteSpec("I_x", *_TRIANGLE_I_X, role=ROLE_INPUT),
            SiteSpec("I_y", *_TRIANGLE_I_Y, role=ROLE_INPUT),
            SiteSpec("V", *_TRIANGLE_APEX, role=ROLE_OUTLET),
            SiteSpec("O", 100, 150, role=ROLE_OUTPUT, carries_bc=False),
        ))


def build_and_neumann() -> GateSpec:
    """AND gate, flux-encoded inputs 40 apart, outlet 70/90 away, output between inputs."""
    return GateSpec(
        kind=GATE_AND, bc_kind=BC_NEUMANN, mass=800.0,
        sites=(
            SiteSpec("I_x", 80, 100, role=ROLE_INPUT),
            SiteSpec("I_y", 120, 100, role=ROLE_INPUT),
            SiteSpec("V", 60, 33, role=ROLE_OUTLET),
            SiteSpec("O", 100, 100, role=ROLE_OUTPUT, carries_bc=False),
        ))


def build_xor_neumann() -> GateSpec:
    """XOR gate on a 42-side square, inputs on top, outlets beneath the
    diagonally opposite inputs, free output at the center."""
    return GateSpec(
        kind=GATE_XOR, bc_kind=BC_NEUMANN, mass=400.0,
        sites=(
            SiteSpec("I_x", 79, 121, role=ROLE_INPUT),
            SiteSpec("I_y", 121, 121, role=ROLE_INPUT),
            SiteSpec("V_1", 79, 79, role=ROLE_OUTLET),
            SiteSpec("V_2", 121, 79, role=ROLE_OUTLET),
            SiteSpec("O", 100, 100, role=ROLE_OUTPUT, carries_bc=False),
        ))


def build_half_adder_dirichlet() -> GateSpec:
    """Half-adder: XOR layout with the outlet promoted to the carry output."""
    return GateSpec(
        kind=GATE_HALF_ADDER, bc_kind=BC_DIRICHLET, mass=2000.0,
        sites=(
            SiteSpec("I_x", *_TRIANGLE_I_X, role=ROLE_INPUT),
            SiteSpec("I_y", *_TRIANGLE_I_Y, role=ROLE_INPUT),
            SiteSpec("O_1", *_TRIANGLE_APEX, role=ROLE_OUTPUT, carries_bc=True),
            SiteSpec("O_2", 100, 150, role=ROLE_OUTPUT, carries_bc=False),
        ))


def build_half_adder_neumann() -> GateSpec:
    """Half-adder on a 40-side square plus a third outlet below it.

    The sum output sits at the square's center; the carry output sits on
    the midpoint between the second and third outlets, where material
    only grows when both inputs drive flux.
    """
    return GateSpec(
        kind=GATE_HALF_ADDER, bc_kind=BC_NEUMANN, mass=2000.0,
        sites=(
            SiteSpec("I_x", 80, 130, role=ROLE_INPUT),
            SiteSpec("I_y", 120, 130, role=ROLE_INPUT),
            SiteSpec("V_1", 80, 90, role=ROLE_OUTLET),
            SiteSpec("V_2", 120, 90, role=ROLE_OUTLET),
            SiteSpec("V_3", 84, 55, role=ROLE_OUTLET),
            SiteSpec("O_2", 100, 110, role=ROLE_OUTPUT, carries_bc=False),
            SiteSpec("O_1", 102, 72, role=ROLE_OUTPUT, carries_bc=False),
        ))


_BUILDERS = {
    (GATE_AND, BC_DIRICHLET): build_and_dirichlet,
    (GATE_AND, BC_NEUMANN): build_and_neumann,
    (GATE_XOR, BC_DIRICHLET): build_xor_dirichlet,
    (GATE_XOR, BC_NEUMANN): build_xor_neumann,
    (GATE_HALF_ADDER, BC_DIRICHLET): build_half_adder_dirichlet,
    (GATE_HALF_ADDER, BC_NEUMANN): build_half_adder_neumann,
}


def build_gate(kind: str, bc_kind: str) -> GateSpec:
    try:
        return _BUILDERS[(kind, bc_kind)]()
    except KeyError:
        raise ValueError(f"no gate for kind={kind!r}, bc={bc_kind!r}") from None


def expected_outputs(kind: str, x: int, y: int) -> dict[str, bool]:
    """The boolean function each named output should realize."""
    if kind == GATE_AND:
        return {"O": bool(x and y)}
    if kind == GATE_XOR:
        return {"O": bool(x ^ y)}
    if kind == GATE_HALF_ADDER:
        return {"O_1": bool(x and y), "O_2": bool(x ^ y)}
    raise ValueError(f"unknown gate kind {kind!r}")


def encode_inputs(spec: GateSpec, x: int, y: int) -> fem.BoundaryConditionSet:
    """Turn two input bits into the gate's boundary conditions.

    Dirichlet gates prescribe the input temperature on all four nodes of
    each input element and ground every other condition-carrying site.
    Neumann gates drive the input flux through each input element's
    bottom face and split the opposite flux evenly over the outlets so
    the stationary problem balances exactly; a gauge pin fixes the
    temperature level.
    """
    if x not in (0, 1) or y not in (0, 1):
        raise ValueError(f"inputs must be bits, got ({x}, {y})")
    mesh = spec.build_mesh()
    bits = {"I_x": x, "I_y": y}

    def input_bit(site):
        if site.name not in bits:
            raise ValueError(f"input site {site.name!r} is not one of {sorted(bits)}")
        return bits[site.name]

    bcs = fem.BoundaryConditionSet()
    if spec.bc_kind == BC_DIRICHLET:
        for site in spec.sites:
            if site.role == ROLE_INPUT:
                value = spec.input_temperature * input_bit(site)
            elif site.carries_bc:
                value = 0.0
            else:
                continue
            for node in mesh.conn[site.element(mesh)]:
                bcs.set_temperature(int(node), value)
        return bcs

    inputs = spec.inputs()
    outlets = spec.outlets()
    if not outlets:
        raise ValueError(f"Neumann gate {spec.kind!r} has no outlets")
    total_in = spec.input_flux * sum(input_bit(s) for s in inputs)
    for site in inputs:
        bcs.set_flux(site.element(mesh), fem.FACE_BOTTOM,
                     spec.input_flux * input_bit(site))
    for site in outlets:
        bcs.set_flux(site.element(mesh), fem.FACE_BOTTOM, -total_in / len(outlets))
    bcs.gauge_pin = fem.lowest_unloaded_node(mesh, bcs)
    return bcs


READOUT_REACH = 2


def _site_density(final: np.ndarray, mesh: GridMesh, site: SiteSpec) -> float:
    """Density observed at a site: max over an axis cross of radius 2.

    Three discretization effects make the exact element systematically
    miss material that in fact covers the site. A site whose four nodes
    carry a prescribed temperature has zero internal gradient, hence zero
    cost, so its own element is pinned at the floor forever. Sites load
    element faces (not centers), so a channel spanning two sites runs
    along an element edge and settles half an element to one side of the
    midpoint element. And a discrete channel wobbles one element around
    its midline. The cross of radius 2 absorbs all three offsets while
    excluding the diagonal corners, which collect point-drain haze around
    grounded sites and must not count as coverage.
    """
    values = [final[site.element(mesh)]]
    for step in range(1, READOUT_REACH + 1):
        for col, row in ((site.col - step, site.row), (site.col + step, site.row),
                         (site.col, site.row - step), (site.col, site.row + step)):
            if 0 <= col < mesh.nx and 0 <= row < mesh.ny:
                values.append(final[mesh.element_index(col, row)])
    return float(max(values))


def read_output(final: np.ndarray, spec: GateSpec,
                threshold: float = READOUT_THRESHOLD) -> ReadoutResult:
    """Read each output site's density and threshold it to a bit."""
    outputs = spec.outputs()
    if not outputs:
        raise ValueError(f"gate {spec.kind!r} declares no outputs")
    mesh = spec.build_mesh()
    final = np.asarray(final, dtype=float)
    if final.shape != (mesh.n_elements,):
        raise ValueError("density field length != element count")
    densities = {s.name: _site_density(final, mesh, s) for s in outputs}
    bits = {name: value >= threshold for name, value in densities.items()}
    return ReadoutResult(densities=densities, bits=bits, threshold=threshold)


def evaluate_row(spec: GateSpec, params: optimizer.OptParams,
                 x: int, y: int) -> TruthTableRow:
    """Run one input pair from a cold start through to readout."""
    row = TruthTableRow(x=x, y=y)
    try:
        mesh = spec.build_mesh()
        bcs = encode_inputs(spec, x, y)
        trace = optimizer.run(optimizer.initial_state(mesh, params), mesh, bcs, params)
        row.trace = trace
        row.readout = read_output(trace.final.values, spec)
    except (fem.IllPosedProblemError, fem.SingularSystemError,
            fem.SolverFailure, RuntimeError) as exc:
        row.error = f"{type(exc).__name__}: {exc}"
    return row


def truth_table(spec: GateSpec, params: optimizer.OptParams,
                workers: int = 1) -> TruthTable:
    """Evaluate all four input pairs; failed rows carry their error."""
    table = TruthTable(spec=spec)
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(evaluate_row, spec, params, x, y)
                       for x, y in INPUT_ROWS]
            table.rows = [f.result() for f in futures]
    else:
        table.rows = [evaluate_row(spec, params, x, y) for x, y in INPUT_ROWS]
    return table
