"""Steady-state heat conduction on a structured grid.

Discretizes ``div(k grad T) + f = 0`` with four-node bilinear elements on
unit squares. Each element's conductivity comes from a penalized density
interpolation, Dirichlet constraints are eliminated from the system, and
the reduced SPD system is solved with Jacobi-preconditioned conjugate
gradients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .mesh import GridMesh

# Conduction matrix of a unit-square bilinear quadrilateral with k = 1,
# integrated with 2x2 Gauss quadrature (exact for bilinear gradients).
REFERENCE_STIFFNESS = np.array([
    [4.0, -1.0, -2.0, -1.0],
    [-1.0, 4.0, -1.0, -2.0],
    [-2.0, -1.0, 4.0, -1.0],
    [-1.0, -2.0, -1.0, 4.0],
]) / 6.0

# Local node pairs of the four element faces: bottom, right, top, left.
FACE_NODES = ((0, 1), (1, 2), (2, 3), (3, 0))
FACE_BOTTOM, FACE_RIGHT, FACE_TOP, FACE_LEFT = 0, 1, 2, 3

# Solver default: tighter than the 1e-8 contract so that derived
# quantities (element costs, gauge comparisons) keep sub-1e-9 agreement.
DEFAULT_CG_RTOL = 1e-10

# Pure-Neumann problems only have a stationary solution when the applied
# loads balance; allow this much relative slack for rounding.
FLUX_BALANCE_RTOL = 1e-9


class IllPosedProblemError(ValueError):
    """Pure-Neumann loads do not balance: no stationary solution exists."""


class SingularSystemError(ValueError):
    """No Dirichlet constraint and no gauge pin: matrix has a null space."""


class SolverFailure(RuntimeError):
    """Conjugate gradients did not reach the requested residual."""

    def __init__(self, iterations: int, residual: float, rtol: float):
        self.iterations = iterations
        self.residual = residual
        self.rtol = rtol
        super().__init__(
            f"CG stalled after {iterations} iterations: "
            f"relative residual {residual:.3e} > {rtol:.1e}")


@dataclass(frozen=True)
class ConductivityParams:
    """Power-law map from element density to conductivity."""

    k_min: float = 0.009
    k_max: float = 1.0
    p: float = 2.0

    def __post_init__(self):
        if not 0.0 < self.k_min < self.k_max:
            raise ValueError(f"need 0 < k_min < k_max, got ({self.k_min}, {self.k_max})")
        if self.p <= 1.0:
            raise ValueError(f"penalization exponent p must exceed 1, got {self.p}")


@dataclass
class BoundaryConditionSet:
    """Dirichlet node temperatures, Neumann face fluxes, volumetric source.

    Any boundary not listed is adiabatic. ``neumann`` maps
    ``(element, face)`` to the flux integrated over that unit face; it is
    applied as half the flux on each of the face's two nodes. ``source``
    is a per-element volumetric term (zero when omitted). ``gauge_pin``
    names a node held at T = 0 to fix the additive constant of a
    pure-Neumann problem.
    """

    dirichlet: dict[int, float] = field(default_factory=dict)
    neumann: dict[tuple[int, int], float] = field(default_factory=dict)
    source: np.ndarray | None = None
    gauge_pin: int | None = None

    def set_temperature(self, node: int, value: float) -> None:
        existing = self.dirichlet.get(node)
        if existing is not None and existing != value:
            raise ValueError(
                f"node {node} already constrained to {existing}, refusing {value}")
        self.dirichlet[node] = value

    def set_flux(self, element: int, face: int, flux: float) -> None:
        if face not in (0, 1, 2, 3):
            raise ValueError(f"face index must be 0..3, got {face}")
        self.neumann[(element, face)] = flux


@dataclass
class LinearSystem:
    """Assembled conduction system with Dirichlet constraints eliminated."""

    matrix: sparse.csr_matrix          # full symmetric K
    load: np.ndarray                   # full load vector F
    free: np.ndarray                   # unconstrained node indices
    constrained: np.ndarray            # Dirichlet / gauge-pinned node indices
    values: np.ndarray                 # prescribed temperatures at constrained
    reduced_matrix: sparse.csr_matrix  # K restricted to free nodes
    reduced_load: np.ndarray           # F_free - K_fc @ values

    @property
    def n_nodes(self) -> int:
        return self.matrix.shape[0]


def element_conductivity(rho, params: ConductivityParams):
    """Conductivity k_min + (k_max - k_min) * rho**p; accepts scalars or arrays."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0.0) or np.any(rho > 1.0):
        raise ValueError("density outside [0, 1]")
    k = params.k_min + (params.k_max - params.k_min) * rho ** params.p
    return k if k.ndim else float(k)


def element_stiffness(k: float) -> np.ndarray:
    """4x4 conduction matrix of one unit element with conductivity k."""
    if k <= 0.0:
        raise ValueError(f"conductivity must be positive, got {k}")
    return k * REFERENCE_STIFFNESS


def assemble(mesh: GridMesh, densities: np.ndarray, params: ConductivityParams,
             bcs: BoundaryConditionSet) -> LinearSystem:
    """Assemble K and F for the mesh and split off constrained nodes.

    Raises IllPosedProblemError when a pure-Neumann load set does not
    balance, and SingularSystemError when there is neither a Dirichlet
    constraint nor a gauge pin.
    """
    densities = np.asarray(densities, dtype=float)
    if densities.shape != (mesh.n_elements,):
        raise ValueError(
            f"densities length {densities.size} != element count {mesh.n_elements}")

    k = element_conductivity(densities, params)
    data = np.outer(k, REFERENCE_STIFFNESS.ravel()).ravel()
    n = mesh.n_nodes
    matrix = sparse.coo_matrix(
        (data, (mesh.scatter_rows, mesh.scatter_cols)), shape=(n, n)).tocsr()

    load = np.zeros(n)
    applied = 0.0  # total magnitude of applied loads, for the balance check
    for (element, face), flux in bcs.neumann.items():
        if not 0 <= element < mesh.n_elements:
            raise ValueError(f"Neumann face on element {element} outside mesh")
        a, b = FACE_NODES[face]
        nodes = mesh.conn[element]
        load[nodes[a]] += 0.5 * flux
        load[nodes[b]] += 0.5 * flux
        applied += abs(flux)
    if bcs.source is not None:
        source = np.asarray(bcs.source, dtype=float)
        if source.shape != (mesh.n_elements,):
            raise ValueError("source length != element count")
        # Constant source on a unit bilinear element loads each node equally.
        np.add.at(load, mesh.conn.ravel(), np.repeat(source / 4.0, 4))
        applied += np.abs(source).sum()

    for node in bcs.dirichlet:
        if not 0 <= node < n:
            raise ValueError(f"Dirichlet node {node} outside mesh")

    if bcs.dirichlet:
        if bcs.gauge_pin is not None:
            raise ValueError("gauge pin is only meaningful for pure-Neumann problems")
        constrained = np.fromiter(sorted(bcs.dirichlet), dtype=int)
        values = np.array([bcs.dirichlet[i] for i in constrained], dtype=float)
    else:
        imbalance = abs(load.sum())
        if imbalance > FLUX_BALANCE_RTOL * applied:
            raise IllPosedProblemError(
                f"net applied flux {load.sum():.3e} exceeds "
                f"{FLUX_BALANCE_RTOL:.0e} of total magnitude {applied:.3e}")
        if bcs.gauge_pin is None:
            raise SingularSystemError(
                "pure-Neumann system needs a gauge pin to fix the temperature level")
        if not 0 <= bcs.gauge_pin < n:
            raise ValueError(f"gauge pin node {bcs.gauge_pin} outside mesh")
        constrained = np.array([bcs.gauge_pin], dtype=int)
        values = np.zeros(1)

    mask = np.ones(n, dtype=bool)
    mask[constrained] = False
    free = np.nonzero(mask)[0]

    reduced = matrix[free][:, free]
    reduced_load = load[free]
    if values.any():
        reduced_load = reduced_load - matrix[free][:, constrained] @ values

    return LinearSystem(matrix=matrix, load=load, free=free,
                        constrained=constrained, values=values,
                        reduced_matrix=reduced, reduced_load=reduced_load)


def lowest_unloaded_node(mesh: GridMesh, bcs: BoundaryConditionSet) -> int:
    """Lowest-indexed node that carries neither a load nor a constraint.

    Used to pick a gauge pin whose reaction stays identically zero for a
    balanced pure-Neumann problem.
    """
    blocked = set(bcs.dirichlet)
    for (element, face), flux in bcs.neumann.items():
        a, b = FACE_NODES[face]
        nodes = mesh.conn[element]
        blocked.add(int(nodes[a]))
        blocked.add(int(nodes[b]))
    if bcs.source is not None:
        nonzero = np.nonzero(np.asarray(bcs.source))[0]
        blocked.update(int(v) for v in mesh.conn[nonzero].ravel())
    for node in range(mesh.n_nodes):
        if node not in blocked:
            return node
    raise ValueError("every node carries a load or constraint")


def solve(system: LinearSystem, x0: np.ndarray | None = None,
          rtol: float = DEFAULT_CG_RTOL, max_iters: int | None = None) -> np.ndarray:
    """Solve for the full nodal temperature vector.

    Jacobi-preconditioned conjugate gradients on the reduced system,
    stopping at ``||b - Ax|| <= rtol * ||b||``; Dirichlet values are
    re-injected into the returned vector. Deterministic for identical
    inputs. Raises SolverFailure after ``10 * n_free`` iterations
    (or ``max_iters`` when given).
    """
    n_free = system.free.size
    temperatures = np.zeros(system.n_nodes)
    temperatures[system.constrained] = system.values
    if n_free == 0:
        return temperatures

    a = system.reduced_matrix
    b = system.reduced_load
    b_norm = np.linalg.norm(b)
    if b_norm == 0.0:
        return temperatures

    if max_iters is None:
        max_iters = 10 * n_free
    inv_diag = 1.0 / a.diagonal()

    x = np.zeros(n_free) if x0 is None else np.asarray(x0, dtype=float).copy()
    r = b - a @ x
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    r_norm = np.linalg.norm(r)
    iterations = 0
    while r_norm > rtol * b_norm:
        if iterations >= max_iters:
            raise SolverFailure(iterations, r_norm / b_norm, rtol)
        ap = a @ p
        alpha = rz / (p @ ap)
        x += alpha * p
        r -= alpha * ap
        z = inv_diag * r
        rz_next = r @ z
        p = z + (rz_next / rz) * p
        rz = rz_next
        r_norm = np.linalg.norm(r)
        iterations += 1

    temperatures[system.free] = x
    return temperatures


def element_cost(mesh: GridMesh, densities: np.ndarray, params: ConductivityParams,
                 temperatures: np.ndarray) -> np.ndarray:
    """Per-element dissipation integral of grad(T) . k grad(T).

    Evaluated by the same 2x2 Gauss rule as the stiffness, so for nodal
    temperatures t_e this is exactly t_e' (k_e K0) t_e and the field sums
    to the global quadratic form T' K T.
    """
    densities = np.asarray(densities, dtype=float)
    temperatures = np.asarray(temperatures, dtype=float)
    if densities.shape != (mesh.n_elements,):
        raise ValueError("densities length != element count")
    if temperatures.shape != (mesh.n_nodes,):
        raise ValueError("temperature length != node count")
    k = element_conductivity(densities, params)
    t_e = temperatures[mesh.conn]
    return k * np.einsum("ij,ij->i", t_e @ REFERENCE_STIFFNESS, t_e)
