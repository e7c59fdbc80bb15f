"""Density-field evolution driven by per-element dissipation cost.

Each iteration solves the conduction problem for the current densities,
compares every element's cost-to-mass ratio ``C_i / (rho_i V_i)`` against
the global threshold ``sum(C) / M``, and moves the density a fixed
increment up or down (bang-bang rule) or proportionally (explicit Euler
rule), then projects back onto the box ``[rho_min, rho_max]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import fem
from .mesh import GridMesh

RULES = ("bang_bang", "euler")

TERMINATION_CONVERGED = "converged"
TERMINATION_MAX_ITERS = "max_iters"


@dataclass(frozen=True)
class OptParams:
    """Bounds, step sizes, and material budget for a density run.

    ``mass`` is the target material amount M that normalizes the cost
    threshold. ``q`` is the Euler step scale; the bang-bang rule ignores
    it. ``snapshot_stride = 0`` records only the terminal snapshot.
    """

    rho_min: float = 0.01
    rho_max: float = 1.0
    theta: float = 0.03
    q: float = 0.01
    p: float = 2.0
    k_min: float = 0.009
    k_max: float = 1.0
    mass: float = 2000.0
    max_iters: int = 200
    rule: str = "bang_bang"
    snapshot_stride: int = 10
    cg_rtol: float = fem.DEFAULT_CG_RTOL

    def __post_init__(self):
        if not 0.0 < self.rho_min < self.rho_max <= 1.0:
            raise ValueError(
                f"need 0 < rho_min < rho_max <= 1, got ({self.rho_min}, {self.rho_max})")
        if self.theta <= 0.0:
            raise ValueError(f"theta must be positive, got {self.theta}")
        if self.q <= 0.0:
            raise ValueError(f"q must be positive, got {self.q}")
        if self.mass <= 0.0:
            raise ValueError(f"mass must be positive, got {self.mass}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be at least 1, got {self.max_iters}")
        if self.rule not in RULES:
            raise ValueError(f"rule must be one of {RULES}, got {self.rule!r}")
        if self.snapshot_stride < 0:
            raise ValueError(f"snapshot_stride must be >= 0, got {self.snapshot_stride}")
        if self.cg_rtol <= 0.0:
            raise ValueError(f"cg_rtol must be positive, got {self.cg_rtol}")
        # Conductivity invariants checked by the shared params type.
        self.conductivity()

    def conductivity(self) -> fem.ConductivityParams:
        return fem.ConductivityParams(k_min=self.k_min, k_max=self.k_max, p=self.p)


@dataclass
class DensityState:
    """Per-element densities plus the iteration counter."""

    values: np.ndarray
    iteration: int = 0


@dataclass
class TraceRow:
    iteration: int
    total_cost: float
    total_mass: float
    snapshot: np.ndarray | None = None


@dataclass
class RunTrace:
    rows: list[TraceRow] = field(default_factory=list)
    termination: str = TERMINATION_MAX_ITERS
    final: DensityState | None = None

    @property
    def iterations(self) -> int:
        return self.rows[-1].iteration if self.rows else 0

    def snapshots(self) -> dict[int, np.ndarray]:
        return {row.iteration: row.snapshot for row in self.rows
                if row.snapshot is not None}


def initial_state(mesh: GridMesh, params: OptParams) -> DensityState:
    """Uniform floor-density field, the starting point of every run."""
    return DensityState(values=np.full(mesh.n_elements, params.rho_min))


def cost_threshold(costs: np.ndarray, params: OptParams) -> float:
    """Total cost normalized by the material budget M."""
    if params.mass <= 0.0:
        raise ValueError("mass must be positive")
    return float(np.sum(costs)) / params.mass


def project(rho: float, params: OptParams) -> float:
    """Clamp a density onto [rho_min, rho_max]."""
    if rho > params.rho_max:
        return params.rho_max
    if rho < params.rho_min:
        return params.rho_min
    return rho


def update_bang_bang(densities: np.ndarray, costs: np.ndarray, threshold: float,
                     params: OptParams) -> np.ndarray:
    """Move every density by +-theta and project onto the box.

    An element grows when its cost-to-mass ratio meets the threshold
    (ties grow). When the total cost is zero the threshold carries no
    information and every element decays, which keeps a cold start
    pinned at the floor.
    """
    ratio = costs / densities  # V_i = 1 for unit elements
    if threshold == 0.0 and not np.any(costs):
        grow = np.zeros(densities.shape, dtype=bool)
    else:
        grow = ratio - threshold >= 0.0
    stepped = np.where(grow, densities + params.theta, densities - params.theta)
    return np.clip(stepped, params.rho_min, params.rho_max)


def update_euler(densities: np.ndarray, costs: np.ndarray, threshold: float,
                 params: OptParams) -> np.ndarray:
    """Explicit Euler step of size q on the cost-ratio mismatch, projected."""
    ratio = costs / densities
    stepped = densities + params.q * (ratio - threshold)
    return np.clip(stepped, params.rho_min, params.rho_max)


_UPDATES = {"bang_bang": update_bang_bang, "euler": update_euler}

# Cheap consistency guard: the cost field must sum to the global
# quadratic form on every solve.
COMPLIANCE_RTOL = 1e-6


def step(state: DensityState, mesh: GridMesh, bcs: fem.BoundaryConditionSet,
         params: OptParams, warm_start: np.ndarray | None = None,
         ) -> tuple[DensityState, np.ndarray, np.ndarray]:
    """One solve / cost / update cycle.

    Returns the advanced state, the element cost field of the *current*
    densities, and the full temperature vector. ``warm_start`` seeds the
    CG iteration with the previous step's temperatures.
    """
    system = fem.assemble(mesh, state.values, params.conductivity(), bcs)
    x0 = warm_start[system.free] if warm_start is not None else None
    temperatures = fem.solve(system, x0=x0, rtol=params.cg_rtol)
    costs = fem.element_cost(mesh, state.values, params.conductivity(), temperatures)

    total = float(costs.sum())
    quadratic = float(temperatures @ (system.matrix @ temperatures))
    # Absolute floor: accumulated rounding of the two quadratic forms when
    # the true cost is (near) zero, e.g. a constant temperature field.
    floor = 16.0 * np.finfo(float).eps * mesh.n_elements * params.k_max \
        * float(np.max(np.abs(temperatures)) ** 2)
    if abs(total - quadratic) > COMPLIANCE_RTOL * max(total, quadratic) + floor:
        raise RuntimeError(
            f"cost field sum {total:.9e} disagrees with quadratic form "
            f"{quadratic:.9e} beyond {COMPLIANCE_RTOL:.0e} relative")

    threshold = cost_threshold(costs, params)
    updated = _UPDATES[params.rule](state.values, costs, threshold, params)
    return DensityState(values=updated, iteration=state.iteration + 1), costs, temperatures


def run(state: DensityState, mesh: GridMesh, bcs: fem.BoundaryConditionSet,
        params: OptParams) -> RunTrace:
    """Iterate step() until the density field saturates or max_iters.

    Convergence means the largest density change drops below theta / 2,
    which the bang-bang rule only reaches when every element is clamped
    at a bound. Snapshots are recorded every ``snapshot_stride``
    iterations and at termination.
    """
    trace = RunTrace()
    temperatures: np.ndarray | None = None
    for remaining in range(params.max_iters, 0, -1):
        previous = state.values
        state, costs, temperatures = step(state, mesh, bcs, params,
                                          warm_start=temperatures)
        converged = float(np.max(np.abs(state.values - previous))) < params.theta / 2.0
        final = converged or remaining == 1
        want_snapshot = final or (
            params.snapshot_stride > 0 and state.iteration % params.snapshot_stride == 0)
        trace.rows.append(TraceRow(
            iteration=state.iteration,
            total_cost=float(costs.sum()),
            total_mass=float(state.values.sum()),
            snapshot=state.values.copy() if want_snapshot else None,
        ))
        if converged:
            trace.termination = TERMINATION_CONVERGED
            break
    else:
        trace.termination = TERMINATION_MAX_ITERS
    trace.final = state
    return trace
