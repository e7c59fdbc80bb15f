"""Shared builders for randomized solver problems."""

import numpy as np

from heatgates import fem
from heatgates.mesh import build_mesh


def random_problem(rng, max_size=15):
    """A random small mesh with admissible densities and boundary conditions.

    Half the draws are Dirichlet-driven (optionally with extra fluxes),
    half are balanced pure-Neumann problems with a gauge pin.
    """
    nx = int(rng.integers(1, max_size + 1))
    ny = int(rng.integers(1, max_size + 1))
    mesh = build_mesh(nx, ny)
    rho = rng.uniform(0.01, 1.0, mesh.n_elements)
    params = fem.ConductivityParams()
    bcs = fem.BoundaryConditionSet()

    if rng.random() < 0.5:
        n_constraints = int(rng.integers(1, min(5, mesh.n_nodes) + 1))
        nodes = rng.choice(mesh.n_nodes, size=n_constraints, replace=False)
        for node in nodes:
            bcs.set_temperature(int(node), float(rng.uniform(-50.0, 100.0)))
        for _ in range(int(rng.integers(0, 4))):
            element = int(rng.integers(mesh.n_elements))
            face = int(rng.integers(4))
            bcs.set_flux(element, face, float(rng.uniform(-2.0, 2.0)))
    else:
        entries = {}
        for _ in range(int(rng.integers(2, 6))):
            element = int(rng.integers(mesh.n_elements))
            face = int(rng.integers(4))
            entries[(element, face)] = float(rng.uniform(-2.0, 2.0))
        keys = list(entries)
        entries[keys[-1]] = -sum(entries[k] for k in keys[:-1])
        for (element, face), flux in entries.items():
            bcs.set_flux(element, face, flux)
        try:
            bcs.gauge_pin = fem.lowest_unloaded_node(mesh, bcs)
        except ValueError:
            bcs.gauge_pin = 0  # every node loaded; any pin still fixes the level
    return mesh, rho, params, bcs


def dense_solution(system):
    """Direct-elimination oracle for the reduced system."""
    temperatures = np.zeros(system.n_nodes)
    temperatures[system.constrained] = system.values
    if system.free.size:
        temperatures[system.free] = np.linalg.solve(
            system.reduced_matrix.toarray(), system.reduced_load)
    return temperatures
