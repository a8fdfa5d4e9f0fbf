import numpy as np
import pytest

from edgesim.model import DEFAULT_CATALOG, CostParams, EdgeNode, Topology


def make_topology(capacities, cpus=None, comm=None, coords=None):
    """Small topology helper for tests."""
    v = len(capacities)
    cpus = cpus or [1.0] * v
    nodes = [
        EdgeNode(i, capacities[i], cpus[i], coord=coords[i] if coords else None)
        for i in range(v)
    ]
    if comm is None:
        comm = np.zeros((v, v))
    return Topology(nodes=nodes, comm_cost=np.asarray(comm, dtype=float))


def desk_topology(n_nodes=25, capacity=4000.0, seed=1234, box=100.0, scale=0.35):
    """Seeded random topology in a square box, heterogeneous CPUs."""
    rng = np.random.default_rng(seed)
    coords = rng.uniform(0, box, size=(n_nodes, 2))
    cpu_choices = [1.0, 1.5, 2.0, 2.5]
    nodes = [
        EdgeNode(
            i,
            capacity,
            cpu_choices[int(rng.integers(len(cpu_choices)))],
            coord=(float(coords[i][0]), float(coords[i][1])),
        )
        for i in range(n_nodes)
    ]
    from edgesim.model import comm_cost_from_coords

    return Topology(nodes=nodes, comm_cost=comm_cost_from_coords(nodes, scale))


@pytest.fixture
def catalog():
    return DEFAULT_CATALOG


@pytest.fixture
def params():
    return CostParams(alpha=0.01, switch_coeff=1.0, run_coeff=1.0)
