import numpy as np
import pytest

import robinsdp as r

# Reference setup: unit disk, concentric interface at radius 0.5 split into
# two arcs, coefficient box [1, 2]^2, structured mesh at size 0.1.
REF_MESH_SIZE = 0.1
REF_RADIUS = 0.5
REF_SEGMENTS = 8

# Golden regression values from the first verified measurement sweep of the
# reference setup (m_max = 40): smallest sufficient current count and the
# criterion value it produced.
GOLD_MIN_CURRENTS = 3
GOLD_LAMBDA = 2.3478511869042e-02


@pytest.fixture(scope="session")
def ref_bounds():
    return r.BoxBounds(1.0, 2.0, 2)


@pytest.fixture(scope="session")
def ref_geometry():
    return r.build_disk_geometry(2, REF_RADIUS, REF_SEGMENTS)


@pytest.fixture(scope="session")
def ref_map(ref_geometry):
    return r.assemble(ref_geometry, REF_MESH_SIZE, GOLD_MIN_CURRENTS)


@pytest.fixture(scope="session")
def ref_criterion(ref_map, ref_bounds):
    data = r.evaluate_criterion(ref_map, ref_bounds)
    assert data.lam is not None and data.lam > 0
    return data


@pytest.fixture(scope="session")
def family_maps():
    """Default disk forward maps for n = 2, 3, 4 arcs at 8 currents."""
    maps = {}
    for n in (2, 3, 4):
        geometry = r.build_disk_geometry(n, REF_RADIUS, REF_SEGMENTS)
        maps[n] = (r.assemble(geometry, REF_MESH_SIZE, 8), r.BoxBounds(1.0, 2.0, n))
    return maps


def sample_box(rng: np.random.Generator, bounds: r.BoxBounds) -> np.ndarray:
    return bounds.a + (bounds.b - bounds.a) * rng.random(bounds.n)


def ordered_pair(rng: np.random.Generator, bounds: r.BoxBounds):
    lo = sample_box(rng, bounds)
    hi = lo + (bounds.b - lo) * rng.random(bounds.n)
    return lo, hi
