import pytest

from services.mesh import normalize
from services.metrics import MetricParams
from services.raycast import build_accel
from services.viewsphere import make_grid
from tests.helpers import box_cluster, bumpy_sphere, flat_plate, icosphere, unit_cube


@pytest.fixture(scope="session")
def cube():
    """Normalized cube: bounding sphere through all 8 corners"""
    return normalize(unit_cube())


@pytest.fixture(scope="session")
def sphere():
    return normalize(icosphere(4))


@pytest.fixture(scope="session")
def bumpy():
    return bumpy_sphere(seed=7)


@pytest.fixture(scope="session")
def cluster():
    return box_cluster()


@pytest.fixture(scope="session")
def plate():
    return normalize(flat_plate())


@pytest.fixture(scope="session")
def grid():
    return make_grid()


@pytest.fixture(scope="session")
def params():
    return MetricParams()


@pytest.fixture(scope="session")
def accel_for():
    """Build (and cache) the BVH of a mesh"""
    cache = {}

    def build(mesh):
        # the mesh is kept alive so its id cannot be reused
        if id(mesh) not in cache:
            cache[id(mesh)] = (mesh, build_accel(mesh))
        return cache[id(mesh)][1]

    return build
