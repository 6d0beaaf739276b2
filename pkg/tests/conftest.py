import numpy as np
import pytest

from minkflow.sphere import build_grid


@pytest.fixture(scope="session")
def circle_256():
    return build_grid(1, 256)


@pytest.fixture(scope="session")
def circle_512():
    return build_grid(1, 512)


@pytest.fixture(scope="session")
def latlon_16_32():
    return build_grid(2, (16, 32))


def grid_aligned_even_body(grid, rng):
    """Random strictly convex even body whose support extrema sit on grid nodes.

    One even harmonic cos(2m (theta - theta_0)) with theta_0 a grid angle:
    the discrete argmax/argmin of u then coincide with the continuum ones,
    which is the regime where the support/radial inequalities are exact at
    the sample points.  Amplitude stays inside the convexity budget
    1 / (4 m^2 - 1).
    """
    theta = grid.angles[0]
    m = int(rng.integers(1, 4))
    amp = (0.3 + 0.5 * rng.random()) / (4 * m * m - 1)
    shift = theta[int(rng.integers(0, grid.node_count))]
    u = 1.0 + amp * np.cos(2 * m * (theta - shift))
    return 0.5 * (u + u[grid.antipode])
