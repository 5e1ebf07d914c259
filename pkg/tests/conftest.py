import numpy as np
import pytest

from filterjet import GridMeasure, StateGrid, TruncatedNonlinearModel, embed


def make_model(cells=32, order=2, variant="compact", drift=("tanh", "zero"),
               obs=("zero", "linear"), trans_scale=0.5, obs_scale=0.7,
               state=(-3.0, 3.0), obs_box=(-6.0, 6.0), theta_box=((0.2, 1.5), (0.2, 1.5))):
    grid = StateGrid.uniform([state], cells)
    return TruncatedNonlinearModel(
        grid=grid,
        drift_features=drift,
        obs_features=obs,
        trans_scale=trans_scale,
        obs_scale=obs_scale,
        theta_box=theta_box,
        obs_box=obs_box if variant == "compact" else None,
        order=order,
    )


THETA = np.array([0.8, 0.9])


@pytest.fixture(scope="session")
def model32():
    return make_model(cells=32)


@pytest.fixture(scope="session")
def model8():
    return make_model(cells=8)


@pytest.fixture(scope="session")
def gaussian_model():
    return make_model(cells=32, variant="gaussian")


@pytest.fixture(scope="session")
def theta():
    return THETA.copy()


def random_l0(model, index_set, rng, derivative_scale=1.0):
    """A random element of the recursion state space."""
    grid = model.grid
    base = np.abs(rng.standard_normal(grid.size)) + 0.05
    components = derivative_scale * rng.standard_normal((len(index_set), grid.size))
    components[0] = base / np.dot(base, grid.weights)
    from filterjet import VectorMeasure

    return VectorMeasure(components, index_set, grid)


def uniform_embedding(model, order=None):
    iset = model.index_set(order)
    return embed(GridMeasure.uniform(model.grid), iset)
