import numpy as np
import pytest

from filterjet import (
    FDScheme,
    GridMeasure,
    ParameterPoint,
    Trajectory,
    assumption_constants,
    fd_derivative,
    kernel_matrix,
    simulate,
    stationary_law,
)
from filterjet.multiindex import MultiIndex, enumerate_indices

from conftest import THETA, make_model


class TestParameterPoint:
    def test_strict_interior_required(self):
        with pytest.raises(ValueError):
            ParameterPoint((0.2, 0.9), ((0.2, 1.5), (0.2, 1.5)))
        pp = ParameterPoint((0.8, 0.9), ((0.2, 1.5), (0.2, 1.5)))
        assert pp.array.tolist() == [0.8, 0.9]

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            ParameterPoint((0.5,), ((0.2, 1.5), (0.2, 1.5)))


class TestTrajectory:
    def test_length_consistency(self):
        with pytest.raises(ValueError):
            Trajectory(states=np.zeros(3), observations=np.zeros(3))
        t = Trajectory(states=np.zeros(4), observations=np.zeros(3))
        assert len(t) == 3


class TestKernelMatrix:
    def test_zero_index_nonnegative(self, model32, theta):
        mat = kernel_matrix(model32, (0, 0), theta, 0.5, model32.grid)
        assert np.all(mat >= 0.0)

    def test_column_sums_equal_observation_mass_for_constant_obs(self):
        # observation map identically zero: q(y | x') does not depend on x',
        # so every column integrates to that common observation density.
        model = make_model(obs=("zero", "zero"))
        theta = THETA
        y = 1.3
        mat = kernel_matrix(model, (0, 0), theta, y, model.grid)
        col_sums = model.grid.weights @ mat
        iset = enumerate_indices(2, 0)
        q = model.observation_jet(theta, y, model.grid.axis(0)[:1], iset)[0][0]
        assert np.allclose(col_sums, q, rtol=1e-12, atol=1e-15)

    def test_first_derivative_matches_central_difference(self, model32, theta):
        h = 1e-4
        grid = model32.grid
        analytic = kernel_matrix(model32, (1, 0), theta, 0.5, grid)
        up = kernel_matrix(model32, (0, 0), theta + np.array([h, 0.0]), 0.5, grid)
        dn = kernel_matrix(model32, (0, 0), theta - np.array([h, 0.0]), 0.5, grid)
        fd = (up - dn) / (2 * h)
        rel = np.max(np.abs(analytic - fd)) / np.max(np.abs(fd))
        assert rel <= 1e-6

    def test_order_and_domain_validation(self, model32, theta):
        with pytest.raises(ValueError):
            kernel_matrix(model32, (2, 1), theta, 0.5, model32.grid)  # degree 3 > order 2
        with pytest.raises(ValueError):
            kernel_matrix(model32, (0, 0), np.array([0.1, 0.9]), 0.5, model32.grid)
        with pytest.raises(ValueError):
            kernel_matrix(model32, (0, 0), theta, 9.5, model32.grid)  # y outside box


class TestTruncatedDensities:
    def test_transition_normalized_on_grid(self, model32, theta):
        x = model32.grid.axis(0)
        iset = enumerate_indices(2, 0)
        dens = model32.transition_jet(theta, x[:, None], x[None, :], iset)[0]
        masses = model32.grid.weights @ dens
        assert np.max(np.abs(masses - 1.0)) <= 1e-8

    def test_transition_density_strictly_positive(self, model32, theta):
        x = model32.grid.axis(0)
        iset = enumerate_indices(2, 0)
        dens = model32.transition_jet(theta, x[:, None], x[None, :], iset)[0]
        observed_min = dens.min()
        assert observed_min > 0.0

    def test_observation_normalized_on_quadrature(self, model32, theta):
        iset = enumerate_indices(2, 0)
        x = model32.grid.axis(0)
        nodes = model32._obs_nodes
        q = model32.observation_jet(theta, nodes[:, None], x[None, :], iset)[0]
        masses = model32._obs_weights @ q
        assert np.max(np.abs(masses - 1.0)) <= 1e-10

    def test_joint_kernel_integrates_to_one(self, model32, theta):
        # integrate the joint kernel over observation and new state
        iset = enumerate_indices(2, 0)
        x = model32.grid.axis(0)
        nodes = model32._obs_nodes
        total = np.zeros(x.size)
        for y, wy in zip(nodes, model32._obs_weights):
            mat = model32.kernel_jet(theta, y, x[:, None], x[None, :], iset)[0]
            total += wy * (model32.grid.weights @ mat)
        assert np.max(np.abs(total - 1.0)) <= 1e-10

    def test_unbounded_observation_density_proper(self, gaussian_model, theta):
        iset = enumerate_indices(2, 0)
        x = gaussian_model.grid.axis(0)
        ys = np.linspace(-12, 12, 2001)
        q = gaussian_model.observation_jet(theta, ys[:, None], x[None, :], iset)[0]
        masses = np.trapezoid(q, ys, axis=0)
        assert np.max(np.abs(masses - 1.0)) <= 1e-6

    def test_transition_first_derivative_fd(self, model32, theta):
        h = 1e-4
        x = model32.grid.axis(0)
        iset = enumerate_indices(2, 1)
        analytic = model32.transition_jet(theta, x[:, None], x[None, :], iset)
        up = model32.transition_jet(theta + np.array([h, 0]), x[:, None], x[None, :], iset)[0]
        dn = model32.transition_jet(theta - np.array([h, 0]), x[:, None], x[None, :], iset)[0]
        fd = (up - dn) / (2 * h)
        rel = np.max(np.abs(analytic[iset.slot((1, 0))] - fd)) / np.max(np.abs(fd))
        assert rel <= 1e-6

    def test_all_orders_match_richardson_differences(self, model32, theta):
        # every mixed derivative of the joint kernel against the oracle
        scheme = FDScheme(1e-3, 2)
        y = -0.7
        grid = model32.grid
        f = lambda th: kernel_matrix(model32, (0, 0), th, y, grid)  # noqa: E731
        for alpha in enumerate_indices(2, 2).indices:
            if alpha.degree == 0:
                continue
            fd = fd_derivative(f, alpha, theta, scheme, bounds=model32.parameter_box)
            analytic = kernel_matrix(model32, alpha, theta, y, grid)
            scale = max(np.max(np.abs(fd)), 1e-12)
            assert np.max(np.abs(analytic - fd)) / scale <= 1e-4

    def test_single_index_evaluators_match_jets(self, model32, theta):
        # the scalar-index evaluators agree with the corresponding jet rows
        x = model32.grid.axis(0)
        for alpha in ((1, 0), (0, 2), (1, 1)):
            iset = enumerate_indices(2, MultiIndex(alpha).degree)
            trans = model32.transition_derivative(alpha, theta, x[:, None], x[None, :])
            jet = model32.transition_jet(theta, x[:, None], x[None, :], iset)
            assert np.array_equal(trans, jet[iset.slot(alpha)])
            obs = model32.observation_derivative(alpha, theta, 0.4, x)
            ojet = model32.observation_jet(theta, 0.4, x, iset)
            assert np.array_equal(obs, ojet[iset.slot(alpha)])
            kd = model32.kernel_derivative(alpha, theta, 0.4, x[:, None], x[None, :])
            km = kernel_matrix(model32, alpha, theta, 0.4, model32.grid)
            assert np.allclose(kd, km, rtol=0, atol=0)

    def test_observation_first_derivative_fd(self, model32, theta):
        h = 1e-4
        x = model32.grid.axis(0)
        up = model32.observation_derivative((0, 0), theta + np.array([0, h]), 1.2, x)
        dn = model32.observation_derivative((0, 0), theta - np.array([0, h]), 1.2, x)
        fd = (up - dn) / (2 * h)
        analytic = model32.observation_derivative((0, 1), theta, 1.2, x)
        assert np.max(np.abs(analytic - fd)) / np.max(np.abs(fd)) <= 1e-6

    def test_symmetric_model_invariant_under_theta_swap(self):
        model = make_model(drift=("tanh", "tanh"), obs=("linear", "linear"))
        grid = model.grid
        a = kernel_matrix(model, (0, 0), np.array([0.5, 0.9]), 0.4, grid)
        b = kernel_matrix(model, (0, 0), np.array([0.9, 0.5]), 0.4, grid)
        assert np.allclose(a, b, rtol=0, atol=1e-15)

    def test_kernel_positivity_across_samples(self, model32):
        # strong positivity of the joint kernel on the compact domains
        iset = enumerate_indices(2, 0)
        x = model32.grid.axis(0)
        for th in ([0.8, 0.9], [0.3, 1.4], [1.4, 0.3]):
            for y in (-5.5, 0.0, 5.5):
                mat = model32.kernel_jet(np.asarray(th), y, x[:, None], x[None, :], iset)[0]
                assert mat.min() > 0.0


class TestSimulate:
    def test_deterministic_given_seed(self, model32, theta):
        lam = GridMeasure.uniform(model32.grid)
        a = simulate(model32, theta, lam, 50, seed=123)
        b = simulate(model32, theta, lam, 50, seed=123)
        assert np.array_equal(a.states, b.states)
        assert np.array_equal(a.observations, b.observations)
        c = simulate(model32, theta, lam, 50, seed=124)
        assert not np.array_equal(a.observations, c.observations)

    def test_states_and_observations_stay_in_domains(self, model32, theta):
        lam = GridMeasure.uniform(model32.grid)
        traj = simulate(model32, theta, lam, 400, seed=5)
        lo, hi = model32.grid.bounds[0]
        assert np.all((traj.states >= lo) & (traj.states <= hi))
        olo, ohi = model32.obs_box
        assert np.all((traj.observations >= olo) & (traj.observations <= ohi))

    def test_tiny_noise_tracks_deterministic_map(self):
        model = make_model(trans_scale=1e-6, obs_scale=1e-6, obs_box=(-6.0, 6.0))
        theta = THETA
        lam = GridMeasure.point_mass(model.grid, model.grid.size // 2)
        traj = simulate(model, theta, lam, 30, seed=9)
        x = traj.states[0]
        for k in range(30):
            x = theta[0] * np.tanh(x)
            assert abs(traj.states[k + 1] - x) <= 1e-3

    def test_empirical_stationary_histogram(self, model32, theta):
        # long-run histogram against the power-iteration stationary law
        lam = GridMeasure.uniform(model32.grid)
        n = 100_000
        traj = simulate(model32, theta, lam, n, seed=31)
        grid = model32.grid
        lo, hi = grid.bounds[0]
        h = (hi - lo) / grid.size
        cells = np.clip(((traj.states[1:] - lo) / h).astype(int), 0, grid.size - 1)
        empirical = np.bincount(cells, minlength=grid.size) / n
        pi = stationary_law(model32, theta).law
        pi_cells = pi.density * grid.weights
        tv = 0.5 * np.sum(np.abs(empirical - pi_cells))
        assert tv <= 0.05

    def test_requires_probability_initial_law(self, model32, theta):
        bad = GridMeasure(np.full(model32.grid.size, 2.0), model32.grid)
        with pytest.raises(ValueError):
            simulate(model32, theta, bad, 5, seed=1)
        with pytest.raises(ValueError):
            simulate(model32, theta, GridMeasure.uniform(model32.grid), 0, seed=1)


@pytest.fixture(scope="module")
def compact(model32):
    thetas = [THETA, np.array([0.5, 1.2])]
    ys = np.linspace(-5.5, 5.5, 21)
    return assumption_constants(model32, thetas, ys)


@pytest.fixture(scope="module")
def unbounded(gaussian_model):
    thetas = [THETA, np.array([0.5, 1.2])]
    ys = np.geomspace(5.0, 500.0, 25)
    return assumption_constants(gaussian_model, thetas, ys)


class TestAssumptionConstants:
    def test_epsilon_strictly_inside_unit_interval(self, compact, unbounded):
        assert 0.0 < compact.epsilon < 1.0
        assert 0.0 < unbounded.epsilon < 1.0

    def test_compact_variant_has_uniform_envelope(self, compact):
        assert compact.variant == "compact"
        assert compact.envelope_holds
        assert np.all(compact.psi_values <= compact.psi_constant**2)

    def test_unbounded_growth_exponent_near_two(self, unbounded):
        assert unbounded.variant == "unbounded"
        assert 1.8 <= unbounded.growth_exponent <= 2.2
        assert unbounded.envelope_holds

    def test_score_table_positive_and_finite(self, compact, unbounded):
        for record in (compact, unbounded):
            assert np.all(np.isfinite(record.psi_values))
            assert np.all(record.psi_values > 0.0)

    def test_empty_samples_rejected(self, model32):
        with pytest.raises(ValueError):
            assumption_constants(model32, [], [0.0])
