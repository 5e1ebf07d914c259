"""Parametric state-space models with analytic parameter derivatives.

The concrete family is a nonlinear Gaussian model truncated to a box:
the next state is drift(x) plus scaled noise, the observation is an
observation map of the state plus scaled noise, and both the drift and
the observation map are linear combinations of fixed feature functions
with the parameter vector as coefficients.  That linear structure makes
every mixed parameter derivative of the unnormalized kernels a Hermite
polynomial times the kernel itself, with no symbolic algebra; the
truncation normalizers and their derivatives come from grid quadrature.
"""
from __future__ import annotations

import abc
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .grid import GridMeasure, StateGrid
from .multiindex import (
    IndexSet,
    MultiIndex,
    enumerate_indices,
    pair_table,
)

_SQRT_2PI = math.sqrt(2.0 * math.pi)

FEATURE_FUNCTIONS = {
    "zero": lambda x: np.zeros_like(x),
    "one": lambda x: np.ones_like(x),
    "linear": lambda x: np.asarray(x, dtype=float) + 0.0,
    "tanh": np.tanh,
    "sin": np.sin,
}

_FEATURE_SCALARS = {
    "zero": lambda x: 0.0,
    "one": lambda x: 1.0,
    "linear": float,
    "tanh": math.tanh,
    "sin": math.sin,
}


def _gauss_ratio_derivs(z: np.ndarray, order: int) -> list[np.ndarray]:
    """pdf^(k)(z) / pdf(z) for the standard normal, orders 0..order.

    These are signed Hermite polynomials via the recurrence
    He_{k+1} = z He_k - k He_{k-1}; they stay representable even where
    the pdf itself underflows.
    """
    z = np.asarray(z, dtype=float)
    out = [np.ones_like(z)]
    if order == 0:
        return out
    he_prev = out[0]
    he = z + 0.0
    out.append(-he)
    for k in range(1, order):
        he, he_prev = z * he - k * he_prev, he
        sign = -1.0 if (k + 1) % 2 else 1.0
        out.append(sign * he)
    return out


def _gauss_pdf_derivs(z: np.ndarray, order: int) -> list[np.ndarray]:
    """Derivatives of the standard normal pdf at z, orders 0..order."""
    pdf = np.exp(-0.5 * np.asarray(z, dtype=float) ** 2) / _SQRT_2PI
    return [r * pdf for r in _gauss_ratio_derivs(z, order)]


@dataclass(frozen=True)
class ParameterPoint:
    """A parameter vector strictly inside its open box."""

    theta: tuple[float, ...]
    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "theta", tuple(float(t) for t in self.theta))
        object.__setattr__(self, "bounds", tuple((float(a), float(b)) for a, b in self.bounds))
        if len(self.theta) != len(self.bounds):
            raise ValueError("theta and bounds must have the same length")
        for t, (lo, hi) in zip(self.theta, self.bounds):
            if not lo < t < hi:
                raise ValueError(f"theta component {t} not strictly inside ({lo}, {hi})")

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.theta, dtype=float)


def theta_array(theta) -> np.ndarray:
    if isinstance(theta, ParameterPoint):
        return theta.array
    return np.asarray(theta, dtype=float)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """A simulated path: states X_0..X_n and observations Y_1..Y_n."""

    states: np.ndarray
    observations: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "states", np.asarray(self.states, dtype=float))
        object.__setattr__(self, "observations", np.asarray(self.observations, dtype=float))
        if self.states.shape[0] != self.observations.shape[0] + 1:
            raise ValueError("a trajectory needs exactly one more state than observations")

    def __len__(self) -> int:
        return self.observations.shape[0]


class ModelSpec(abc.ABC):
    """Capability contract for a parametric state-space model on a grid.

    The joint kernel factors into a transition density (in the new
    state, given the old) and an observation density (in the
    observation, given the new state); implementations expose whole
    derivative jets of both factors so callers can assemble any mixed
    kernel derivative by the Leibniz rule.
    """

    grid: StateGrid

    @property
    @abc.abstractmethod
    def dim_theta(self) -> int: ...

    @property
    @abc.abstractmethod
    def max_order(self) -> int: ...

    @property
    @abc.abstractmethod
    def parameter_box(self) -> tuple[tuple[float, float], ...]: ...

    @abc.abstractmethod
    def transition_jet(self, theta, x_new, x_old, index_set: IndexSet) -> np.ndarray:
        """Derivatives of the transition density, one slot per index."""

    @abc.abstractmethod
    def observation_jet(self, theta, y, x, index_set: IndexSet) -> np.ndarray:
        """Derivatives of the observation density, one slot per index."""

    @abc.abstractmethod
    def transition_sample(self, theta, x: float, rng: np.random.Generator) -> float: ...

    @abc.abstractmethod
    def observation_sample(self, theta, x: float, rng: np.random.Generator) -> float: ...

    def validate_theta(self, theta) -> np.ndarray:
        arr = theta_array(theta)
        if arr.shape != (self.dim_theta,):
            raise ValueError(f"theta must have shape ({self.dim_theta},), got {arr.shape}")
        for t, (lo, hi) in zip(arr, self.parameter_box):
            if not lo < t < hi:
                raise ValueError(f"theta component {t} outside the open box ({lo}, {hi})")
        return arr

    def validate_order(self, degree: int) -> None:
        if degree > self.max_order:
            raise ValueError(f"derivative order {degree} exceeds model order {self.max_order}")

    def index_set(self, order: int | None = None) -> IndexSet:
        return enumerate_indices(self.dim_theta, self.max_order if order is None else order)

    def observation_jet_factory(self, theta, x, index_set: IndexSet):
        """A single-observation evaluator with per-theta work hoisted out.

        The default just closes over observation_jet; models whose
        normalizer does not depend on the observation override this to
        precompute it once.
        """

        def at(y):
            return self.observation_jet(theta, y, x, index_set)

        return at

    def transition_grid_jet(self, theta, index_set: IndexSet) -> np.ndarray:
        """(K, N, N) transition jet tabulated on the model grid.

        The default handles scalar-state models by broadcasting the
        single coordinate; multivariate-state models override this.
        """
        if self.grid.dim != 1:
            raise NotImplementedError("override transition_grid_jet for multivariate states")
        x = self.grid.axis(0)
        return self.transition_jet(theta, x[:, None], x[None, :], index_set)

    def observation_grid_factory(self, theta, index_set: IndexSet):
        """Evaluator y -> (K, N) observation jet on the model grid."""
        if self.grid.dim != 1:
            raise NotImplementedError("override observation_grid_factory for multivariate states")
        return self.observation_jet_factory(theta, self.grid.axis(0), index_set)

    def kernel_jet(self, theta, y, x_new, x_old, index_set: IndexSet) -> np.ndarray:
        """Joint-kernel derivatives assembled by the Leibniz rule.

        Slot a holds the mixed derivative of observation(y | x_new) times
        transition(x_new | x_old), broadcast over x_new and x_old.
        """
        obs = self.observation_jet(theta, y, x_new, index_set)
        trans = self.transition_jet(theta, x_new, x_old, index_set)
        shape = np.broadcast_shapes(obs.shape[1:], trans.shape[1:])
        out = np.zeros((len(index_set),) + shape)
        for k, pairs in enumerate(pair_table(index_set)):
            acc = out[k]
            for coeff, b_slot, g_slot in pairs:
                acc += coeff * obs[b_slot] * trans[g_slot]
        return out

    def kernel_derivative(self, alpha, theta, y, x_new, x_old) -> np.ndarray:
        """Single mixed derivative of the joint kernel at (y, x_new | x_old)."""
        alpha = MultiIndex(alpha)
        self.validate_order(alpha.degree)
        iset = enumerate_indices(self.dim_theta, alpha.degree)
        return self.kernel_jet(theta, y, x_new, x_old, iset)[iset.slot(alpha)]

    def transition_derivative(self, alpha, theta, x_new, x_old) -> np.ndarray:
        alpha = MultiIndex(alpha)
        self.validate_order(alpha.degree)
        iset = enumerate_indices(self.dim_theta, alpha.degree)
        return self.transition_jet(theta, x_new, x_old, iset)[iset.slot(alpha)]

    def observation_derivative(self, alpha, theta, y, x) -> np.ndarray:
        alpha = MultiIndex(alpha)
        self.validate_order(alpha.degree)
        iset = enumerate_indices(self.dim_theta, alpha.degree)
        return self.observation_jet(theta, y, x, iset)[iset.slot(alpha)]


def _quotient_jet(num: np.ndarray, den: np.ndarray, index_set: IndexSet) -> np.ndarray:
    """Jet of num/den from the jets of num and den (recursion in degree)."""
    out = np.empty_like(np.broadcast_arrays(num, den)[0])
    inv = 1.0 / den[0]
    for k, pairs in enumerate(pair_table(index_set)):
        acc = num[k].copy()
        for coeff, b_slot, g_slot in pairs:
            if b_slot == k:
                continue
            acc -= coeff * out[b_slot] * den[g_slot]
        out[k] = acc * inv
    return out


@dataclass(frozen=True, eq=False)
class TruncatedNonlinearModel(ModelSpec):
    """Nonlinear Gaussian state-space model truncated to a box.

    Scalar state and observation.  The drift is theta . drift_features(x)
    with unit-variance Gaussian noise scaled by trans_scale; the
    observation map is theta . obs_features(x) with noise scaled by
    obs_scale.  The transition density is truncated and renormalized on
    the grid's box; the observation density is truncated to obs_box when
    one is given, and left as a proper Gaussian density on the whole
    real line otherwise.
    """

    grid: StateGrid
    drift_features: tuple[str, ...]
    obs_features: tuple[str, ...]
    trans_scale: float
    obs_scale: float
    theta_box: tuple[tuple[float, float], ...]
    obs_box: tuple[float, float] | None = None
    order: int = 2
    obs_quad_cells: int = 161
    _obs_nodes: np.ndarray | None = field(default=None, repr=False)
    _obs_weights: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.grid.dim != 1:
            raise ValueError("this model family is scalar-state; grid must be 1-D")
        if len(self.drift_features) != len(self.obs_features):
            raise ValueError("drift and observation need one feature per parameter")
        for name in self.drift_features + self.obs_features:
            if name not in FEATURE_FUNCTIONS:
                raise ValueError(f"unknown feature function {name!r}")
        if not (self.trans_scale > 0.0 and self.obs_scale > 0.0):
            raise ValueError("noise scales must be positive (gain invertibility)")
        if self.order not in (1, 2, 3):
            raise ValueError("supported derivative orders are 1, 2, 3")
        if len(self.theta_box) != len(self.drift_features):
            raise ValueError("theta_box needs one interval per parameter")
        if self.obs_box is not None:
            lo, hi = self.obs_box
            if not hi > lo:
                raise ValueError("obs_box must be a nondegenerate interval")
            n = int(self.obs_quad_cells)
            h = (hi - lo) / n
            nodes = lo + h * (np.arange(n) + 0.5)
            object.__setattr__(self, "_obs_nodes", nodes)
            object.__setattr__(self, "_obs_weights", np.full(n, h))

    @property
    def dim_theta(self) -> int:
        return len(self.drift_features)

    @property
    def max_order(self) -> int:
        return self.order

    @property
    def parameter_box(self) -> tuple[tuple[float, float], ...]:
        return self.theta_box

    @property
    def compact_observations(self) -> bool:
        return self.obs_box is not None

    # -- feature maps --------------------------------------------------------
    def _features(self, names: tuple[str, ...], x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.stack([FEATURE_FUNCTIONS[n](x) for n in names])

    def drift(self, theta, x) -> np.ndarray:
        theta = theta_array(theta)
        return np.tensordot(theta, self._features(self.drift_features, x), axes=1)

    def observation_map(self, theta, x) -> np.ndarray:
        theta = theta_array(theta)
        return np.tensordot(theta, self._features(self.obs_features, x), axes=1)

    # -- unnormalized kernels and their jets ----------------------------------
    def _location_jet(self, names, scale, theta, target, x, index_set, ratios=False) -> np.ndarray:
        """Jet of pdf((target - theta . features(x)) / scale).

        The standardized residual is affine in theta, so the mixed
        derivative for index a is pdf^(|a|) times the product of the
        per-coordinate slopes raised to the entries of a.  With
        ratios=True the jet is divided by its own zero slot, which stays
        finite arbitrarily far into the tails.
        """
        theta = theta_array(theta)
        target = np.asarray(target, dtype=float)
        feats = self._features(names, x)
        location = np.tensordot(theta, feats, axes=1)
        z = (target - location) / scale
        if ratios:
            pdf_derivs = _gauss_ratio_derivs(z, index_set.order)
        else:
            pdf_derivs = _gauss_pdf_derivs(z, index_set.order)
        slopes = -feats / scale
        out = np.empty((len(index_set),) + z.shape)
        for k, alpha in enumerate(index_set.indices):
            factor = np.ones_like(np.asarray(x, dtype=float))
            for i, a_i in enumerate(alpha):
                if a_i:
                    factor = factor * slopes[i] ** a_i
            out[k] = pdf_derivs[alpha.degree] * factor
        return out

    def transition_kernel_jet(self, theta, x_new, x_old, index_set) -> np.ndarray:
        """Jet of the untruncated transition numerator."""
        return self._location_jet(
            self.drift_features, self.trans_scale, theta, x_new, x_old, index_set
        )

    def observation_kernel_jet(self, theta, y, x, index_set) -> np.ndarray:
        """Jet of the untruncated observation numerator."""
        return self._location_jet(self.obs_features, self.obs_scale, theta, y, x, index_set)

    def observation_score_jet(self, theta, y, x, index_set) -> np.ndarray:
        """Observation jet divided by the density itself (slot 0 becomes one).

        On an unbounded observation domain the normalizer is constant in
        theta, so the scores are pure Hermite ratios and stay finite in
        the far tails where the density underflows.
        """
        theta = self.validate_theta(theta)
        self.validate_order(index_set.order)
        if self.obs_box is None:
            return self._location_jet(
                self.obs_features, self.obs_scale, theta, y, x, index_set, ratios=True
            )
        jet = self.observation_jet(theta, y, x, index_set)
        return jet / jet[0]

    def transition_score_jet(self, theta, x_new, x_old, index_set) -> np.ndarray:
        """Transition jet divided by the density itself (slot 0 becomes one)."""
        jet = self.transition_jet(theta, x_new, x_old, index_set)
        return jet / jet[0]

    # -- truncated densities ---------------------------------------------------
    def transition_jet(self, theta, x_new, x_old, index_set) -> np.ndarray:
        theta = self.validate_theta(theta)
        self.validate_order(index_set.order)
        x_old = np.asarray(x_old, dtype=float)
        num = self.transition_kernel_jet(theta, x_new, x_old, index_set)
        nodes = self.grid.axis(0).reshape((-1,) + (1,) * x_old.ndim)
        node_jet = self.transition_kernel_jet(theta, nodes, x_old, index_set)
        den = np.tensordot(node_jet, self.grid.weights, axes=([1], [0]))
        if np.any(den[0] <= 0.0):
            raise ValueError("transition normalizer vanished on the grid")
        den = den.reshape(den.shape[:1] + (1,) * (num.ndim - den.ndim) + den.shape[1:])
        return _quotient_jet(num, den, index_set)

    def _observation_normalizer_jet(self, theta, x, index_set) -> np.ndarray:
        """Jet of the observation-truncation normalizer, shape (K,) + x.shape."""
        if self.obs_box is None:
            # Lebesgue normalizer over the real line: constant in theta.
            den = np.zeros((len(index_set),) + x.shape)
            den[0] = self.obs_scale
            return den
        nodes = self._obs_nodes.reshape((-1,) + (1,) * x.ndim)
        node_jet = self.observation_kernel_jet(theta, nodes, x, index_set)
        den = np.tensordot(node_jet, self._obs_weights, axes=([1], [0]))
        if np.any(den[0] <= 0.0):
            raise ValueError("observation normalizer vanished on the quadrature")
        return den

    def observation_jet(self, theta, y, x, index_set) -> np.ndarray:
        theta = self.validate_theta(theta)
        self.validate_order(index_set.order)
        x = np.asarray(x, dtype=float)
        self._check_obs_domain(y)
        num = self.observation_kernel_jet(theta, y, x, index_set)
        den = self._observation_normalizer_jet(theta, x, index_set)
        den = den.reshape(den.shape[:1] + (1,) * (num.ndim - den.ndim) + den.shape[1:])
        return _quotient_jet(num, den, index_set)

    def observation_jet_factory(self, theta, x, index_set):
        """Per-observation evaluator with all x-dependent work precomputed.

        The feature values, slope powers, and truncation normalizer on
        the fixed states are built once; each observation then costs one
        Gaussian evaluation plus the quotient recursion.
        """
        theta = self.validate_theta(theta)
        self.validate_order(index_set.order)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        feats = self._features(self.obs_features, x)
        location = theta @ feats
        slopes = -feats / self.obs_scale
        factors = np.empty((len(index_set),) + x.shape)
        for k, alpha in enumerate(index_set.indices):
            f = np.ones_like(x)
            for i, a_i in enumerate(alpha):
                if a_i:
                    f = f * slopes[i] ** a_i
            factors[k] = f
        den = self._observation_normalizer_jet(theta, x, index_set)
        degrees = index_set.degrees
        order = index_set.order
        scale = self.obs_scale

        def at(y):
            self._check_obs_domain(y)
            z = (float(y) - location) / scale
            pdf_derivs = _gauss_pdf_derivs(z, order)
            num = np.empty_like(factors)
            for k in range(factors.shape[0]):
                num[k] = pdf_derivs[degrees[k]] * factors[k]
            return _quotient_jet(num, den, index_set)

        return at

    def _check_obs_domain(self, y) -> None:
        if self.obs_box is None:
            return
        lo, hi = self.obs_box
        y = np.asarray(y, dtype=float)
        if np.any(y < lo) or np.any(y > hi):
            raise ValueError(f"observation outside the domain [{lo}, {hi}]")

    # -- sampling ---------------------------------------------------------------
    def _scalar_location(self, names, theta, x: float) -> float:
        return float(
            sum(t * _FEATURE_SCALARS[n](x) for t, n in zip(theta_array(theta), names))
        )

    def transition_sample(self, theta, x, rng) -> float:
        lo, hi = self.grid.bounds[0]
        loc = self._scalar_location(self.drift_features, theta, float(x))
        while True:
            draw = loc + self.trans_scale * rng.standard_normal()
            if lo <= draw <= hi:
                return draw

    def observation_sample(self, theta, x, rng) -> float:
        loc = self._scalar_location(self.obs_features, theta, float(x))
        if self.obs_box is None:
            return loc + self.obs_scale * rng.standard_normal()
        lo, hi = self.obs_box
        while True:
            draw = loc + self.obs_scale * rng.standard_normal()
            if lo <= draw <= hi:
                return draw


def kernel_matrix(model: ModelSpec, alpha, theta, y, grid: StateGrid) -> np.ndarray:
    """Mixed kernel derivative tabulated on the grid.

    Entry (i, j) is the alpha-derivative of the joint kernel at
    (y, x_i | x_j).  The grid must be the model's own grid, since the
    truncation normalizers are quadratures on it.
    """
    alpha = MultiIndex(alpha)
    model.validate_order(alpha.degree)
    theta = model.validate_theta(theta)
    if not grid.compatible(model.grid):
        raise ValueError("kernel_matrix grid differs from the model grid")
    iset = enumerate_indices(model.dim_theta, alpha.degree)
    trans = model.transition_grid_jet(theta, iset)
    obs = model.observation_grid_factory(theta, iset)(y)
    out = np.zeros(trans.shape[1:])
    for coeff, b_slot, g_slot in pair_table(iset)[iset.slot(alpha)]:
        out += coeff * obs[b_slot][:, None] * trans[g_slot]
    return out


def simulate(model: ModelSpec, theta, lam0: GridMeasure, n: int, seed: int) -> Trajectory:
    """Sample a trajectory of the model dynamics, deterministic given the seed.

    X_0 is drawn from lam0 restricted to the grid nodes; each later step
    draws the state transition and then the observation.
    """
    if n < 1:
        raise ValueError("trajectory length must be >= 1")
    theta = model.validate_theta(theta)
    if not lam0.is_probability():
        raise ValueError("initial law must be a probability measure")
    rng = np.random.default_rng(seed)
    pmf = np.clip(lam0.density * lam0.grid.weights, 0.0, None)
    pmf = pmf / pmf.sum()
    states = np.empty(n + 1)
    observations = np.empty(n)
    states[0] = lam0.grid.axis(0)[rng.choice(lam0.grid.size, p=pmf)]
    for k in range(n):
        states[k + 1] = model.transition_sample(theta, states[k], rng)
        observations[k] = model.observation_sample(theta, states[k + 1], rng)
    return Trajectory(states=states, observations=observations, seed=seed)


@dataclass(frozen=True, eq=False)
class AssumptionConstants:
    """Empirical estimates of the mixing and score-envelope constants.

    epsilon is the two-sided mixing ratio built from grid extrema of the
    factor densities; psi_constant is the per-unit-degree score envelope;
    psi_values tabulates max_{a, x, x'} |d^a r| / r per sampled y;
    envelope_holds records whether the constructed envelope dominates
    the table at every sampled point.
    """

    variant: str
    epsilon: float
    psi_constant: float
    phi_bound: float
    density_min: float
    deriv_max: float
    psi_values: np.ndarray
    y_values: np.ndarray
    growth_exponent: float
    envelope_holds: bool


def assumption_constants(
    model: TruncatedNonlinearModel, theta_samples, y_samples, grid: StateGrid | None = None
) -> AssumptionConstants:
    """Estimate the mixing/envelope constants by scanning grids and samples.

    Transition and observation densities (with all derivatives up to the
    model order) are evaluated on the grid for each sampled theta; the
    per-observation score table is the max ratio |d^a r| / r over states.
    """
    grid = model.grid if grid is None else grid
    if not grid.compatible(model.grid):
        raise ValueError("assumption constants must be scanned on the model grid")
    theta_samples = [model.validate_theta(t) for t in theta_samples]
    y_values = np.atleast_1d(np.asarray(y_samples, dtype=float))
    if len(theta_samples) == 0 or y_values.size == 0:
        raise ValueError("sample sets must be nonempty")

    iset = model.index_set()
    x = grid.axis(0)
    compact = model.compact_observations
    degrees = np.asarray(iset.degrees)

    p_min = math.inf
    p_deriv_max = 0.0
    q_max = 0.0
    q_all_max = 0.0
    q_scaled_ratio = 0.0
    ratio_max = np.zeros((y_values.size, len(iset)))
    table = pair_table(iset)
    for theta in theta_samples:
        trans = model.transition_jet(theta, x[:, None], x[None, :], iset)
        if float(trans[0].min()) <= 0.0:
            raise ValueError("joint kernel vanished on the grid; mixing assumption fails")
        p_min = min(p_min, float(trans[0].min()))
        p_deriv_max = max(p_deriv_max, float(np.abs(trans).max()))
        p_scores = trans / trans[0]
        # Level constants come from the observation density over a scan set:
        # the quadrature nodes for a compact domain, a central probe band
        # plus the samples otherwise.
        if compact:
            y_scan = np.concatenate([y_values, model._obs_nodes])
        else:
            obs_locations = model.observation_map(theta, x)
            pad = 4.0 * model.obs_scale
            probe = np.linspace(obs_locations.min() - pad, obs_locations.max() + pad, 41)
            y_scan = np.concatenate([y_values, probe])
        obs = model.observation_jet(theta, y_scan[:, None], x[None, :], iset)
        q_max = max(q_max, float(obs[0].max()))
        q_all_max = max(q_all_max, float(np.abs(obs).max()))
        obs_scores = model.observation_score_jet(theta, y_scan[:, None], x[None, :], iset)
        if not compact:
            # Smallest constant dominating |d^b q| / (q (1+|y|)^(2|b|)).
            growth = (1.0 + np.abs(y_scan))[:, None]
            for k in range(1, len(iset)):
                scaled = np.abs(obs_scores[k]) / growth ** (2 * degrees[k])
                q_scaled_ratio = max(q_scaled_ratio, float(scaled.max()))
        # Joint-kernel score ratios on the sampled y only, assembled from the
        # factor scores so the far observation tails stay representable.
        score_y = obs_scores[:, : y_values.size, :]
        for k in range(1, len(iset)):
            num = np.zeros((y_values.size, x.size, x.size))
            for coeff, b_slot, g_slot in table[k]:
                num += coeff * score_y[b_slot][:, :, None] * p_scores[g_slot][None, :, :]
            ratio_max[:, k] = np.maximum(ratio_max[:, k], np.abs(num).max(axis=(1, 2)))
    psi_table = ratio_max.max(axis=1)

    if compact:
        eps1 = min(p_min, _compact_q_min(model, theta_samples, x))
        if eps1 <= 0.0:
            raise ValueError("zero kernel encountered; mixing assumption fails on the grid")
        k1 = max(p_deriv_max, q_all_max)
        epsilon = min(eps1 * eps1, 1.0 / (k1 * k1))
        psi_constant = 2.0 * k1 * k1 / (eps1 * eps1)
        phi_bound = k1 * k1
        envelope = np.full(y_values.size, psi_constant)
        density_min = eps1
        deriv_max = k1
    else:
        eps2 = p_min
        if eps2 <= 0.0:
            raise ValueError("zero kernel encountered; mixing assumption fails on the grid")
        k2 = p_deriv_max
        k3 = max(q_max, q_scaled_ratio, 1.0)
        epsilon = min(eps2, 1.0 / k2)
        psi_constant = 2.0 * k2 * k3 / (eps2 * eps2)
        phi_bound = k2 * k3
        envelope = psi_constant * (1.0 + np.abs(y_values)) ** 2
        density_min = eps2
        deriv_max = k2

    envelope_holds = True
    for k in range(1, len(iset)):
        if np.any(ratio_max[:, k] > envelope ** degrees[k] * (1.0 + 1e-9)):
            envelope_holds = False
    growth_exponent = _loglog_slope(1.0 + np.abs(y_values), psi_table)

    return AssumptionConstants(
        variant="compact" if compact else "unbounded",
        epsilon=float(epsilon),
        psi_constant=float(psi_constant),
        phi_bound=float(phi_bound),
        density_min=float(density_min),
        deriv_max=float(deriv_max),
        psi_values=psi_table,
        y_values=y_values,
        growth_exponent=float(growth_exponent),
        envelope_holds=envelope_holds,
    )


def _compact_q_min(model: TruncatedNonlinearModel, theta_samples, x) -> float:
    q_min = math.inf
    iset = enumerate_indices(model.dim_theta, 0)
    for theta in theta_samples:
        obs = model.observation_jet(theta, model._obs_nodes[:, None], x[None, :], iset)
        q_min = min(q_min, float(obs[0].min()))
    return q_min


def _loglog_slope(scale: np.ndarray, values: np.ndarray) -> float:
    mask = (values > 0.0) & (scale > 0.0)
    if mask.sum() < 2 or np.ptp(np.log(scale[mask])) == 0.0:
        return 0.0
    return float(np.polyfit(np.log(scale[mask]), np.log(values[mask]), 1)[0])
