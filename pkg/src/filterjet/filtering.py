"""The derivative-filter recursion on a grid.

One filter step maps a vector measure whose slot 0 is a probability
measure to another such vector measure.  Slot 0 receives the plain
Bayes prediction-update; higher slots receive the mixed parameter
derivatives of the updated filter, computed by a single forward pass in
index degree.  After every step, slot 0 has mass one and each higher
slot has signed mass zero; those invariants are asserted, not enforced,
so drift is a regression signal rather than silently hidden.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridMeasure, StateGrid, VectorMeasure
from .models import ModelSpec
from .multiindex import IndexSet, MultiIndex, enumerate_indices, pair_table

MASS_TOL = 1e-10
PREDICTIVE_FLOOR = 1e-300


class PredictiveMassError(ArithmeticError):
    """Predictive mass vanished numerically; usually a mis-specified setup."""

    def __init__(self, mass: float, observation_index: int | None = None):
        self.mass = mass
        self.observation_index = observation_index
        where = "" if observation_index is None else f" at observation index {observation_index}"
        super().__init__(f"predictive mass {mass!r} below {PREDICTIVE_FLOOR}{where}")


class MassInvariantError(ArithmeticError):
    """A filter-step output violated the slot-mass invariants."""


class KernelCache:
    """Per-(model, theta) kernel jets reused across filter steps.

    The transition-derivative matrices do not depend on the observation,
    so they are built once; each step only assembles the observation
    jet on the grid and combines the two by the Leibniz rule.
    """

    def __init__(self, model: ModelSpec, theta, index_set: IndexSet | None = None):
        self.model = model
        self.theta = model.validate_theta(theta)
        self.index_set = model.index_set() if index_set is None else index_set
        model.validate_order(self.index_set.order)
        self.grid = model.grid
        # (K, N, N): slot k holds the transition jet row on the grid.
        self.trans = model.transition_grid_jet(self.theta, self.index_set)
        self._pairs = pair_table(self.index_set)
        self._obs_at = model.observation_grid_factory(self.theta, self.index_set)

    def observation_vectors(self, y) -> np.ndarray:
        """(K, N) observation-density jet at a single observation."""
        return self._obs_at(float(y))

    def matrices(self, y) -> np.ndarray:
        """(K, N, N) joint-kernel jet at a single observation."""
        obs = self.observation_vectors(y)
        out = np.zeros_like(self.trans)
        for k, pairs in enumerate(self._pairs):
            acc = out[k]
            for coeff, b_slot, g_slot in pairs:
                acc += coeff * obs[b_slot][:, None] * self.trans[g_slot]
        return out


@dataclass(frozen=True, eq=False)
class FilterState:
    """Result of folding filter steps over an observation block."""

    measure: VectorMeasure
    step: int
    origin: int
    theta: np.ndarray
    history: tuple[VectorMeasure, ...] | None = None


def total_mass(measure: GridMeasure) -> float:
    """Signed total mass of a grid measure."""
    return measure.total_mass()


def apply_R(model: ModelSpec, alpha, theta, y, lam: GridMeasure) -> GridMeasure:
    """One unnormalized prediction-update with a mixed kernel derivative.

    The output density at x is the integral of the alpha-derivative of
    the joint kernel at (y, x | x') against lam(dx').
    """
    alpha = MultiIndex(alpha)
    model.validate_order(alpha.degree)
    if not lam.grid.compatible(model.grid):
        raise ValueError("measure grid differs from the model grid")
    theta = model.validate_theta(theta)
    iset = enumerate_indices(model.dim_theta, alpha.degree)
    cache = KernelCache(model, theta, iset)
    mat = cache.matrices(y)[iset.slot(alpha)]
    return GridMeasure(mat @ (lam.density * lam.grid.weights), lam.grid)


def _require_l0(measure: VectorMeasure) -> None:
    if not measure.is_l0(tol=1e-8):
        raise ValueError("vector measure is not in the recursion state space (slot 0 must be a probability)")


def _step_core(cache: KernelCache, y, measure: VectorMeasure):
    """Shared single-step work: updated densities plus the step scalars.

    Returns (components, s_masses, predictive_mass) where components is
    the (K, N) array of updated slot densities, s_masses[k] the total
    mass of the k-th normalized prediction-update, and predictive_mass
    the unnormalized slot-0 mass that normalizes everything.
    """
    iset = cache.index_set
    grid = cache.grid
    weighted = measure.components * grid.weights
    mats = cache.matrices(y)
    # r_update[g, b] = unnormalized update of slot b by the g-derivative kernel.
    n_slots = len(iset)
    r_update = {}
    for g in range(n_slots):
        for b in range(n_slots):
            if iset.degrees[g] + iset.degrees[b] <= iset.order:
                r_update[g, b] = mats[g] @ weighted[b]
    predictive = float(np.dot(r_update[0, 0], grid.weights))
    if not predictive > PREDICTIVE_FLOOR:
        raise PredictiveMassError(predictive)

    s_dens = np.zeros((n_slots, grid.size))
    for k, pairs in enumerate(pair_table(iset)):
        acc = s_dens[k]
        for coeff, b_slot, g_slot in pairs:
            acc += coeff * r_update[g_slot, b_slot]
        acc /= predictive
    s_masses = s_dens @ grid.weights

    f_dens = np.zeros_like(s_dens)
    f_dens[0] = s_dens[0]
    for k, pairs in enumerate(pair_table(iset)):
        if k == 0:
            continue
        acc = s_dens[k].copy()
        for coeff, b_slot, g_slot in pairs:
            if b_slot == k:
                continue
            acc -= coeff * f_dens[b_slot] * s_masses[g_slot]
        f_dens[k] = acc
    return f_dens, s_masses, predictive


def _check_masses(components: np.ndarray, grid: StateGrid) -> None:
    masses = components @ grid.weights
    if abs(masses[0] - 1.0) > MASS_TOL:
        raise MassInvariantError(f"slot-0 mass {masses[0]!r} differs from 1 beyond {MASS_TOL}")
    worst = float(np.max(np.abs(masses[1:]))) if masses.shape[0] > 1 else 0.0
    if worst > MASS_TOL:
        raise MassInvariantError(f"derivative-slot mass {worst!r} exceeds {MASS_TOL}")


def compute_s(model: ModelSpec, alpha, theta, y, measure: VectorMeasure) -> GridMeasure:
    """Normalized multi-derivative prediction-update (before recentering).

    Sums, over beta below alpha, the binomial-weighted (alpha - beta)
    kernel updates of slot beta, all divided by the slot-0 predictive
    mass.
    """
    alpha = MultiIndex(alpha)
    model.validate_order(alpha.degree)
    _require_l0(measure)
    if not measure.grid.compatible(model.grid):
        raise ValueError("measure grid differs from the model grid")
    iset = measure.index_set
    cache = KernelCache(model, theta, iset)
    weighted = measure.components * measure.grid.weights
    mats = cache.matrices(y)
    predictive = float(np.dot(mats[0] @ weighted[0], measure.grid.weights))
    if not predictive > PREDICTIVE_FLOOR:
        raise PredictiveMassError(predictive)
    k = iset.slot(alpha)
    acc = np.zeros(measure.grid.size)
    for coeff, b_slot, g_slot in pair_table(iset)[k]:
        acc += coeff * (mats[g_slot] @ weighted[b_slot])
    return GridMeasure(acc / predictive, measure.grid)


def filter_step(
    model: ModelSpec, theta, y, measure: VectorMeasure, cache: KernelCache | None = None
) -> VectorMeasure:
    """One full step of the derivative filter.

    Slot 0 becomes the Bayes-updated probability measure; each higher
    slot is its prediction-update minus the binomial-weighted recentering
    by lower slots, evaluated in increasing degree.
    """
    _require_l0(measure)
    if cache is None:
        cache = KernelCache(model, theta, measure.index_set)
    elif cache.index_set != measure.index_set or not np.array_equal(
        cache.theta, model.validate_theta(theta)
    ):
        raise ValueError("cache was built for a different index set or parameter")
    f_dens, _, _ = _step_core(cache, y, measure)
    _check_masses(f_dens, measure.grid)
    return VectorMeasure(f_dens, measure.index_set, measure.grid)


def filter_step_with_scalars(
    model: ModelSpec, theta, y, measure: VectorMeasure, cache: KernelCache | None = None
):
    """Filter step plus the per-step scalars shared with the jet recursion.

    Returns (updated measure, s_masses, predictive_mass).
    """
    _require_l0(measure)
    if cache is None:
        cache = KernelCache(model, theta, measure.index_set)
    elif cache.index_set != measure.index_set or not np.array_equal(
        cache.theta, model.validate_theta(theta)
    ):
        raise ValueError("cache was built for a different index set or parameter")
    f_dens, s_masses, predictive = _step_core(cache, y, measure)
    _check_masses(f_dens, measure.grid)
    return VectorMeasure(f_dens, measure.index_set, measure.grid), s_masses, predictive


def filter_iterate(
    model: ModelSpec,
    theta,
    observations,
    measure: VectorMeasure,
    keep_history: bool = False,
    origin: int = 0,
) -> FilterState:
    """Fold the filter step over an observation block.

    An empty block returns the initial condition unchanged.  With
    keep_history, every intermediate vector measure (including the
    initial one) is retained.
    """
    _require_l0(measure)
    theta_arr = model.validate_theta(theta)
    observations = np.atleast_1d(np.asarray(observations, dtype=float))
    cache = KernelCache(model, theta_arr, measure.index_set)
    history = [measure] if keep_history else None
    current = measure
    for j, y in enumerate(observations):
        try:
            current = filter_step(model, theta_arr, y, current, cache=cache)
        except PredictiveMassError as err:
            raise PredictiveMassError(err.mass, observation_index=origin + j + 1) from err
        if keep_history:
            history.append(current)
    return FilterState(
        measure=current,
        step=origin + len(observations),
        origin=origin,
        theta=theta_arr,
        history=tuple(history) if keep_history else None,
    )
