"""Log-likelihood increments and their parameter-derivative jets.

The log joint observation density telescopes into per-step increments:
the log predictive mass of each new observation given the running
filter.  Its mixed parameter derivatives satisfy their own recursion in
index degree, driven by the same per-step prediction-update masses the
filter already computes, so one filter pass yields the whole jet.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .filtering import KernelCache, PredictiveMassError, filter_step_with_scalars
from .grid import GridMeasure, VectorMeasure, embed
from .models import ModelSpec, simulate, theta_array
from .multiindex import IndexSet, MultiIndex, enumerate_indices, shifted_pair_table
from .seeding import labeled_seed


@dataclass(frozen=True, eq=False)
class LogLikJet:
    """Log-likelihood value (slot 0) and its mixed derivatives by slot."""

    values: np.ndarray
    index_set: IndexSet
    increments: np.ndarray | None = None

    def value(self, alpha) -> float:
        return float(self.values[self.index_set.slot(alpha)])


def jet_increments_from_scalars(s_masses: np.ndarray, predictive: float, index_set: IndexSet) -> np.ndarray:
    """Per-step jet increments from one step's prediction-update masses.

    Slot 0 is the log predictive mass; degree-1 slots equal their update
    mass; higher slots recenter by lower ones through the unit-shifted
    binomial pairing.
    """
    out = np.empty(len(index_set))
    out[0] = math.log(predictive)
    pairs = shifted_pair_table(index_set)
    for k in range(1, len(index_set)):
        acc = s_masses[k]
        for coeff, b_slot, g_slot in pairs[k]:
            acc -= coeff * out[b_slot] * s_masses[g_slot]
        out[k] = acc
    return out


def psi_zero(model: ModelSpec, theta, y, measure: VectorMeasure) -> float:
    """Log predictive mass of one observation given the current slot-0 law."""
    theta = model.validate_theta(theta)
    if not measure.is_l0(tol=1e-8):
        raise ValueError("slot 0 must be a probability measure")
    cache = KernelCache(model, theta, measure.index_set)
    grid = measure.grid
    predictive = float(
        np.dot(cache.matrices(y)[0] @ (measure.components[0] * grid.weights), grid.weights)
    )
    if not predictive > 0.0:
        raise PredictiveMassError(predictive)
    return math.log(predictive)


def psi_alpha(model: ModelSpec, alpha, theta, y, measure: VectorMeasure) -> float:
    """One mixed derivative of the per-step log-likelihood increment."""
    alpha = MultiIndex(alpha)
    if alpha.degree < 1:
        raise ValueError("use psi_zero for the zero index")
    model.validate_order(alpha.degree)
    _, s_masses, predictive = filter_step_with_scalars(model, theta, y, measure)
    values = jet_increments_from_scalars(s_masses, predictive, measure.index_set)
    return float(values[measure.index_set.slot(alpha)])


def loglik_jet(
    model: ModelSpec,
    theta,
    observations,
    lam0: GridMeasure,
    keep_increments: bool = False,
) -> LogLikJet:
    """Accumulate the log-likelihood jet along the filter trajectory.

    Starts the filter from the embedding of lam0 and sums the per-step
    jet increments; slot 0 therefore equals the log joint observation
    density exactly (telescoping), and higher slots its derivatives.
    """
    observations = np.atleast_1d(np.asarray(observations, dtype=float))
    if observations.shape[0] < 1:
        raise ValueError("at least one observation is required")
    theta = model.validate_theta(theta)
    measure = embed(lam0, model.index_set())
    cache = KernelCache(model, theta, measure.index_set)
    totals = np.zeros(len(measure.index_set))
    steps = np.empty((observations.shape[0], len(measure.index_set))) if keep_increments else None
    for j, y in enumerate(observations):
        try:
            measure, s_masses, predictive = filter_step_with_scalars(
                model, theta, y, measure, cache=cache
            )
        except PredictiveMassError as err:
            raise PredictiveMassError(err.mass, observation_index=j + 1) from err
        increments = jet_increments_from_scalars(s_masses, predictive, measure.index_set)
        totals += increments
        if keep_increments:
            steps[j] = increments
    return LogLikJet(values=totals, index_set=measure.index_set, increments=steps)


@dataclass(frozen=True, eq=False)
class RateEstimate:
    """Monte-Carlo estimate of the per-step log-likelihood jet."""

    mean: np.ndarray
    stderr: np.ndarray
    index_set: IndexSet
    replicas: int
    horizon: int

    def slot(self, alpha) -> tuple[float, float]:
        k = self.index_set.slot(alpha)
        return float(self.mean[k]), float(self.stderr[k])


def avg_loglik_rate(
    model: ModelSpec,
    theta,
    lam0: GridMeasure,
    horizon: int,
    replicas: int,
    seed: int,
    data_theta=None,
    data_lam0: GridMeasure | None = None,
) -> RateEstimate:
    """Average per-step log-likelihood jet over simulated trajectories.

    Observations are simulated at data_theta (the evaluation parameter
    by default) started from data_lam0 (the evaluation initial law by
    default); each replica contributes its jet divided by the horizon.
    Keeping the seed and data arguments fixed while varying lam0 shares
    the trajectories, so initial-law comparisons are tightly coupled.
    """
    if replicas < 2:
        raise ValueError("at least two replicas are needed for a standard error")
    theta = model.validate_theta(theta)
    data_theta = theta if data_theta is None else model.validate_theta(data_theta)
    data_lam0 = lam0 if data_lam0 is None else data_lam0
    rows = np.empty((replicas, len(model.index_set())))
    for r in range(replicas):
        traj = simulate(
            model, data_theta, data_lam0, horizon, seed=labeled_seed(seed, "rate-replica", r)
        )
        jet = loglik_jet(model, theta, traj.observations, lam0)
        rows[r] = jet.values / horizon
    mean = rows.mean(axis=0)
    stderr = rows.std(axis=0, ddof=1) / math.sqrt(replicas)
    return RateEstimate(
        mean=mean,
        stderr=stderr,
        index_set=model.index_set(),
        replicas=replicas,
        horizon=horizon,
    )


@dataclass(frozen=True, eq=False)
class RmlTrace:
    """Parameter trace of the online gradient-ascent demonstration."""

    thetas: np.ndarray
    projections: int
    step_a: float
    step_b: float


def rml_demo(
    model: ModelSpec,
    theta_init,
    theta_true,
    step_a: float,
    step_b: float,
    n_steps: int,
    seed: int,
    lam0: GridMeasure | None = None,
) -> RmlTrace:
    """Online parameter estimation by stochastic gradient ascent.

    One long trajectory is simulated at theta_true; at each step the
    degree-1 jet increments at the current estimate serve as the
    gradient estimate, with decreasing steps a / (b + k).  Estimates
    that leave the parameter box are pulled back to its interior and
    counted.
    """
    if model.max_order < 1:
        raise ValueError("gradient ascent needs derivative order >= 1")
    theta_true = model.validate_theta(theta_true)
    current = model.validate_theta(theta_init).copy()
    lam0 = GridMeasure.uniform(model.grid) if lam0 is None else lam0
    iset = enumerate_indices(model.dim_theta, 1)
    grad_slots = [iset.slot(MultiIndex.unit(model.dim_theta, i)) for i in range(model.dim_theta)]
    box = np.asarray(model.parameter_box, dtype=float)
    margin = 1e-3 * (box[:, 1] - box[:, 0])

    traj = simulate(model, theta_true, lam0, n_steps, seed=labeled_seed(seed, "rml-path"))
    measure = embed(lam0, iset)
    trace = np.empty((n_steps + 1, model.dim_theta))
    trace[0] = current
    projections = 0
    for k, y in enumerate(traj.observations):
        measure, s_masses, predictive = filter_step_with_scalars(model, current, y, measure)
        increments = jet_increments_from_scalars(s_masses, predictive, iset)
        gradient = increments[grad_slots]
        current = current + (step_a / (step_b + k)) * gradient
        clipped = np.clip(current, box[:, 0] + margin, box[:, 1] - margin)
        if not np.array_equal(clipped, current):
            projections += 1
            current = clipped
        trace[k + 1] = current
    return RmlTrace(thetas=trace, projections=projections, step_a=step_a, step_b=step_b)
