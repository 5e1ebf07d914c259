"""Desk-scale stability experiments for the derivative filter.

Three measurable reproductions: exponential forgetting of initial
conditions (decay-rate fits on filter-distance curves), geometric
ergodicity of the augmented state-observation-filter chain (Monte-Carlo
spread across initial conditions), and the derivative identity (filter
jet slots against finite differences of the plain filter).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .filtering import KernelCache, filter_iterate, filter_step
from .grid import GridMeasure, VectorMeasure, embed, measure_distance
from .models import ModelSpec, simulate
from .multiindex import MultiIndex
from .oracle import FDScheme, fd_derivative
from .seeding import labeled_rng, labeled_seed

DISTANCE_FLOOR = 1e-300
FIT_NOISE_FLOOR = 1e-14  # below this, distances are rounding noise, not decay


def log_linear_fit(ns: np.ndarray, values: np.ndarray) -> tuple[float, float, float]:
    """OLS fit of log(values) against ns; returns (slope, intercept, r_squared)."""
    ns = np.asarray(ns, dtype=float)
    logs = np.log(values)
    slope, intercept = np.polyfit(ns, logs, 1)
    fitted = slope * ns + intercept
    total = float(np.sum((logs - logs.mean()) ** 2))
    resid = float(np.sum((logs - fitted) ** 2))
    r2 = 1.0 if total == 0.0 else 1.0 - resid / total
    return float(slope), float(intercept), float(r2)


@dataclass(frozen=True, eq=False)
class DecayCurve:
    """Distance between two filter runs per step, with its decay fit."""

    horizon: np.ndarray
    distance: np.ndarray
    fit_start: int
    fit_stop: int
    slope: float
    intercept: float
    rate: float
    r_squared: float
    truncated_at: int | None
    degenerate: bool

    @property
    def fitted(self) -> bool:
        return not self.degenerate and math.isfinite(self.slope)


def _fit_decay(horizon, distance, fit_start, fit_stop):
    mask = (horizon >= fit_start) & (horizon <= fit_stop) & (distance > FIT_NOISE_FLOOR)
    if mask.sum() < 2:
        return math.nan, math.nan, math.nan
    slope, intercept, r2 = log_linear_fit(horizon[mask], distance[mask])
    return slope, intercept, r2


def forgetting_experiment(
    model: ModelSpec,
    theta,
    pairs: Sequence[tuple[VectorMeasure, VectorMeasure]],
    n_max: int,
    seed: int,
    lam0: GridMeasure | None = None,
    fit_window: tuple[int, int] | None = None,
) -> list[DecayCurve]:
    """Distance curves between filter runs started from paired initial conditions.

    One observation sequence is simulated and shared by every pair; the
    decay fit runs over the latter three quarters of the horizon unless
    a window is given, skipping points already at rounding level.
    Identical pairs give an all-zero curve with the fit skipped;
    underflowed distances truncate the curve.
    """
    if n_max < 20:
        raise ValueError("forgetting experiments need a horizon of at least 20")
    theta = model.validate_theta(theta)
    lam0 = GridMeasure.uniform(model.grid) if lam0 is None else lam0
    fit_start, fit_stop = fit_window if fit_window is not None else (max(1, n_max // 4), n_max)
    traj = simulate(model, theta, lam0, n_max, seed=labeled_seed(seed, "forgetting-path"))

    curves = []
    for first, second in pairs:
        state_a = filter_iterate(model, theta, traj.observations, first, keep_history=True)
        state_b = filter_iterate(model, theta, traj.observations, second, keep_history=True)
        horizon = np.arange(1, n_max + 1)
        distance = np.array(
            [measure_distance(a, b) for a, b in zip(state_a.history[1:], state_b.history[1:])]
        )
        degenerate = measure_distance(first, second) == 0.0
        truncated_at = None
        under = np.nonzero(distance < DISTANCE_FLOOR)[0]
        if not degenerate and under.size:
            truncated_at = int(horizon[under[0]])
            horizon = horizon[: under[0]]
            distance = distance[: under[0]]
        if degenerate:
            slope = intercept = r2 = math.nan
        else:
            slope, intercept, r2 = _fit_decay(horizon, distance, fit_start, fit_stop)
        curves.append(
            DecayCurve(
                horizon=horizon,
                distance=distance,
                fit_start=fit_start,
                fit_stop=fit_stop,
                slope=slope,
                intercept=intercept,
                rate=math.exp(slope) if math.isfinite(slope) else math.nan,
                r_squared=r2,
                truncated_at=truncated_at,
                degenerate=degenerate,
            )
        )
    return curves


@dataclass(frozen=True, eq=False)
class PhiSpec:
    """A test functional of (state, observation, filter measure).

    phi_bound and growth_exponent describe its polynomial envelope in
    the filter measure: |phi| <= phi_bound * norm^growth_exponent, with
    the matching Lipschitz bound in the measure argument.
    """

    name: str
    fn: Callable[[float, float, VectorMeasure], float]
    phi_bound: float
    growth_exponent: float

    def __call__(self, x: float, y: float, measure: VectorMeasure) -> float:
        return float(self.fn(x, y, measure))


def posterior_mean_phi(model: ModelSpec) -> PhiSpec:
    """Mean of the slot-0 measure; bounded by the box radius, flat in the norm."""
    radius = float(np.max(np.abs(model.grid.bounds)))
    return PhiSpec(
        name="posterior-mean",
        fn=lambda x, y, m: float(m.component(m.index_set.zero).mean()[0]),
        phi_bound=radius,
        growth_exponent=0.0,
    )


def component_tv_phi(alpha) -> PhiSpec:
    """Total variation of one derivative slot; linear growth in the norm."""
    alpha = MultiIndex(alpha)
    return PhiSpec(
        name=f"component-tv-{'_'.join(map(str, alpha))}",
        fn=lambda x, y, m: m.component(alpha).tv_norm(),
        phi_bound=1.0,
        growth_exponent=1.0,
    )


def bounded_lipschitz_phi(model: ModelSpec) -> PhiSpec:
    """A bounded statistic of the full augmented state, Lipschitz in the measure."""
    radius = max(1.0, float(np.max(np.abs(model.grid.bounds))))
    return PhiSpec(
        name="bounded-lipschitz",
        fn=lambda x, y, m: math.tanh(x + y + float(m.component(m.index_set.zero).mean()[0])),
        phi_bound=radius,
        growth_exponent=0.0,
    )


def state_projection_phi() -> PhiSpec:
    """The state coordinate itself; ignores the filter measure entirely."""
    return PhiSpec(
        name="state-projection",
        fn=lambda x, y, m: x,
        phi_bound=math.inf,
        growth_exponent=0.0,
    )


PHI_BUILTINS = {
    "posterior-mean": lambda model: posterior_mean_phi(model),
    "bounded-lipschitz": lambda model: bounded_lipschitz_phi(model),
    "state-projection": lambda model: state_projection_phi(),
}


@dataclass(frozen=True, eq=False)
class ErgodicityProbe:
    """Monte-Carlo estimates of the iterated-kernel averages per start point."""

    chain: str
    phi_name: str
    record_ns: np.ndarray
    estimates: np.ndarray  # (starts, times)
    stderr: np.ndarray
    spreads: np.ndarray  # (times,) across-start spread
    spread_slope: float
    spread_r_squared: float
    replicas: int

    def spread_at(self, n: int) -> float:
        idx = int(np.nonzero(self.record_ns == n)[0][0])
        return float(self.spreads[idx])


def ergodicity_experiment(
    model: ModelSpec,
    theta,
    phi: PhiSpec,
    initial_conditions: Sequence[tuple[float, float, VectorMeasure]],
    record_ns: Sequence[int],
    replicas: int,
    seed: int,
    chain: str = "aligned",
) -> ErgodicityProbe:
    """Estimate the iterated-kernel averages of phi from several start points.

    The augmented chain carries (state, observation, filter measure).
    The aligned variant updates the filter with the freshly drawn
    observation; the shifted variant updates it with the observation
    already in the state, so the filter lags one step.  The across-start
    spread of the estimates per horizon is fitted to a geometric decay.

    Replica streams are shared across start points (common random
    numbers), so the spread measures contraction instead of independent
    Monte-Carlo noise; each estimate is still unbiased.
    """
    if replicas < 2:
        raise ValueError("at least two replicas are required")
    if chain not in ("aligned", "shifted"):
        raise ValueError("chain must be 'aligned' or 'shifted'")
    theta = model.validate_theta(theta)
    record_ns = np.asarray(sorted(set(int(n) for n in record_ns)))
    if record_ns.size == 0 or record_ns[0] < 0:
        raise ValueError("record_ns must be non-negative")
    n_max = int(record_ns[-1])
    index_set = initial_conditions[0][2].index_set
    cache = KernelCache(model, theta, index_set)

    samples = np.empty((len(initial_conditions), record_ns.size, replicas))
    for z_idx, (x0, y0, measure0) in enumerate(initial_conditions):
        for r in range(replicas):
            rng = labeled_rng(seed, "ergodicity", r)
            x, y, measure = float(x0), float(y0), measure0
            t_idx = 0
            for n in range(n_max + 1):
                if t_idx < record_ns.size and n == record_ns[t_idx]:
                    samples[z_idx, t_idx, r] = phi(x, y, measure)
                    t_idx += 1
                if n == n_max:
                    break
                x_new = model.transition_sample(theta, x, rng)
                y_new = model.observation_sample(theta, x_new, rng)
                update_with = y_new if chain == "aligned" else y
                measure = filter_step(model, theta, update_with, measure, cache=cache)
                x, y = x_new, y_new

    estimates = samples.mean(axis=2)
    stderr = samples.std(axis=2, ddof=1) / math.sqrt(replicas)
    spreads = estimates.max(axis=0) - estimates.min(axis=0)
    positive = spreads > 0.0
    if positive.sum() >= 2:
        slope, _, r2 = log_linear_fit(record_ns[positive], spreads[positive])
    else:
        slope, r2 = math.nan, math.nan
    return ErgodicityProbe(
        chain=chain,
        phi_name=phi.name,
        record_ns=record_ns,
        estimates=estimates,
        stderr=stderr,
        spreads=spreads,
        spread_slope=slope,
        spread_r_squared=r2,
        replicas=replicas,
    )


@dataclass(frozen=True, eq=False)
class SweepCell:
    """Worst-case identity discrepancy for one (theta, index) pair."""

    theta_index: int
    alpha: MultiIndex
    max_abs_error: float
    scaled_error: float


@dataclass(frozen=True, eq=False)
class IdentityReport:
    """Derivative-identity sweep: filter jet slots versus finite differences."""

    cells: tuple[SweepCell, ...]
    worst_scaled: float
    worst_abs: float
    rel_tol: float
    abs_floor: float

    @property
    def passed(self) -> bool:
        return self.worst_scaled <= self.rel_tol


def derivative_identity_sweep(
    model: ModelSpec,
    thetas: Sequence,
    horizon: int,
    seed: int,
    lam0: GridMeasure | None = None,
    scheme: FDScheme = FDScheme(),
    max_degree: int | None = None,
    rel_tol: float = 1e-4,
    abs_floor: float = 1e-6,
    data_theta=None,
) -> IdentityReport:
    """Compare every jet slot against finite differences of the plain filter.

    For each parameter point, the filter runs once to produce all slot
    cell masses; the zero-slot cell-mass vector is then differenced in
    the parameters, and the per-cell discrepancy is scaled by
    max(abs_floor / rel_tol, |finite difference|) so the report's worst
    scaled error compares directly against rel_tol.
    """
    lam0 = GridMeasure.uniform(model.grid) if lam0 is None else lam0
    thetas = [model.validate_theta(t) for t in thetas]
    if data_theta is None:
        box = np.asarray(model.parameter_box, dtype=float)
        data_theta = box.mean(axis=1)
    data_theta = model.validate_theta(data_theta)
    traj = simulate(model, data_theta, lam0, horizon, seed=labeled_seed(seed, "identity-path"))
    index_set = model.index_set(model.max_order if max_degree is None else max_degree)
    weights = model.grid.weights
    floor_scale = abs_floor / rel_tol

    def zero_slot_masses(theta_point):
        state = filter_iterate(
            model, theta_point, traj.observations, embed(lam0, index_set)
        )
        return state.measure.components[0] * weights

    cells = []
    for t_idx, theta in enumerate(thetas):
        state = filter_iterate(model, theta, traj.observations, embed(lam0, index_set))
        slot_masses = state.measure.components * weights
        for k, alpha in enumerate(index_set.indices):
            if alpha.degree == 0:
                reference = slot_masses[0]
            else:
                reference = fd_derivative(
                    zero_slot_masses, alpha, theta, scheme, bounds=model.parameter_box
                )
            gap = np.abs(slot_masses[k] - reference)
            max_abs = float(gap.max())
            scaled = float((gap / np.maximum(floor_scale, np.abs(reference))).max())
            cells.append(
                SweepCell(
                    theta_index=t_idx, alpha=alpha, max_abs_error=max_abs, scaled_error=scaled
                )
            )
    worst_scaled = max(c.scaled_error for c in cells)
    worst_abs = max(c.max_abs_error for c in cells)
    return IdentityReport(
        cells=tuple(cells),
        worst_scaled=worst_scaled,
        worst_abs=worst_abs,
        rel_tol=rel_tol,
        abs_floor=abs_floor,
    )
