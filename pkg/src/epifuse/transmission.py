"""Deterministic SEIRD dynamics with Erlang-2 latent and infectious stages.

Compartments are ordered ``S, E1, E2, I1, I2, R, D``. Deaths are not a flow of
the ODE: ``D`` is kept for reporting and filled from the infection-to-death
convolution in :mod:`epifuse.observation`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date
from typing import NamedTuple, Sequence

import numpy as np
from numba import njit

from .series import DateSeries

COMPARTMENTS = ("S", "E1", "E2", "I1", "I2", "R", "D")
SUBSTEPS_PER_DAY = 4
KNOT_DAYS = 7


class CompartmentState(NamedTuple):
    S: float
    E1: float
    E2: float
    I1: float
    I2: float
    R: float
    D: float

    @property
    def population(self) -> float:
        return float(sum(self))

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=float)

    @classmethod
    def from_array(cls, y) -> "CompartmentState":
        return cls(*(float(v) for v in y))


@dataclass(frozen=True)
class TransmissionParams:
    population: float
    initial_seed: float
    beta_knots: Sequence[float]
    latent_period: float
    infectious_period: float

    def __post_init__(self):
        knots = np.ascontiguousarray(self.beta_knots, dtype=float)
        object.__setattr__(self, "beta_knots", knots)
        if not self.population > 0:
            raise ValueError("population must be positive")
        # seed == 0 is allowed: it gives the disease-free trajectory
        if not 0 <= self.initial_seed < self.population:
            raise ValueError("initial_seed must lie in [0, population)")
        if knots.ndim != 1 or knots.size == 0:
            raise ValueError("beta_knots must be a non-empty vector")
        if np.any(knots < 0) or not np.all(np.isfinite(knots)):
            raise ValueError("beta_knots must be finite and non-negative")
        if not (self.latent_period > 0 and self.infectious_period > 0):
            raise ValueError("latent and infectious periods must be positive")

    @property
    def latent_rate(self) -> float:
        """Exit rate of each latent sub-stage."""
        return 2.0 / self.latent_period

    @property
    def infectious_rate(self) -> float:
        return 2.0 / self.infectious_period


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Compartment occupancies at day boundaries ``0..horizon``.

    ``i_new`` is indexed like ``states``: entry ``t`` is the number of new
    infections during day ``(t-1, t]`` and entry 0 is zero.
    """

    t0: date
    states: np.ndarray
    i_new: DateSeries

    @property
    def horizon(self) -> int:
        return self.states.shape[0] - 1

    def state(self, day: int) -> CompartmentState:
        return CompartmentState.from_array(self.states[day])

    def compartment(self, name: str) -> np.ndarray:
        return self.states[:, COMPARTMENTS.index(name)]


def beta_at(params: TransmissionParams, t: float) -> float:
    """Weekly piecewise-constant contact rate, held at the last knot beyond range."""
    if t < 0:
        raise ValueError("t must be non-negative")
    k = min(int(math.floor(t / KNOT_DAYS)), len(params.beta_knots) - 1)
    return float(params.beta_knots[k])


@njit(cache=True, inline="always")
def _rhs(s, e1, e2, i1, i2, beta, n, a, b):
    flow = beta * (i1 + i2) / n * s
    return (-flow, flow - a * e1, a * (e1 - e2), a * e2 - b * i1, b * (i1 - i2), b * i2)


@njit(cache=True)
def _rk4_inplace(y, beta, n, a, b, dt):
    s, e1, e2, i1, i2 = y[0], y[1], y[2], y[3], y[4]
    h = 0.5 * dt
    k1 = _rhs(s, e1, e2, i1, i2, beta, n, a, b)
    k2 = _rhs(s + h * k1[0], e1 + h * k1[1], e2 + h * k1[2], i1 + h * k1[3],
              i2 + h * k1[4], beta, n, a, b)
    k3 = _rhs(s + h * k2[0], e1 + h * k2[1], e2 + h * k2[2], i1 + h * k2[3],
              i2 + h * k2[4], beta, n, a, b)
    k4 = _rhs(s + dt * k3[0], e1 + dt * k3[1], e2 + dt * k3[2], i1 + dt * k3[3],
              i2 + dt * k3[4], beta, n, a, b)
    c = dt / 6.0
    y[0] = s + c * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
    y[1] = e1 + c * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
    y[2] = e2 + c * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
    y[3] = i1 + c * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3])
    y[4] = i2 + c * (k1[4] + 2.0 * k2[4] + 2.0 * k3[4] + k4[4])
    y[5] = y[5] + c * (k1[5] + 2.0 * k2[5] + 2.0 * k3[5] + k4[5])
    # clamp drift below zero, keeping mass by charging it to S
    deficit = 0.0
    for i in range(1, 7):
        if y[i] < 0.0:
            deficit += y[i]
            y[i] = 0.0
    y[0] += deficit
    if y[0] < 0.0:
        y[0] = 0.0


@njit(cache=True)
def _simulate(n, seed, knots, a, b, horizon, substeps):
    states = np.zeros((horizon + 1, 7))
    states[0, 0] = n - seed
    states[0, 1] = seed
    y = states[0].copy()
    dt = 1.0 / substeps
    last = knots.shape[0] - 1
    for day in range(horizon):
        k = day // 7
        if k > last:
            k = last
        beta = knots[k]
        for _ in range(substeps):
            _rk4_inplace(y, beta, n, a, b, dt)
        for i in range(7):
            states[day + 1, i] = y[i]
    return states


def derivatives(state, beta: float, params: TransmissionParams) -> np.ndarray:
    """Right-hand side of the ODE at ``state`` for contact rate ``beta``."""
    y = np.asarray(state, dtype=float)
    out = np.zeros(7)
    out[:6] = _rhs(y[0], y[1], y[2], y[3], y[4], float(beta), float(params.population),
                   params.latent_rate, params.infectious_rate)
    return out


def step_rk4(state, params: TransmissionParams, t: float, dt: float) -> CompartmentState:
    """One classical RK4 step of length ``dt`` with beta frozen at ``beta_at(t)``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    y = np.array(state, dtype=float)
    _rk4_inplace(y, beta_at(params, t), float(params.population), params.latent_rate,
                 params.infectious_rate, float(dt))
    return CompartmentState.from_array(y)


def simulate_states(params: TransmissionParams, horizon: int,
                    substeps: int = SUBSTEPS_PER_DAY) -> np.ndarray:
    """Raw ``(horizon+1, 7)`` state array; the hot path used during sampling."""
    return _simulate(float(params.population), float(params.initial_seed),
                     params.beta_knots, params.latent_rate, params.infectious_rate,
                     int(horizon), int(substeps))


def simulate(params: TransmissionParams, t0: date, horizon: int,
             substeps: int = SUBSTEPS_PER_DAY) -> Trajectory:
    if horizon < 1:
        raise ValueError("horizon must be at least one day")
    if substeps < 1:
        raise ValueError("substeps must be at least one")
    states = simulate_states(params, horizon, substeps)
    i_new = np.zeros(horizon + 1)
    i_new[1:] = np.maximum(states[:-1, 0] - states[1:, 0], 0.0)
    return Trajectory(t0, states, DateSeries(t0, i_new))


def reproduction_number(params: TransmissionParams, traj: Trajectory) -> np.ndarray:
    """Convenience R_t = beta(t) * dI * S(t) / N at each day boundary."""
    days = np.arange(traj.horizon + 1)
    k = np.minimum(days // KNOT_DAYS, len(params.beta_knots) - 1)
    s = traj.compartment("S")
    return params.beta_knots[k] * params.infectious_period * s / params.population
