"""Fixed-step integrators and the built-in test systems.

Deterministic runs use classical 4th-order Runge-Kutta; stochastic runs
(additive Gaussian noise) use Euler-Maruyama driven by a seeded PCG64
generator, so every trajectory is a pure function of its inputs and seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "DivergenceError",
    "VectorField",
    "SdeSpec",
    "Trajectory",
    "rk4_integrate",
    "euler_maruyama",
    "hopf_field",
    "lorenz_field",
    "trajectory_to_csv",
    "trajectory_from_csv",
]

# One-sided relative slack used when turning a time span into a step count,
# so that (t1 - t0) / dt landing a hair above an integer does not add a step.
_STEP_FUZZ = 1e-9

FieldFn = Callable[[np.ndarray, float, tuple], np.ndarray]


class DivergenceError(RuntimeError):
    """An integration step produced a non-finite state."""

    def __init__(self, step: int, t: float):
        super().__init__(f"non-finite state at step {step} (t={t:g})")
        self.step = step
        self.t = t


@dataclass(frozen=True)
class VectorField:
    """Right-hand side of a (possibly time-dependent) ODE.

    ``fn(state, t, params)`` must return a length-``dim`` array for any
    finite input.  ``params`` holds the numeric constants the field was
    built with; factories close over them so the field is self-contained.
    """

    dim: int
    fn: FieldFn
    params: tuple = ()

    def eval(self, state: np.ndarray, t: float) -> np.ndarray:
        return self.fn(state, t, self.params)


@dataclass(frozen=True)
class SdeSpec:
    """Drift field plus per-coordinate additive noise intensities."""

    drift: VectorField
    noise_intensity: np.ndarray
    params: tuple = ()

    def __post_init__(self):
        sigma = np.asarray(self.noise_intensity, dtype=float)
        if sigma.shape != (self.drift.dim,):
            raise ValueError(
                f"noise_intensity must have shape ({self.drift.dim},), got {sigma.shape}"
            )
        if not np.all(sigma >= 0.0):
            raise ValueError("noise intensities must be componentwise >= 0")
        object.__setattr__(self, "noise_intensity", sigma)


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled orbit of a fixed-step integrator.

    ``seed`` is None for deterministic runs.
    """

    times: np.ndarray
    states: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        states = np.asarray(self.states, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise ValueError("a trajectory needs at least 2 samples")
        if states.shape[0] != times.size or states.ndim != 2:
            raise ValueError("states must be (N, dim) matching times")
        steps = np.diff(times)
        dt = steps[0]
        if dt <= 0 or np.any(np.abs(steps - dt) > 1e-12 * max(abs(dt), 1.0)):
            raise ValueError("times must increase with a uniform step")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def __len__(self) -> int:
        return self.times.size


def _n_steps(t0: float, t1: float, dt: float) -> int:
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t1 <= t0:
        raise ValueError("t1 must exceed t0")
    return max(1, math.ceil((t1 - t0) / dt - _STEP_FUZZ))


def _check_finite(x: np.ndarray, step: int, t: float) -> None:
    if not np.all(np.isfinite(x)):
        raise DivergenceError(step, t)


def rk4_integrate(
    field: VectorField, x0, t0: float, t1: float, dt: float
) -> Trajectory:
    """Integrate ``field`` with the classical 4th-order Runge-Kutta scheme.

    The step is fixed; the final time is the first grid point >= t1 - dt.
    Raises DivergenceError (with the offending step index) if the state
    leaves the finite floats.
    """
    x = np.array(x0, dtype=float)
    if x.shape != (field.dim,):
        raise ValueError(f"x0 must have shape ({field.dim},), got {x.shape}")
    n = _n_steps(t0, t1, dt)
    times = t0 + dt * np.arange(n + 1)
    states = np.empty((n + 1, field.dim))
    states[0] = x
    _check_finite(x, 0, t0)
    half = 0.5 * dt
    with np.errstate(over="ignore", invalid="ignore"):  # divergence is detected below
        for i in range(n):
            t = times[i]
            k1 = field.eval(x, t)
            k2 = field.eval(x + half * k1, t + half)
            k3 = field.eval(x + half * k2, t + half)
            k4 = field.eval(x + dt * k3, t + dt)
            x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            _check_finite(x, i + 1, times[i + 1])
            states[i + 1] = x
    return Trajectory(times=times, states=states, seed=None)


def euler_maruyama(
    spec: SdeSpec, x0, t0: float, t1: float, dt: float, seed: int
) -> Trajectory:
    """Integrate an additive-noise SDE: x_{i+1} = x_i + f dt + sigma sqrt(dt) xi.

    The Gaussian increments come from numpy's PCG64 stream seeded with
    ``seed`` (one standard normal per coordinate per step), so identical
    inputs give bitwise-identical trajectories.  With zero noise the
    scheme reduces to the explicit Euler method.
    """
    field = spec.drift
    x = np.array(x0, dtype=float)
    if x.shape != (field.dim,):
        raise ValueError(f"x0 must have shape ({field.dim},), got {x.shape}")
    n = _n_steps(t0, t1, dt)
    rng = np.random.Generator(np.random.PCG64(seed))
    noise = rng.standard_normal((n, field.dim))
    amp = spec.noise_intensity * math.sqrt(dt)
    times = t0 + dt * np.arange(n + 1)
    states = np.empty((n + 1, field.dim))
    states[0] = x
    _check_finite(x, 0, t0)
    with np.errstate(over="ignore", invalid="ignore"):  # divergence is detected below
        for i in range(n):
            x = x + dt * field.eval(x, times[i]) + amp * noise[i]
            _check_finite(x, i + 1, times[i + 1])
            states[i + 1] = x
    return Trajectory(times=times, states=states, seed=seed)


def hopf_field(lambda0: float, epsilon: float = 0.0) -> VectorField:
    """Planar normal-form oscillator with a linearly drifting parameter.

    dx/dt = lam(t) x - y - x y^2,  dy/dt = x + lam(t) y - y^3,
    with lam(t) = lambda0 + epsilon t.  The origin loses stability as
    lam crosses 0 and a limit cycle is born.
    """

    def fn(state: np.ndarray, t: float, params: tuple) -> np.ndarray:
        lam0, eps = params
        lam = lam0 + eps * t
        x, y = state
        return np.array([lam * x - y - x * y * y, x + lam * y - y ** 3])

    return VectorField(dim=2, fn=fn, params=(lambda0, epsilon))


def lorenz_field(
    sigma: float = 10.0, rho: float = 28.0, beta: float = 8.0 / 3.0
) -> VectorField:
    """The Lorenz system; sigma=10, beta=8/3 are the classic values."""

    def fn(state: np.ndarray, t: float, params: tuple) -> np.ndarray:
        sig, rho_, beta_ = params
        x, y, z = state
        return np.array([sig * (y - x), x * (rho_ - z) - y, x * y - beta_ * z])

    return VectorField(dim=3, fn=fn, params=(sigma, rho, beta))


def trajectory_to_csv(trajectory: Trajectory, path) -> None:
    """Write ``t,x0,x1,...`` rows with 17 significant digits."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"x{i}" for i in range(trajectory.dim)])
        for t, row in zip(trajectory.times, trajectory.states):
            writer.writerow([format(t, ".17g")] + [format(v, ".17g") for v in row])


def trajectory_from_csv(path, seed: int | None = None) -> Trajectory:
    """Load a trajectory written by :func:`trajectory_to_csv`."""
    import csv

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0] != "t":
            raise ValueError(f"{path}: expected a 't,x0,...' header")
        rows = [[float(c) for c in row] for row in reader if row]
    data = np.asarray(rows)
    return Trajectory(times=data[:, 0], states=data[:, 1:], seed=seed)
