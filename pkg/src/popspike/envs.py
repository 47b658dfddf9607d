"""Built-in desk-scale continuous-control tasks behind a uniform interface.

Two tasks: the classic torque-limited pendulum swing-up (never terminates,
200-step horizon) and a 2-d point mass pushed to the origin (terminates at the
goal).  Environments report ``done`` only for true terminals; horizon
truncation is the training loop's job so value bootstrapping stays unbiased.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InputError


@dataclass(frozen=True)
class TaskDescriptor:
    name: str
    obs_dim: int
    act_dim: int
    action_low: tuple[float, ...]
    action_high: tuple[float, ...]
    obs_ranges: tuple[tuple[float, float], ...]  # encoding ranges per dimension
    max_episode_steps: int

    def __post_init__(self):
        for low, high in zip(self.action_low, self.action_high):
            if not (np.isfinite(low) and np.isfinite(high) and low < high):
                raise ConfigurationError("action bounds must be finite with low < high")
        for low, high in self.obs_ranges:
            if not low < high:
                raise ConfigurationError("observation ranges must have low < high")

    @property
    def action_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array(self.action_low), np.array(self.action_high)


def wrap_angle(theta: float) -> float:
    """Map an angle into (-pi, pi]."""
    wrapped = (theta + np.pi) % (2.0 * np.pi) - np.pi
    if wrapped == -np.pi:
        wrapped = np.pi
    return wrapped


def _check_action(action, act_dim: int) -> np.ndarray:
    a = np.asarray(action, dtype=np.float64).reshape(-1)
    if a.shape != (act_dim,):
        raise InputError(f"expected action of dim {act_dim}, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InputError("action contains non-finite values")
    return a


PENDULUM = TaskDescriptor(
    name="pendulum",
    obs_dim=3,
    act_dim=1,
    action_low=(-2.0,),
    action_high=(2.0,),
    obs_ranges=((-1.0, 1.0), (-1.0, 1.0), (-8.0, 8.0)),
    max_episode_steps=200,
)

POINTMASS = TaskDescriptor(
    name="pointmass",
    obs_dim=4,
    act_dim=2,
    action_low=(-1.0, -1.0),
    action_high=(1.0, 1.0),
    obs_ranges=((-2.0, 2.0),) * 4,
    max_episode_steps=200,
)


@dataclass
class PendulumEnv:
    """Torque-limited pendulum swing-up with the classic constants.

    g=10, m=1, l=1, dt=0.05, torque clipped to +-2, speed to +-8.  Reward is
    -(wrap(theta)^2 + 0.1 theta_dot^2 + 0.001 u^2) of the pre-step state, so
    it is always <= 0 and the upright rest state scores 0.  Episodes never
    terminate; the 200-step horizon is a truncation.
    """

    descriptor = PENDULUM
    gravity: float = 10.0
    mass: float = 1.0
    length: float = 1.0
    dt: float = 0.05
    max_speed: float = 8.0
    theta: float = field(default=0.0, init=False)
    theta_dot: float = field(default=0.0, init=False)
    t: int = field(default=0, init=False)

    def __init__(self, seed=None):
        self._rng = np.random.default_rng(seed)
        self.gravity, self.mass, self.length, self.dt = 10.0, 1.0, 1.0, 0.05
        self.max_speed = 8.0
        self.reset()

    def _obs(self) -> np.ndarray:
        return np.array([np.cos(self.theta), np.sin(self.theta), self.theta_dot])

    def reset(self, seed=None) -> np.ndarray:
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        self.theta = self._rng.uniform(-np.pi, np.pi)
        self.theta_dot = self._rng.uniform(-1.0, 1.0)
        self.t = 0
        return self._obs()

    def step(self, action) -> tuple[np.ndarray, float, bool]:
        a = _check_action(action, 1)
        low, high = self.descriptor.action_bounds
        u = float(np.clip(a, low, high)[0])
        cost = wrap_angle(self.theta) ** 2 + 0.1 * self.theta_dot**2 + 0.001 * u**2
        accel = (
            3.0 * self.gravity / (2.0 * self.length) * np.sin(self.theta)
            + 3.0 / (self.mass * self.length**2) * u
        )
        self.theta_dot = float(
            np.clip(self.theta_dot + accel * self.dt, -self.max_speed, self.max_speed)
        )
        self.theta = self.theta + self.theta_dot * self.dt
        self.t += 1
        return self._obs(), -cost, False


@dataclass
class PointMassEnv:
    """Force-controlled point mass driven to the origin.

    Euler integration with dt=0.05; reward -|x|^2 - 0.01 |f|^2 <= 0.  Reaching
    within 0.05 of the origin is a true terminal; otherwise the 200-step
    horizon truncates.  Resets start at rest, position uniform in [-1, 1]^2.
    """

    descriptor = POINTMASS
    dt: float = 0.05
    goal_radius: float = 0.05

    def __init__(self, seed=None):
        self._rng = np.random.default_rng(seed)
        self.dt = 0.05
        self.goal_radius = 0.05
        self.reset()

    def _obs(self) -> np.ndarray:
        return np.concatenate([self.pos, self.vel])

    def reset(self, seed=None) -> np.ndarray:
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        self.pos = self._rng.uniform(-1.0, 1.0, size=2)
        self.vel = np.zeros(2)
        self.t = 0
        return self._obs()

    def step(self, action) -> tuple[np.ndarray, float, bool]:
        a = _check_action(action, 2)
        low, high = self.descriptor.action_bounds
        f = np.clip(a, low, high)
        reward = -float(self.pos @ self.pos) - 0.01 * float(f @ f)
        self.vel = self.vel + f * self.dt
        self.pos = self.pos + self.vel * self.dt
        self.t += 1
        done = bool(np.linalg.norm(self.pos) < self.goal_radius)
        return self._obs(), reward, done


TASKS = {"pendulum": PendulumEnv, "pointmass": PointMassEnv}


def task_descriptor(name: str) -> TaskDescriptor:
    try:
        return TASKS[name].descriptor
    except KeyError:
        raise ConfigurationError(
            f"unknown task {name!r}; available: {sorted(TASKS)}"
        ) from None


def make_env(name: str, seed=None):
    return TASKS[name](seed=seed) if name in TASKS else task_descriptor(name)
