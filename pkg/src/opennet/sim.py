"""Fixed-step RK4 integration of closed systems and invariance monitoring."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import exprlang as el
from .exprlang import Expr
from .opensys import OpenSystem
from .spaces import ShapeMismatch, SubmersionMap

__all__ = [
    "Trajectory", "Monitor", "IntegrationError", "integrate",
    "monitor_invariance", "push_trajectory", "max_deviation",
]


class IntegrationError(RuntimeError):
    pass


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (len(times), dim)
    names: tuple[str, ...]

    def __len__(self):
        return len(self.times)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", *self.names])
        for t, x in zip(self.times, self.states):
            w.writerow([repr(float(t)), *(repr(float(v)) for v in x)])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


class Monitor:
    """Constraints over state coordinates whose common zero set is the submanifold."""

    def __init__(self, constraints: Sequence[Expr | str], names: Sequence[str],
                 tol: float = 1e-6, name: str = ""):
        self.names = tuple(names)
        self.constraints = tuple(
            el.parse(c, self.names) if isinstance(c, str) else c for c in constraints
        )
        self.tol = tol
        self.name = name
        self.fn = el.compile_vector(self.constraints, self.names)


def integrate(F: OpenSystem, x0: Sequence[float], t1: float, dt: float) -> Trajectory:
    """Classical RK4 on ``[0, t1]`` with step `dt` (the last step is shortened to hit t1)."""
    if not F.is_closed:
        raise IntegrationError(
            f"{F!r} has {F.on.input_dim} free inputs; wire or fix them before integrating"
        )
    if not dt > 0:
        raise IntegrationError("dt must be positive")
    x = np.asarray(x0, dtype=float)
    if x.shape != (F.on.state_dim,):
        raise ShapeMismatch(f"initial state has {x.size} entries, system state dim is {F.on.state_dim}")
    n = int(round(t1 / dt))
    if abs(n * dt - t1) > 1e-9 * max(1.0, abs(t1)):
        n = int(np.ceil(t1 / dt))
    f = F.fn
    times = np.empty(n + 1)
    states = np.empty((n + 1, x.size))
    times[0], states[0] = 0.0, x
    t = 0.0
    for i in range(n):
        h = min(dt, t1 - t) if i == n - 1 else dt
        try:
            k1 = np.asarray(f(x))
            k2 = np.asarray(f(x + (h / 2) * k1))
            k3 = np.asarray(f(x + (h / 2) * k2))
            k4 = np.asarray(f(x + h * k3))
        except el.EvalError as exc:
            raise IntegrationError(f"evaluation failed at t={t:g}: {exc}") from exc
        x = x + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        t = (i + 1) * dt if i < n - 1 else t1
        if not np.all(np.isfinite(x)):
            raise IntegrationError(f"state became non-finite at t={t:g}")
        times[i + 1], states[i + 1] = t, x
    return Trajectory(times, states, F.on.state_coords)


def monitor_invariance(traj: Trajectory, m: Monitor) -> float:
    """Largest ``|constraint|`` along the trajectory."""
    if tuple(traj.names) != m.names:
        raise ShapeMismatch(f"monitor {m.name or '?'} is over {list(m.names)}, trajectory over {list(traj.names)}")
    worst = 0.0
    for x in traj.states:
        vals = m.fn(x)
        if vals:
            worst = max(worst, max(abs(v) for v in vals))
    return worst


def push_trajectory(f: SubmersionMap, traj: Trajectory) -> Trajectory:
    if f.source.state_dim != traj.states.shape[1]:
        raise ShapeMismatch(f"{f!r} expects {f.source.state_dim} states, trajectory has {traj.states.shape[1]}")
    out = np.array([f.st_fn(x) for x in traj.states], dtype=float).reshape(len(traj), f.target.state_dim)
    return Trajectory(traj.times.copy(), out, f.target.state_coords)


def max_deviation(a: Trajectory, b: Trajectory) -> float:
    if a.states.shape != b.states.shape or not np.array_equal(a.times, b.times):
        raise ShapeMismatch("trajectories are sampled differently")
    return float(np.max(np.abs(a.states - b.states), initial=0.0))
