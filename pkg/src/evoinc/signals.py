"""Piecewise-linear time signals.

Inputs ``u``, ``v``, moving-set shifts and the declared growth function of a
bound certificate are all represented by :class:`Signal`.  Smooth inputs have
to be sampled by the caller.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class Signal:
    """Piecewise-linear vector signal given by knots ``(t_i, value_i)``.

    Outside ``[t_0, t_end]`` the signal is extended by its end values.
    A single knot describes a constant signal.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.atleast_1d(np.asarray(self.times, dtype=float))
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            # one knot: a vector value; several knots: one scalar per knot
            values = values.reshape(1, -1) if times.size == 1 else values.reshape(-1, 1)
        if values.ndim != 2 or values.shape[0] != times.shape[0]:
            raise ValueError("signal values must have one row per knot")
        if times.size == 0:
            raise ValueError("signal needs at least one knot")
        if np.any(np.diff(times) <= 0):
            raise ValueError("signal knots must be strictly increasing in t")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, value) -> "Signal":
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(np.array([0.0]), value.reshape(1, -1))

    @classmethod
    def from_knots(cls, knots) -> "Signal":
        """Build from ``[(t, value), ...]`` where value is a scalar or a list."""
        times = [float(t) for t, _ in knots]
        values = [np.atleast_1d(np.asarray(v, dtype=float)) for _, v in knots]
        return cls(np.array(times), np.vstack(values))

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def is_constant(self) -> bool:
        return self.times.size == 1 or bool(np.all(self.values == self.values[0]))

    def __call__(self, t: float) -> np.ndarray:
        if self.times.size == 1:
            return self.values[0].copy()
        return np.array([np.interp(t, self.times, self.values[:, j])
                         for j in range(self.dim)])

    def variation(self, s: float, t: float) -> float:
        """Exact ``int_s^t |v'(tau)| dtau`` for the piecewise-linear path."""
        if t < s:
            s, t = t, s
        if self.times.size == 1:
            return 0.0
        pts = np.concatenate(([s], self.times[(self.times > s) & (self.times < t)], [t]))
        vals = np.vstack([self(p) for p in pts])
        return float(np.sum(np.linalg.norm(np.diff(vals, axis=0), axis=1)))

    def integral(self, s: float, t: float) -> np.ndarray:
        """Exact integral of the signal over ``[s, t]`` (trapezoid on knots)."""
        if self.times.size == 1:
            return self.values[0] * (t - s)
        pts = np.concatenate(([s], self.times[(self.times > s) & (self.times < t)], [t]))
        vals = np.vstack([self(p) for p in pts])
        return np.trapezoid(vals, pts, axis=0)

    def knots(self) -> list:
        return [(float(t), v.tolist()) for t, v in zip(self.times, self.values)]

    def __eq__(self, other):
        if not isinstance(other, Signal):
            return NotImplemented
        return (self.times.shape == other.times.shape
                and self.values.shape == other.values.shape
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash((self.times.tobytes(), self.values.tobytes()))
