"""Uniform radial grids and fields living on them."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["ConfigurationError", "RadialGrid", "RadialField", "bump_profile", "smoothstep_cutoff"]


class ConfigurationError(ValueError):
    """Invalid discretization or scheme parameters."""


@dataclass(frozen=True)
class RadialGrid:
    """Nodes r_i = i h, h = R/n, i = 0..n."""

    R: float
    n: int

    def __post_init__(self):
        if not self.R > 0:
            raise ConfigurationError("grid radius must be positive")
        if int(self.n) != self.n or self.n < 16:
            raise ConfigurationError(f"grid needs n >= 16 nodes, got {self.n}")

    @classmethod
    def with_spacing(cls, R: float, h: float) -> "RadialGrid":
        return cls(R, int(round(R / h)))

    @property
    def h(self) -> float:
        return self.R / self.n

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.h


@dataclass
class RadialField:
    """Values of a radial function on ``grid`` plus the cell weights.

    ``weights[i]`` is the Riemannian volume of the control cell of node i, so
    ``mass`` approximates the integral over the ball of radius R.
    """

    grid: RadialGrid
    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n + 1,):
            raise ValueError(f"field needs {self.grid.n + 1} values, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def mass(self) -> float:
        return float(np.dot(self.weights, self.values))

    def l1(self) -> float:
        return float(np.dot(self.weights, np.abs(self.values)))

    def inner(self, other) -> float:
        v = other.values if isinstance(other, RadialField) else np.asarray(other)
        return float(np.dot(self.weights, self.values * v))

    def at(self, r):
        return np.interp(r, self.grid.nodes, self.values)

    def with_values(self, values) -> "RadialField":
        return RadialField(self.grid, np.asarray(values, dtype=float), self.weights)


def bump_profile(r, center: float = 0.0, width: float = 1.0) -> np.ndarray:
    """Smooth compactly supported bump (1 - s^2)^3 with s = |r - center| / width, s < 1."""
    if not width > 0:
        raise ConfigurationError("bump width must be positive")
    s = np.abs(np.asarray(r, dtype=float) - center) / width
    return np.where(s < 1.0, (1.0 - np.minimum(s, 1.0) ** 2) ** 3, 0.0)


def smoothstep_cutoff(r, R: float) -> np.ndarray:
    """Quintic smoothstep zeta: 1 on [0, R/2], decreasing to 0 at R, C^2 at both junctions."""
    x = np.clip((np.asarray(r, dtype=float) - 0.5 * R) / (0.5 * R), 0.0, 1.0)
    return 1.0 - x**3 * (10.0 - 15.0 * x + 6.0 * x * x)
