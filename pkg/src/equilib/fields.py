"""Uniform square grids on a truncation box and scalar fields on them."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Grid2D:
    """Uniform grid on the box [-R, R]^2.

    ``n`` nodes per side (odd, so the origin is a node); node (i, j) sits
    at (-R + i*h, -R + j*h) with spacing h = 2R/(n-1).  Axis 0 of a field
    array runs along x, axis 1 along y.
    """

    box_radius: float
    n: int

    def __post_init__(self):
        if self.n < 33:
            raise ValueError("grid needs at least 33 nodes per side")
        if self.n % 2 == 0:
            raise ValueError("node count must be odd so the origin is a node")
        if self.box_radius < 2.0:
            raise ValueError("box radius must be at least 2")

    @property
    def h(self) -> float:
        return 2.0 * self.box_radius / (self.n - 1)

    @property
    def xs(self) -> np.ndarray:
        # built as signed integer multiples of h so the coordinate array
        # is mirror-symmetric to the last bit (linspace is not)
        return (np.arange(self.n) - (self.n - 1) // 2) * self.h

    def meshgrid(self):
        return np.meshgrid(self.xs, self.xs, indexing="ij")

    def radius_sq(self) -> np.ndarray:
        X, Y = self.meshgrid()
        return X * X + Y * Y


@dataclass
class ScalarField:
    grid: Grid2D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n, self.grid.n):
            raise ValueError("field shape does not match grid")

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())

    def sample(self, x, y):
        """Bilinear interpolation at points (x, y) inside the box."""
        g = self.grid
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        fx = (x + g.box_radius) / g.h
        fy = (y + g.box_radius) / g.h
        i = np.clip(np.floor(fx).astype(int), 0, g.n - 2)
        j = np.clip(np.floor(fy).astype(int), 0, g.n - 2)
        tx = fx - i
        ty = fy - j
        v = self.values
        return ((1 - tx) * (1 - ty) * v[i, j]
                + tx * (1 - ty) * v[i + 1, j]
                + (1 - tx) * ty * v[i, j + 1]
                + tx * ty * v[i + 1, j + 1])

    def neighbor_mean(self) -> np.ndarray:
        """Mean of the four neighbors at interior nodes, shape (n-2, n-2)."""
        v = self.values
        return 0.25 * (v[2:, 1:-1] + v[:-2, 1:-1] + v[1:-1, 2:] + v[1:-1, :-2])

    def lap_scaled(self) -> np.ndarray:
        """(h^2/4) * (-discrete Laplacian) at interior nodes."""
        return self.values[1:-1, 1:-1] - self.neighbor_mean()

    def neg_laplacian(self) -> np.ndarray:
        """Five-point -Laplacian at interior nodes, shape (n-2, n-2)."""
        return 4.0 * self.lap_scaled() / self.grid.h ** 2

    def gradient_interior(self):
        """Centered-difference gradient at interior nodes."""
        v = self.values
        h = self.grid.h
        gx = (v[2:, 1:-1] - v[:-2, 1:-1]) / (2 * h)
        gy = (v[1:-1, 2:] - v[1:-1, :-2]) / (2 * h)
        return gx, gy
