"""Tensor-product grid field in factorized coordinates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericsError


@dataclass
class GridField:
    """Positive scalar field sampled on a tensor-product grid.

    ``axes[k]`` holds the (uniformly spaced, increasing) node positions along
    dimension k; ``values`` has shape ``tuple(len(ax) for ax in axes)``.
    """

    axes: tuple[np.ndarray, ...]
    values: np.ndarray
    tau: float = 0.0

    def __post_init__(self):
        self.axes = tuple(np.asarray(ax, dtype=float) for ax in self.axes)
        self.values = np.asarray(self.values, dtype=float)
        shape = tuple(ax.size for ax in self.axes)
        if self.values.shape != shape:
            raise NumericsError(f"values shape {self.values.shape} != grid shape {shape}")
        for k, ax in enumerate(self.axes):
            if ax.size < 2:
                raise NumericsError(f"axis {k} needs at least 2 nodes")
            steps = np.diff(ax)
            if np.any(steps <= 0):
                raise NumericsError(f"axis {k} must be strictly increasing")
            if np.max(steps) - np.min(steps) > 1e-9 * np.mean(steps):
                raise NumericsError(f"axis {k} must be uniformly spaced")

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def spacings(self) -> tuple[float, ...]:
        return tuple(float(ax[1] - ax[0]) for ax in self.axes)

    def validate_positive(self, where: str = "") -> None:
        if not np.all(np.isfinite(self.values)):
            raise NumericsError(f"field contains non-finite values {where}".strip())
        if np.any(self.values <= 0.0):
            raise NumericsError(f"field lost strict positivity {where}".strip())

    def with_values(self, values: np.ndarray, tau: float | None = None) -> "GridField":
        return GridField(self.axes, values, self.tau if tau is None else tau)

    def node_points(self) -> np.ndarray:
        """All grid nodes as an array of shape grid_shape + (ndim,)."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(mesh, axis=-1)
