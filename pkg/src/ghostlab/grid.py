"""Pixel grids with a physical pitch.

All 2-D fields handled by the library (targets, projected thicknesses,
masks, reconstructions) are carried as :class:`ImageGrid` values: an
``n x m`` float64 array plus the pixel size in millimetres.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

__all__ = ["ImageGrid", "constant_grid", "pixel_centers", "diff_x_periodic"]


@dataclass(frozen=True)
class ImageGrid:
    """An n-by-m real field sampled on square pixels of size ``pitch`` (mm)."""

    data: np.ndarray
    pitch: float = 1.0

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ParameterError(f"grid data must be 2-D and non-empty, got shape {np.shape(self.data)}")
        if not np.all(np.isfinite(arr)):
            raise ParameterError("grid values must all be finite")
        if not self.pitch > 0:
            raise ParameterError(f"pitch must be positive, got {self.pitch}")
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "pitch", float(self.pitch))

    @property
    def n(self) -> int:
        """Row count."""
        return self.data.shape[0]

    @property
    def m(self) -> int:
        """Column count."""
        return self.data.shape[1]

    @property
    def nm(self) -> int:
        return self.data.size

    def with_data(self, data) -> "ImageGrid":
        """A new grid with the same pitch and different values."""
        return ImageGrid(data, self.pitch)


def constant_grid(n: int, m: int, value: float, pitch: float = 1.0) -> ImageGrid:
    return ImageGrid(np.full((n, m), float(value)), pitch)


def pixel_centers(n: int, m: int, pitch: float):
    """Physical pixel-centre coordinates, centred on the grid.

    Returns ``(x, y)`` in mm, with x running along columns and y along rows.
    """
    x = (np.arange(m) - (m - 1) / 2.0) * pitch
    y = (np.arange(n) - (n - 1) / 2.0) * pitch
    return x, y


def diff_x_periodic(values: np.ndarray, pitch: float) -> np.ndarray:
    """Central difference along x (columns) with periodic wrap, per mm.

    This single stencil is shared by the forward intensity model, the
    expected-image operator and the discrete Fourier symbol of the inverse
    filter, which is what makes the forward/inverse pair exactly consistent.
    """
    return (np.roll(values, -1, axis=1) - np.roll(values, 1, axis=1)) / (2.0 * pitch)
