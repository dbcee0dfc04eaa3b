"""Rectangular field rasters over an observation window."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# channel kinds, also used as the one-byte tag in the binary grid format
KIND_RE_INCIDENT = "re_psi0"
KIND_ABS_TOTAL = "abs_psi"
KIND_RE_SCATTERED = "re_psi_s"
KIND_ABS_SCATTERED = "abs_psi_s"
KIND_SYNTHETIC = "synthetic_abs"
CHANNEL_KINDS = (
    KIND_RE_INCIDENT,
    KIND_ABS_TOTAL,
    KIND_RE_SCATTERED,
    KIND_ABS_SCATTERED,
    KIND_SYNTHETIC,
)


def cell_centres(extent, shape):
    """Cell-centred sample points for a uniform (W, H) raster.

    Returns an (H*W, 2) array ordered row-major: y varies slowest, x fastest.
    """
    x_min, x_max, y_min, y_max = extent
    w, h = int(shape[0]), int(shape[1])
    if w < 2 or h < 2:
        raise ValueError("grid resolution must be at least 2x2")
    xs = x_min + (np.arange(w) + 0.5) * (x_max - x_min) / w
    ys = y_min + (np.arange(h) + 0.5) * (y_max - y_min) / h
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


@dataclass
class FieldGrid:
    """Raster of real field samples, values[i, j] at row y_i, column x_j."""

    values: np.ndarray
    extent: tuple = field(default=(-1.0, 1.0, -1.0, 1.0))
    kind: str = KIND_ABS_TOTAL

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 2:
            raise ValueError("grid values must be 2-D")
        x_min, x_max, y_min, y_max = self.extent
        if not (x_max > x_min and y_max > y_min):
            raise ValueError("grid extent is empty")

    @property
    def resolution(self):
        """(W, H) pixel counts."""
        h, w = self.values.shape
        return (w, h)

    def points(self):
        return cell_centres(self.extent, self.resolution)

    def same_layout(self, other: "FieldGrid") -> bool:
        return self.values.shape == other.values.shape and self.extent == other.extent
