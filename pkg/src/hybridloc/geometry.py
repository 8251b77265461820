"""
RIS panel layout, coordinate conventions and near/far-field classification.

Coordinates
-----------
The RIS lies on the Y-Z plane with its center at the origin and illuminates
the half-space ``x > 0``. A location is given by ``(R, theta, phi)``::

    x = R sin(theta) cos(phi)
    y = R sin(theta) sin(phi)
    z = R cos(theta)

with ``theta`` in ``(0, pi)`` and ``phi`` in ``(-pi/2, pi/2)``. The azimuth
window is centered on the panel normal so that every angle pair maps to a
single point in front of the panel; the steering vectors only depend on
``sin(theta) sin(phi)`` and ``cos(theta)``.

Element ordering
----------------
Elements are stored row-major: index ``n = r * cols + c`` sits at
``y = (r - (rows - 1) / 2) * spacing`` and ``z = (c - (cols - 1) / 2) * spacing``.
Every array in the package whose axis runs over RIS elements uses this order.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "POLAR_RANGE",
    "AZIMUTH_RANGE",
    "NF_PHASE_THRESHOLD",
    "Region",
    "SphericalPoint",
    "RisConfig",
    "ris_element_positions",
    "spherical_to_cartesian",
    "distance_to_element",
    "element_distances",
    "max_phase_error",
    "classify_region",
    "nf_boundary_range",
]

POLAR_RANGE = (0.0, np.pi)
AZIMUTH_RANGE = (-np.pi / 2, np.pi / 2)

# Max plane-wave phase error above which a point is near field.
NF_PHASE_THRESHOLD = np.pi / 8


class Region(enum.Enum):
    NEAR_FIELD = "near"
    FAR_FIELD = "far"


@dataclass(frozen=True)
class SphericalPoint:
    """Location in front of the RIS.

    Parameters
    ----------
    range : float
        Distance from the RIS center in meters.
    polar : float
        Polar angle from the +z axis, radians in ``(0, pi)``.
    azimuth : float
        Azimuth from the panel normal (+x) towards +y, radians in
        ``(-pi/2, pi/2)``.
    """

    range: float
    polar: float
    azimuth: float

    def __post_init__(self):
        if not self.range > 0:
            raise ValueError(f"range must be positive, got {self.range}")
        if not POLAR_RANGE[0] < self.polar < POLAR_RANGE[1]:
            raise ValueError(f"polar angle {self.polar} outside (0, pi)")
        if not AZIMUTH_RANGE[0] < self.azimuth < AZIMUTH_RANGE[1]:
            raise ValueError(f"azimuth {self.azimuth} outside (-pi/2, pi/2)")

    def as_array(self) -> np.ndarray:
        return np.array([self.range, self.polar, self.azimuth])


@dataclass(frozen=True)
class RisConfig:
    """Uniform planar RIS on the Y-Z plane.

    Parameters
    ----------
    rows, cols : int
        Number of elements along y and along z.
    spacing : float
        Element pitch in meters.
    wavelength : float
        Carrier wavelength in meters.
    """

    rows: int = 10
    cols: int = 10
    spacing: float = 0.03
    wavelength: float = 0.06

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("RIS needs at least one row and one column")
        if not self.spacing > 0:
            raise ValueError("element spacing must be positive")
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")

    @classmethod
    def from_frequency(cls, rows=10, cols=10, frequency=5e9, spacing=None):
        """Panel for a carrier frequency in Hz; spacing defaults to half a wavelength."""
        wavelength = 299792458.0 / frequency
        if spacing is None:
            spacing = wavelength / 2
        return cls(rows, cols, spacing, wavelength)

    @property
    def n_elements(self) -> int:
        return self.rows * self.cols

    @property
    def wavenumber(self) -> float:
        return 2 * np.pi / self.wavelength

    @cached_property
    def element_coords(self) -> np.ndarray:
        """Array of shape (N, 2) holding ``(y_n, z_n)`` in row-major order."""
        y = (np.arange(self.rows) - (self.rows - 1) / 2) * self.spacing
        z = (np.arange(self.cols) - (self.cols - 1) / 2) * self.spacing
        yy, zz = np.meshgrid(y, z, indexing="ij")
        coords = np.stack([yy.ravel(), zz.ravel()], axis=1)
        coords.setflags(write=False)
        return coords


def ris_element_positions(cfg: RisConfig) -> list[tuple[float, float]]:
    """Element coordinates ``(y_n, z_n)`` as a list, row-major."""
    return [(float(y), float(z)) for y, z in cfg.element_coords]


def _as_rtp(p):
    if isinstance(p, SphericalPoint):
        return p.range, p.polar, p.azimuth
    p = np.asarray(p, dtype=float)
    return p[..., 0], p[..., 1], p[..., 2]


def spherical_to_cartesian(p) -> np.ndarray:
    """Cartesian ``(x, y, z)`` of a point.

    Accepts a :class:`SphericalPoint` or an array whose last axis holds
    ``(R, theta, phi)``.
    """
    r, theta, phi = _as_rtp(p)
    st = np.sin(theta)
    return np.stack([r * st * np.cos(phi), r * st * np.sin(phi), r * np.cos(theta)], axis=-1)


def element_distances(p, cfg: RisConfig) -> np.ndarray:
    """Distances from point(s) to every RIS element, shape ``(..., N)``."""
    xyz = spherical_to_cartesian(p)
    yn = cfg.element_coords[:, 0]
    zn = cfg.element_coords[:, 1]
    x = xyz[..., 0, None]
    y = xyz[..., 1, None]
    z = xyz[..., 2, None]
    return np.sqrt(x**2 + (y - yn) ** 2 + (z - zn) ** 2)


def distance_to_element(p: SphericalPoint, n: int, cfg: RisConfig) -> float:
    if not 0 <= n < cfg.n_elements:
        raise IndexError(f"element index {n} out of range for N={cfg.n_elements}")
    x, y, z = spherical_to_cartesian(p)
    yn, zn = cfg.element_coords[n]
    return float(np.sqrt(x**2 + (y - yn) ** 2 + (z - zn) ** 2))


def max_phase_error(p, cfg: RisConfig):
    """Largest spherical-vs-plane-wave phase difference over the panel.

    The signed maximum of ``k (d_n - (R - y_n sin(theta) sin(phi) - z_n cos(theta)))``.
    Vectorized over leading axes of an ``(..., 3)`` array.
    """
    r, theta, phi = _as_rtp(p)
    r = np.asarray(r, dtype=float)
    d = element_distances(p, cfg)
    yn = cfg.element_coords[:, 0]
    zn = cfg.element_coords[:, 1]
    u = np.sin(theta) * np.sin(phi)
    v = np.cos(theta)
    plane = r[..., None] - yn * np.asarray(u)[..., None] - zn * np.asarray(v)[..., None]
    err = cfg.wavenumber * np.max(d - plane, axis=-1)
    return float(err) if np.ndim(err) == 0 else err


def classify_region(p, cfg: RisConfig) -> Region:
    # Ties at exactly pi/8 go to the far field.
    if max_phase_error(p, cfg) > NF_PHASE_THRESHOLD:
        return Region.NEAR_FIELD
    return Region.FAR_FIELD


def nf_boundary_range(polar: float, azimuth: float, cfg: RisConfig) -> float:
    """Range along a direction where the phase error drops to pi/8.

    Beyond the panel aperture the phase error decreases monotonically in R,
    so the root is unique there. Returns 0 when the panel has no near-field
    region in this direction (e.g. a single element).
    """
    aperture = float(np.max(np.hypot(cfg.element_coords[:, 0], cfg.element_coords[:, 1])))

    def excess(r):
        return max_phase_error(np.array([r, polar, azimuth]), cfg) - NF_PHASE_THRESHOLD

    lo = max(aperture, 1e-3 * cfg.wavelength)
    if excess(lo) <= 0:
        return 0.0
    hi = 2 * lo
    while excess(hi) > 0:
        hi *= 2
    return float(brentq(excess, lo, hi, xtol=1e-9, rtol=1e-12))
