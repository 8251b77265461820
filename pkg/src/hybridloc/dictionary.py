"""
Candidate-location grids and the atom channels / atom signals built on them.

Columns of the atom matrix are ordered ``[near-field atoms, far-field atoms]``.
Near-field atoms carry a range, far-field atoms are angle-only (their range
is stored as NaN).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ff_steering, nf_steering
from .geometry import (
    AZIMUTH_RANGE,
    NF_PHASE_THRESHOLD,
    Region,
    RisConfig,
    SphericalPoint,
    max_phase_error,
    nf_boundary_range,
)

__all__ = [
    "angle_lattice",
    "sample_nf_grid",
    "sample_ff_grid",
    "sample_range_grid",
    "AtomDictionary",
    "build_atom_channels",
    "build_dictionary",
    "AtomSignals",
    "build_atom_signals",
]


def angle_lattice(n_polar: int, n_azimuth: int):
    """Cell-midpoint polar and azimuth samples with spacings ``pi/n``."""
    if n_polar < 1 or n_azimuth < 1:
        raise ValueError("angle sample counts must be at least 1")
    polar = (np.arange(n_polar) + 0.5) * np.pi / n_polar
    azimuth = AZIMUTH_RANGE[0] + (np.arange(n_azimuth) + 0.5) * np.pi / n_azimuth
    return polar, azimuth


def sample_ff_grid(n_polar: int, n_azimuth: int) -> list[tuple[float, float]]:
    """Angle pairs of the far-field grid, polar-major order."""
    polar, azimuth = angle_lattice(n_polar, n_azimuth)
    return [(float(t), float(p)) for t in polar for p in azimuth]


def _range_column(r_min, r_step, r_max):
    n = int(np.floor((r_max - r_min) / r_step + 1e-9)) + 1
    return r_min + r_step * np.arange(max(n, 0))


def sample_nf_grid(cfg: RisConfig, r_min: float, r_step: float, n_polar: int, n_azimuth: int):
    """Near-field candidate locations.

    For every angle cell, ranges ``r_min, r_min + r_step, ...`` are kept while
    the point is still near field. Angle columns with no near-field range
    contribute nothing. Order: polar-major, then azimuth, then range.
    """
    if not r_min > 0 or not r_step > 0:
        raise ValueError("r_min and r_step must be positive")
    polar, azimuth = angle_lattice(n_polar, n_azimuth)
    points = []
    for t in polar:
        for p in azimuth:
            r_max = nf_boundary_range(t, p, cfg)
            if r_max <= r_min:
                continue
            ranges = _range_column(r_min, r_step, r_max)
            grid = np.column_stack([ranges, np.full_like(ranges, t), np.full_like(ranges, p)])
            keep = max_phase_error(grid, cfg) > NF_PHASE_THRESHOLD
            points.extend(SphericalPoint(float(r), float(t), float(p)) for r in ranges[keep])
    return points


def sample_range_grid(r_min: float, r_step: float, r_max: float, n_polar: int, n_azimuth: int):
    """Range-angle grid over the whole localization range, ignoring regions.

    Used for the pure near-field model, which applies the spherical model
    everywhere.
    """
    polar, azimuth = angle_lattice(n_polar, n_azimuth)
    ranges = _range_column(r_min, r_step, r_max)
    return [
        SphericalPoint(float(r), float(t), float(p)) for t in polar for p in azimuth for r in ranges
    ]


@dataclass(frozen=True)
class AtomDictionary:
    """Candidate locations and their atom channels.

    Attributes
    ----------
    locations : ndarray, shape (M, 3)
        ``(R, theta, phi)`` per atom; R is NaN for far-field atoms.
    atoms : ndarray, shape (N, M)
        Column i is the steering vector of location i.
    near_count : int
        Number of leading near-field atoms.
    representative_range : ndarray, shape (M,)
        Range used when a distance is needed for an atom: the sampled range
        for near-field atoms, the near-field boundary along the atom's
        direction for far-field atoms.
    """

    locations: np.ndarray
    atoms: np.ndarray
    near_count: int
    representative_range: np.ndarray

    @property
    def size(self) -> int:
        return self.atoms.shape[1]

    @property
    def far_count(self) -> int:
        return self.size - self.near_count

    def region(self, i: int) -> Region:
        return Region.NEAR_FIELD if i < self.near_count else Region.FAR_FIELD

    def is_near(self, i) -> np.ndarray:
        return np.asarray(i) < self.near_count

    def location(self, i: int):
        """SphericalPoint for near-field atoms, ``(theta, phi)`` for far-field ones."""
        r, t, p = self.locations[i]
        if i < self.near_count:
            return SphericalPoint(float(r), float(t), float(p))
        return (float(t), float(p))


def build_atom_channels(grid_nf, grid_ff, cfg: RisConfig) -> AtomDictionary:
    """Stack near-field and far-field steering vectors into ``F = [F_near, F_far]``."""
    grid_nf = list(grid_nf)
    grid_ff = list(grid_ff)
    if not grid_nf and not grid_ff:
        raise ValueError("both grids are empty")
    n = cfg.n_elements
    if grid_nf:
        nf_loc = np.array([[p.range, p.polar, p.azimuth] for p in grid_nf])
        f_near = nf_steering(nf_loc, cfg).T
    else:
        nf_loc = np.empty((0, 3))
        f_near = np.empty((n, 0), dtype=complex)
    if grid_ff:
        ang = np.array(grid_ff, dtype=float)
        ff_loc = np.column_stack([np.full(len(ang), np.nan), ang])
        f_far = ff_steering(ang[:, 0], ang[:, 1], cfg).T
        ff_range = np.array([nf_boundary_range(t, p, cfg) for t, p in ang])
    else:
        ff_loc = np.empty((0, 3))
        f_far = np.empty((n, 0), dtype=complex)
        ff_range = np.empty(0)
    locations = np.vstack([nf_loc, ff_loc])
    atoms = np.ascontiguousarray(np.hstack([f_near, f_far]))
    rep = np.concatenate([nf_loc[:, 0], ff_range])
    for a in (locations, atoms, rep):
        a.setflags(write=False)
    return AtomDictionary(locations, atoms, len(grid_nf), rep)


def build_dictionary(
    cfg: RisConfig,
    model: str = "hybrid",
    r_min: float = 0.25,
    r_step: float = 0.25,
    n_polar: int = 10,
    n_azimuth: int = 10,
    r_max: float = 10.0,
) -> AtomDictionary:
    """Dictionary for one of the three channel models.

    ``"hybrid"`` samples ranges only inside the near-field region and adds
    angle-only far-field atoms; ``"far"`` keeps only the far-field atoms;
    ``"near"`` samples ranges over the whole localization range with the
    spherical model.
    """
    if model == "hybrid":
        nf = sample_nf_grid(cfg, r_min, r_step, n_polar, n_azimuth)
        ff = sample_ff_grid(n_polar, n_azimuth)
    elif model == "far":
        nf, ff = [], sample_ff_grid(n_polar, n_azimuth)
    elif model == "near":
        nf, ff = sample_range_grid(r_min, r_step, r_max, n_polar, n_azimuth), []
    else:
        raise ValueError(f"unknown dictionary model {model!r}")
    return build_atom_channels(nf, ff, cfg)


def build_atom_signals(B, h_a, F, s) -> np.ndarray:
    """Atom signals ``B diag(h_a) F s``.

    Parameters
    ----------
    B : ndarray, shape (c, N)
        Phase history; row m is the RIS phase vector of cycle m.
    h_a : ndarray, shape (N,)
    F : ndarray or AtomDictionary, shape (N, M)
    s : complex
    """
    if isinstance(F, AtomDictionary):
        F = F.atoms
    B = np.atleast_2d(np.asarray(B))
    h_a = np.asarray(h_a)
    if B.shape[1] != F.shape[0] or h_a.shape != (F.shape[0],):
        raise ValueError(
            f"dimension mismatch: B {B.shape}, h_a {h_a.shape}, F {F.shape}"
        )
    return (B * h_a) @ F * s


class AtomSignals:
    """Atom signals of one user, grown by one row per cycle."""

    def __init__(self, F, h_a, s, user: int = 0):
        self._weighted = np.asarray(h_a)[:, None] * (F.atoms if isinstance(F, AtomDictionary) else F) * s
        self.user = user
        self.matrix = np.empty((0, self._weighted.shape[1]), dtype=complex)

    @property
    def cycles(self) -> int:
        return self.matrix.shape[0]

    def append(self, beta) -> np.ndarray:
        row = np.asarray(beta) @ self._weighted
        self.matrix = np.vstack([self.matrix, row])
        return row
