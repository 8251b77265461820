"""
Fisher information and Cramér-Rao bounds on user locations.

Near-field users are parametrized by ``(R, theta, phi)``, far-field users by
``(theta, phi)``. Only the direct path depends on the user location, so the
channel derivatives are those of the direct path, scaled elementwise by the
RIS-BS channel. Path gains are treated as known.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ff_steering
from .geometry import Region, RisConfig, SphericalPoint, classify_region, element_distances

__all__ = [
    "SINGULAR_CONDITION",
    "SingularFimError",
    "Fim",
    "CrbWeights",
    "UserEstimate",
    "noise_free_signal",
    "nf_direct_derivatives",
    "ff_direct_derivatives",
    "fim",
    "crb_from_fim",
    "weighted_crb_objective",
]

SINGULAR_CONDITION = 1e12


class SingularFimError(np.linalg.LinAlgError):
    """The FIM is singular or too ill-conditioned for a meaningful bound."""


@dataclass(frozen=True)
class Fim:
    matrix: np.ndarray
    region: Region


@dataclass(frozen=True)
class CrbWeights:
    """Weights of the range/polar/azimuth bounds of near-field users (w1-w3)
    and the polar/azimuth bounds of far-field users (w4, w5)."""

    w1: float = 1.0
    w2: float = 1.0
    w3: float = 1.0
    w4: float = 1.0
    w5: float = 1.0

    def __post_init__(self):
        if min(self.w1, self.w2, self.w3, self.w4, self.w5) < 0:
            raise ValueError("CRB weights must be non-negative")

    @property
    def near(self) -> np.ndarray:
        return np.array([self.w1, self.w2, self.w3])

    @property
    def far(self) -> np.ndarray:
        return np.array([self.w4, self.w5])

    def for_region(self, region: Region) -> np.ndarray:
        return self.near if region is Region.NEAR_FIELD else self.far


def noise_free_signal(beta, h, s) -> complex:
    return complex(np.asarray(beta) @ np.asarray(h) * s)


def nf_direct_derivatives(p: SphericalPoint, alpha, cfg: RisConfig) -> np.ndarray:
    """Derivatives of ``alpha * b(R, theta, phi)`` w.r.t. ``(R, theta, phi)``.

    Returns
    -------
    ndarray, shape (3, N)
    """
    r, t, f = p.range, p.polar, p.azimuth
    d = element_distances(p, cfg)
    if np.any(d == 0):
        raise ValueError("user location coincides with a RIS element")
    yn = cfg.element_coords[:, 0]
    zn = cfg.element_coords[:, 1]
    dd = np.stack(
        [
            (r - yn * np.sin(t) * np.sin(f) - zn * np.cos(t)) / d,
            r * (-yn * np.cos(t) * np.sin(f) + zn * np.sin(t)) / d,
            r * (-yn * np.sin(t) * np.cos(f)) / d,
        ]
    )
    k = cfg.wavenumber
    return alpha * (-1j * k) * np.exp(-1j * k * d) * dd


def ff_direct_derivatives(polar, azimuth, h_direct, cfg: RisConfig) -> np.ndarray:
    """Derivatives of a plane-wave direct path w.r.t. ``(theta, phi)``.

    Returns
    -------
    ndarray, shape (2, N)
    """
    yn = cfg.element_coords[:, 0]
    zn = cfg.element_coords[:, 1]
    st, ct = np.sin(polar), np.cos(polar)
    sp, cp = np.sin(azimuth), np.cos(azimuth)
    dpath = np.stack([-yn * ct * sp + zn * st, -yn * st * cp])
    return np.asarray(h_direct) * (-1j * cfg.wavenumber) * dpath


def fim(B, derivatives, s, noise_power) -> Fim:
    """Fisher information of the location parameters.

    ``J_ij = (2/sigma^2) sum_m Re{conj(dmu_m/dp_i) dmu_m/dp_j}`` with
    ``dmu_m/dp_i = beta_m^T dh/dp_i s``.

    Parameters
    ----------
    B : ndarray, shape (m, N)
        Phase vectors of all cycles entering the bound.
    derivatives : ndarray, shape (P, N)
        Derivatives of the cascaded channel, one row per parameter.
    """
    if not noise_power > 0:
        raise ValueError("noise power must be positive")
    derivatives = np.atleast_2d(np.asarray(derivatives))
    A = np.atleast_2d(B) @ derivatives.T * s
    J = (2.0 / noise_power) * (A.conj().T @ A).real
    J = (J + J.T) / 2
    region = Region.NEAR_FIELD if J.shape[0] == 3 else Region.FAR_FIELD
    return Fim(J, region)


def crb_from_fim(J) -> np.ndarray:
    """Diagonal of the inverse FIM, in parameter order.

    Raises
    ------
    SingularFimError
        If ``J`` is not positive definite or its condition number exceeds
        ``SINGULAR_CONDITION``.
    """
    J = J.matrix if isinstance(J, Fim) else np.asarray(J, dtype=float)
    eig = np.linalg.eigvalsh(J)
    if eig[0] <= 0 or eig[-1] > SINGULAR_CONDITION * eig[0]:
        raise SingularFimError(f"FIM eigenvalues {eig} give no usable bound")
    return np.diag(np.linalg.inv(J)).copy()


@dataclass
class UserEstimate:
    """What the bound needs about one user: estimated location, region,
    direct-path gain and the (known) RIS-BS channel and symbol."""

    region: Region
    polar: float
    azimuth: float
    range: float | None
    gain: complex
    ris_bs_channel: np.ndarray
    symbol: complex = 1.0

    @classmethod
    def from_point(cls, p: SphericalPoint, gain, h_a, s=1.0, cfg: RisConfig | None = None, region=None):
        if region is None:
            if cfg is None:
                raise ValueError("need the RIS config to classify the region")
            region = classify_region(p, cfg)
        return cls(region, p.polar, p.azimuth, p.range, gain, np.asarray(h_a), s)

    @classmethod
    def from_atom(cls, dictionary, index: int, gain, h_a, s=1.0):
        r, t, f = dictionary.locations[index]
        if dictionary.is_near(index):
            return cls(Region.NEAR_FIELD, t, f, r, gain, np.asarray(h_a), s)
        return cls(Region.FAR_FIELD, t, f, None, gain, np.asarray(h_a), s)

    @property
    def n_params(self) -> int:
        return 3 if self.region is Region.NEAR_FIELD else 2

    def channel_derivatives(self, cfg: RisConfig) -> np.ndarray:
        """Derivatives of the cascaded channel, shape (P, N)."""
        if self.region is Region.NEAR_FIELD:
            d = nf_direct_derivatives(SphericalPoint(self.range, self.polar, self.azimuth), self.gain, cfg)
        else:
            h = self.gain * ff_steering(self.polar, self.azimuth, cfg)
            d = ff_direct_derivatives(self.polar, self.azimuth, h, cfg)
        return d * self.ris_bs_channel


def weighted_crb_objective(users, B, weights: CrbWeights, noise_power, cfg: RisConfig) -> float:
    """Sum over users of ``tr(J^-1 W)`` with the region's weight matrix.

    ``B`` holds every phase vector entering the bound, the candidate for the
    next cycle included, shape ``(c + 1, N)``.
    """
    total = 0.0
    for u in users:
        w = weights.for_region(u.region)
        if not np.any(w):
            continue
        J = fim(B, u.channel_derivatives(cfg), u.symbol, noise_power)
        total += float(np.dot(w, crb_from_fim(J)))
    return total
