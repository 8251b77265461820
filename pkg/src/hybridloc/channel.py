"""
Steering vectors, user-RIS multipath channels and received-signal synthesis.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Region, RisConfig, SphericalPoint, classify_region, element_distances

__all__ = [
    "ScenarioTruth",
    "nf_steering",
    "ff_steering",
    "steering",
    "user_ris_channel",
    "cascaded_channel",
    "received_signal",
    "complex_gaussian",
]

UNIT_MODULUS_TOL = 1e-9


def nf_steering(p, cfg: RisConfig) -> np.ndarray:
    """Spherical-wave steering vector ``exp(-j k d_n)``.

    ``p`` may be a :class:`SphericalPoint` or an ``(..., 3)`` array of
    ``(R, theta, phi)``; the result has shape ``(..., N)``.
    """
    return np.exp(-1j * cfg.wavenumber * element_distances(p, cfg))


def ff_steering(polar, azimuth, cfg: RisConfig) -> np.ndarray:
    """Plane-wave steering vector ``exp(-j k (-y_n sin(theta) sin(phi) - z_n cos(theta)))``.

    Broadcasts over array-valued angles; the element axis is last.
    """
    polar = np.asarray(polar, dtype=float)[..., None]
    azimuth = np.asarray(azimuth, dtype=float)[..., None]
    yn = cfg.element_coords[:, 0]
    zn = cfg.element_coords[:, 1]
    path = -yn * np.sin(polar) * np.sin(azimuth) - zn * np.cos(polar)
    return np.exp(-1j * cfg.wavenumber * path)


def steering(p: SphericalPoint, cfg: RisConfig) -> np.ndarray:
    """Steering vector with the model picked by the point's region."""
    if classify_region(p, cfg) is Region.NEAR_FIELD:
        return nf_steering(p, cfg)
    return ff_steering(p.polar, p.azimuth, cfg)


def user_ris_channel(user: SphericalPoint, scatters, direct_gain, scatter_gains, cfg: RisConfig):
    """Direct path plus one path per scatter, each with its own complex gain."""
    scatter_gains = list(scatter_gains)
    if len(scatter_gains) != len(scatters):
        raise ValueError(
            f"{len(scatters)} scatters but {len(scatter_gains)} scatter gains"
        )
    h = direct_gain * steering(user, cfg)
    for q, a in zip(scatters, scatter_gains):
        h = h + a * steering(q, cfg)
    return h


def cascaded_channel(h_a, h_t) -> np.ndarray:
    h_a = np.asarray(h_a)
    h_t = np.asarray(h_t)
    if h_a.shape != h_t.shape:
        raise ValueError(f"channel length mismatch: {h_a.shape} vs {h_t.shape}")
    return h_a * h_t


def complex_gaussian(rng: np.random.Generator, size, variance=1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with total variance ``variance``."""
    scale = np.sqrt(variance / 2)
    return scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def received_signal(beta, h, s, noise_power, rng: np.random.Generator | None = None):
    """One BS observation ``beta^T h s + noise``.

    Parameters
    ----------
    beta : ndarray, shape (N,)
        RIS phase vector; every entry must have unit modulus.
    h : ndarray, shape (N,)
        Cascaded channel of the user.
    s : complex
        Transmitted symbol.
    noise_power : float
        Total complex noise variance; split evenly across real and imaginary parts.
    rng : numpy.random.Generator, optional
        Only needed when ``noise_power > 0``.
    """
    beta = np.asarray(beta)
    if np.max(np.abs(np.abs(beta) - 1)) > UNIT_MODULUS_TOL:
        raise ValueError("RIS phase shifts must have unit modulus")
    y = beta @ np.asarray(h) * s
    if noise_power > 0:
        if rng is None:
            raise ValueError("a random generator is required when noise_power > 0")
        y = y + complex_gaussian(rng, (), noise_power)
    return complex(y)


@dataclass
class ScenarioTruth:
    """Ground truth of one trial.

    Attributes
    ----------
    users : list of SphericalPoint
    scatters : list of SphericalPoint
    direct_gains : ndarray, shape (K,)
        Direct-path gain of each user.
    scatter_gains : ndarray, shape (K, L)
        Gain of user k's path through scatter l.
    ris_bs_channels : ndarray, shape (K, N)
        RIS-BS channel of each user, held fixed across cycles.
    noise_power : float
        Total complex noise variance.
    tx_symbols : ndarray, shape (K,)
    """

    users: list
    scatters: list
    direct_gains: np.ndarray
    scatter_gains: np.ndarray
    ris_bs_channels: np.ndarray
    noise_power: float = 0.0
    tx_symbols: np.ndarray = field(default=None)

    def __post_init__(self):
        k = len(self.users)
        self.direct_gains = np.asarray(self.direct_gains, dtype=complex).reshape(k)
        self.scatter_gains = np.asarray(self.scatter_gains, dtype=complex).reshape(
            k, len(self.scatters)
        )
        self.ris_bs_channels = np.atleast_2d(np.asarray(self.ris_bs_channels, dtype=complex))
        if self.tx_symbols is None:
            self.tx_symbols = np.ones(k, dtype=complex)
        self.tx_symbols = np.asarray(self.tx_symbols, dtype=complex).reshape(k)

    @property
    def n_users(self) -> int:
        return len(self.users)

    def user_channel(self, k: int, cfg: RisConfig) -> np.ndarray:
        return user_ris_channel(
            self.users[k], self.scatters, self.direct_gains[k], self.scatter_gains[k], cfg
        )

    def direct_channel(self, k: int, cfg: RisConfig) -> np.ndarray:
        return self.direct_gains[k] * steering(self.users[k], cfg)

    def cascaded(self, cfg: RisConfig) -> np.ndarray:
        """Cascaded channels of all users, shape (K, N)."""
        return np.stack(
            [cascaded_channel(self.ris_bs_channels[k], self.user_channel(k, cfg)) for k in range(self.n_users)]
        )

    def observe(self, beta, cfg: RisConfig, rng=None, channels=None) -> np.ndarray:
        """One cycle of per-user observations, shape (K,)."""
        if channels is None:
            channels = self.cascaded(cfg)
        return np.array(
            [
                received_signal(beta, channels[k], self.tx_symbols[k], self.noise_power, rng)
                for k in range(self.n_users)
            ]
        )
