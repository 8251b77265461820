"""
Grid-based multi-user localization with successive interference cancellation.

Three steps:

1. coarse user estimate: per user, the atom signal with the largest
   correlation with the received signal is taken as the direct path;
2. scatter estimate: after removing the direct paths, atoms are added
   greedily to a support set shared by all users, the per-user gains being
   re-fit jointly by least squares;
3. refinement: the scatter atoms are projected out of each received signal
   and the user atom is selected again.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dictionary import AtomDictionary, build_atom_signals

__all__ = [
    "LocalizerConfig",
    "ScatterEstimate",
    "LocalizationResult",
    "coarse_user_estimate",
    "subtract_direct_path",
    "estimate_scatters",
    "refine_user",
    "localize",
    "localize_signals",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LocalizerConfig:
    """
    Parameters
    ----------
    max_scatters : int
        Upper bound on the size of the scatter support.
    energy_fraction : float
        Scatter search stops once the residual energy is below this fraction
        of the received-signal energy.
    normalize : bool
        Divide every correlation by the atom-signal norm before taking the
        argmax. Off by default: atoms are then scored by raw correlation,
        which favours atoms whose signals carry more energy.
    """

    max_scatters: int = 3
    energy_fraction: float = 0.05
    normalize: bool = False

    def __post_init__(self):
        if self.max_scatters < 0:
            raise ValueError("max_scatters must be non-negative")
        if not 0 < self.energy_fraction < 1:
            raise ValueError("energy_fraction must lie in (0, 1)")


def _correlations(Lam, g):
    return Lam.conj().T @ g


def _scores(Lam, g, normalize):
    score = np.abs(_correlations(Lam, g))
    if normalize:
        norms = np.linalg.norm(Lam, axis=0)
        score = np.divide(score, norms, out=np.zeros_like(score), where=norms > 0)
    return score


def coarse_user_estimate(g, Lam, normalize: bool = False):
    """Strongest-correlation atom and its least-squares gain.

    Returns ``(index, gain)`` with ``index = argmax_i |Lam_i^H g|`` (lowest
    index on ties; divided by ``||Lam_i||`` when ``normalize``) and
    ``gain = Lam_i^H g / Lam_i^H Lam_i``.
    """
    g = np.asarray(g)
    Lam = np.asarray(Lam)
    if Lam.ndim != 2 or Lam.shape[0] < 1 or Lam.shape[1] < 1:
        raise ValueError(f"atom signals must be a non-empty (c, M) matrix, got {Lam.shape}")
    corr = _correlations(Lam, g)
    i = int(np.argmax(_scores(Lam, g, normalize)))
    energy = np.vdot(Lam[:, i], Lam[:, i]).real
    if energy == 0:
        raise ValueError(f"atom signal {i} is identically zero")
    return i, complex(corr[i] / energy)


def subtract_direct_path(g, Lam, index, gain):
    return np.asarray(g) - gain * np.asarray(Lam)[:, index]


@dataclass
class ScatterEstimate:
    support: list
    gains: np.ndarray  # (K, |support|)
    residuals: np.ndarray  # (K, c)
    energy_trace: list = field(default_factory=list)
    rank_deficient: bool = False


def _lstsq(A, b):
    return np.linalg.lstsq(A, b, rcond=None)[0]


def estimate_scatters(residuals, atom_signals, initial_g, cfg: LocalizerConfig) -> ScatterEstimate:
    """Greedy joint scatter search over all users.

    Parameters
    ----------
    residuals : ndarray, shape (K, c)
        Signals after the direct path was removed; these are also the
        regression targets of every least-squares re-fit.
    atom_signals : sequence of K arrays of shape (c, M)
    initial_g : ndarray, shape (K, c)
        Original received signals; their energy sets the stopping level.
    """
    e_ini = np.atleast_2d(np.asarray(residuals, dtype=complex))
    Lams = np.asarray(atom_signals)
    K = e_ini.shape[0]
    threshold = cfg.energy_fraction * float(np.sum(np.abs(np.asarray(initial_g)) ** 2))

    e = e_ini.copy()
    support: list[int] = []
    gains = np.zeros((K, 0), dtype=complex)
    energy = float(np.sum(np.abs(e) ** 2))
    trace = [energy]
    rank_deficient = False
    while len(support) < cfg.max_scatters and energy >= threshold and energy > 0:
        corr = np.abs(np.einsum("kcm,kc->km", Lams.conj(), e))
        if cfg.normalize:
            norms = np.linalg.norm(Lams, axis=1)
            corr = np.divide(corr, norms, out=np.zeros_like(corr), where=norms > 0)
        score = np.sum(corr, axis=0)
        i = int(np.argmax(score))
        trial = support + [i]
        new_gains = np.empty((K, len(trial)), dtype=complex)
        new_e = np.empty_like(e)
        for k in range(K):
            A = Lams[k][:, trial]
            if np.linalg.matrix_rank(A) < len(trial):
                rank_deficient = True
                break
            new_gains[k] = _lstsq(A, e_ini[k])
            new_e[k] = e_ini[k] - A @ new_gains[k]
        if rank_deficient:
            logger.debug("atom %d makes the scatter support rank deficient; stopping", i)
            break
        support, gains, e = trial, new_gains, new_e
        energy = float(np.sum(np.abs(e) ** 2))
        trace.append(energy)
    return ScatterEstimate(support, gains, e, trace, rank_deficient)


def refine_user(g, Lam, support, normalize: bool = False):
    """Re-select the user atom after projecting out the scatter atoms.

    Returns ``(index, r)`` where ``r`` is the projected signal.
    """
    g = np.asarray(g)
    Lam = np.asarray(Lam)
    if support:
        A = Lam[:, list(support)]
        r = g - A @ _lstsq(A, g)
    else:
        r = g
    return int(np.argmax(_scores(Lam, r, normalize))), r


@dataclass
class LocalizationResult:
    """Output of :func:`localize`.

    ``user_indices`` are the refined atom indices; ``coarse_indices`` the
    first-step ones. ``loss`` is the sum over users of the squared residual
    after fitting the refined user atom jointly with the scatter atoms;
    ``coarse_loss`` is the same quantity for the coarse, direct-path-only fit.
    """

    user_indices: list
    coarse_indices: list
    coarse_gains: np.ndarray
    user_gains: np.ndarray
    support: list
    scatter_gains: np.ndarray
    residual_energies: list
    coarse_loss: float
    loss: float
    rank_deficient: bool = False
    user_in_support: list = field(default_factory=list)
    user_locations: list = field(default_factory=list)


def localize_signals(G, atom_signals, cfg: LocalizerConfig, dictionary: AtomDictionary | None = None):
    """Run all three steps on precomputed atom signals.

    Parameters
    ----------
    G : ndarray, shape (K, c)
        Row k holds user k's received signals over the cycles so far.
    atom_signals : sequence of K arrays of shape (c, M)
    """
    G = np.atleast_2d(np.asarray(G, dtype=complex))
    K = G.shape[0]
    if len(atom_signals) != K:
        raise ValueError(f"{K} users but {len(atom_signals)} atom-signal matrices")

    coarse_idx, coarse_gain, residuals = [], [], []
    for k in range(K):
        i, u = coarse_user_estimate(G[k], atom_signals[k], cfg.normalize)
        coarse_idx.append(i)
        coarse_gain.append(u)
        residuals.append(subtract_direct_path(G[k], atom_signals[k], i, u))
    residuals = np.array(residuals)
    coarse_loss = float(np.sum(np.abs(residuals) ** 2))

    scat = estimate_scatters(residuals, atom_signals, G, cfg)

    user_idx, user_gain, in_support = [], [], []
    loss = 0.0
    for k in range(K):
        i, _ = refine_user(G[k], atom_signals[k], scat.support, cfg.normalize)
        if i in scat.support:
            logger.warning("user %d refined onto scatter atom %d", k, i)
        A = atom_signals[k][:, [i] + scat.support]
        coef = _lstsq(A, G[k])
        loss += float(np.sum(np.abs(G[k] - A @ coef) ** 2))
        user_idx.append(i)
        user_gain.append(coef[0])
        in_support.append(i in scat.support)

    locations = [dictionary.location(i) for i in user_idx] if dictionary is not None else []
    return LocalizationResult(
        user_indices=user_idx,
        coarse_indices=coarse_idx,
        coarse_gains=np.array(coarse_gain),
        user_gains=np.array(user_gain),
        support=list(scat.support),
        scatter_gains=scat.gains,
        residual_energies=scat.energy_trace,
        coarse_loss=coarse_loss,
        loss=loss,
        rank_deficient=scat.rank_deficient,
        user_in_support=in_support,
        user_locations=locations,
    )


def localize(G, B, dictionary: AtomDictionary, h_a, s, cfg: LocalizerConfig = LocalizerConfig()):
    """Localize all users from their received signals.

    Parameters
    ----------
    G : ndarray, shape (K, c)
    B : ndarray, shape (c, N)
        RIS phase vector of each cycle.
    dictionary : AtomDictionary
    h_a : ndarray, shape (K, N)
        RIS-BS channel of each user.
    s : ndarray, shape (K,)
        Transmitted symbols.
    """
    h_a = np.atleast_2d(h_a)
    s = np.broadcast_to(np.asarray(s, dtype=complex), (h_a.shape[0],))
    Lams = [build_atom_signals(B, h_a[k], dictionary, s[k]) for k in range(h_a.shape[0])]
    return localize_signals(G, Lams, cfg, dictionary)
