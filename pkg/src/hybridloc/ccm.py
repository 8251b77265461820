"""
Descent on the complex circle manifold for the next cycle's RIS phases.

Each iteration takes the Euclidean gradient of the weighted CRB objective,
projects it onto the tangent space of ``{beta : |beta_n| = 1}``, steps along
the negated projection with Armijo backtracking and retracts the result back
onto the manifold by entrywise normalization.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .crb import SINGULAR_CONDITION, CrbWeights, SingularFimError
from .geometry import RisConfig

__all__ = [
    "CcmConfig",
    "CcmResult",
    "CrbObjective",
    "euclidean_gradient",
    "riemannian_gradient",
    "descent_direction",
    "tangent_update",
    "retract",
    "random_phases",
    "optimize_phase_shifts",
]


@dataclass(frozen=True)
class CcmConfig:
    """
    Parameters
    ----------
    tolerance : float or None
        Stop once the objective changes by at most this much between
        iterations. ``None`` means ``1e-6 * |f(beta_0)|``.
    max_iterations : int
    initial_step : float
        First trial step of every line search, expressed as the largest
        per-element displacement (radians-scale) along the search direction.
    shrink : float
        Backtracking factor.
    armijo : float
        Sufficient-decrease constant.
    min_step : float
        Line search gives up below this normalized step.
    literal_projection : bool
        Search along ``-g - Re{g* . beta} . beta`` instead of the negated
        tangent projection.
    """

    tolerance: float | None = None
    max_iterations: int = 200
    initial_step: float = 1.0
    shrink: float = 0.5
    armijo: float = 1e-4
    min_step: float = 1e-10
    literal_projection: bool = False

    def __post_init__(self):
        if self.tolerance is not None and not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink factor must lie in (0, 1)")


class CrbObjective:
    """Weighted CRB sum as a function of the next cycle's phase vector.

    The contribution of the cycles already played is folded into a constant
    FIM per user, so evaluating the objective only costs one ``(P, N)``
    product per user.

    Parameters
    ----------
    users : sequence of UserEstimate
    history : ndarray, shape (c, N)
        Phase vectors of the cycles already played (may have zero rows).
    weights : CrbWeights
    noise_power : float
    cfg : RisConfig
    """

    def __init__(self, users, history, weights: CrbWeights, noise_power, cfg: RisConfig):
        if not noise_power > 0:
            raise ValueError("noise power must be positive")
        self.noise_power = float(noise_power)
        self.n_elements = cfg.n_elements
        history = np.asarray(history, dtype=complex).reshape(-1, cfg.n_elements)
        self.terms = []
        for u in users:
            w = weights.for_region(u.region)
            if not np.any(w):
                continue
            D = u.channel_derivatives(cfg) * u.symbol
            A = history @ D.T
            J_prev = (2.0 / self.noise_power) * (A.conj().T @ A).real
            self.terms.append((D, J_prev, np.diag(w)))

    def _fims(self, beta):
        scale = 2.0 / self.noise_power
        for D, J_prev, W in self.terms:
            a = D @ beta
            J = J_prev + scale * np.outer(a.conj(), a).real
            yield D, a, J, W

    @staticmethod
    def _inverse(J):
        eig = np.linalg.eigvalsh(J)
        if eig[0] <= 0 or eig[-1] > SINGULAR_CONDITION * eig[0]:
            raise SingularFimError(f"FIM eigenvalues {eig} give no usable bound")
        return np.linalg.inv(J)

    def value(self, beta) -> float:
        total = 0.0
        for _, _, J, W in self._fims(beta):
            total += float(np.trace(self._inverse(J) @ W))
        return total

    def gradient(self, beta) -> np.ndarray:
        """Euclidean gradient ``2 df/d(beta*)``.

        With ``G = -J^-1 W J^-1`` and ``dJ_ij/dbeta_n* =
        (1/sigma^2)[conj(D_in) a_j + conj(D_jn) a_i]``, the chain rule gives
        ``df/dbeta* = (2/sigma^2) D^H G a`` per user.
        """
        grad = np.zeros(self.n_elements, dtype=complex)
        for D, a, J, W in self._fims(beta):
            Jinv = self._inverse(J)
            G = -Jinv @ W @ Jinv
            grad += D.conj().T @ (G @ a)
        return 2 * (2.0 / self.noise_power) * grad


def euclidean_gradient(beta, objective: CrbObjective) -> np.ndarray:
    return objective.gradient(np.asarray(beta))


def riemannian_gradient(egrad, beta) -> np.ndarray:
    """Projection of ``egrad`` onto the tangent space of the circle manifold at ``beta``."""
    egrad = np.asarray(egrad)
    beta = np.asarray(beta)
    return egrad - (egrad.conj() * beta).real * beta


def descent_direction(egrad, beta, literal: bool = False) -> np.ndarray:
    if literal:
        return -np.asarray(egrad) - (np.asarray(egrad).conj() * beta).real * beta
    return -riemannian_gradient(egrad, beta)


def tangent_update(beta, direction, step) -> np.ndarray:
    return np.asarray(beta) + step * np.asarray(direction)


def retract(v) -> np.ndarray:
    v = np.asarray(v)
    mag = np.abs(v)
    if np.any(mag == 0):
        raise ValueError("cannot retract a vector with a zero entry")
    return v / mag


def random_phases(n: int, rng: np.random.Generator) -> np.ndarray:
    return np.exp(1j * rng.uniform(0, 2 * np.pi, n))


@dataclass
class CcmResult:
    beta: np.ndarray
    objective: float
    initial_objective: float
    iterations: int = 0
    history: list = field(default_factory=list)
    converged: bool = False
    diagnostic: str = ""


def optimize_phase_shifts(objective: CrbObjective, beta0, cfg: CcmConfig = CcmConfig(), callback=None) -> CcmResult:
    """Minimize ``objective`` over unit-modulus phase vectors.

    Parameters
    ----------
    objective : CrbObjective
    beta0 : ndarray, shape (N,)
        Starting point; retracted onto the manifold first if any entry is
        off the unit circle by more than ``1e-12``.
    cfg : CcmConfig
    callback : callable, optional
        Called after every accepted step as
        ``callback(j, beta_old, direction, beta_new, f_new)``.

    Returns
    -------
    CcmResult
        ``beta`` is the best point seen; if the objective cannot be
        evaluated at ``beta0`` (singular FIM) it is returned unchanged with
        the reason in ``diagnostic``.
    """
    beta = np.asarray(beta0, dtype=complex)
    if np.max(np.abs(np.abs(beta) - 1)) > 1e-12:
        beta = retract(beta)
    try:
        f = objective.value(beta)
    except SingularFimError as exc:
        return CcmResult(beta, float("nan"), float("nan"), diagnostic=f"initial objective: {exc}")
    tol = cfg.tolerance if cfg.tolerance is not None else 1e-6 * abs(f)
    result = CcmResult(beta, f, f, history=[f])

    for j in range(cfg.max_iterations):
        # f >= 0 and steps only decrease it, so no step can change it by more than f.
        if f <= tol:
            result.converged = True
            break
        g = objective.gradient(beta)
        d = descent_direction(g, beta, cfg.literal_projection)
        dmax = float(np.max(np.abs(d)))
        if dmax == 0:
            result.converged = True
            break
        slope = float(np.vdot(d, g).real)
        step = cfg.initial_step / dmax
        accepted = None
        while step * dmax >= cfg.min_step:
            try:
                cand = retract(tangent_update(beta, d, step))
                fc = objective.value(cand)
            except (ValueError, SingularFimError):
                fc = np.inf
            if fc <= f + cfg.armijo * step * slope:
                accepted = cand
                break
            step *= cfg.shrink
        if accepted is None:
            result.diagnostic = "line search found no sufficient decrease"
            break
        if callback is not None:
            callback(j, beta, d, accepted, fc)
        change = abs(f - fc)
        beta, f = accepted, fc
        result.iterations = j + 1
        result.history.append(f)
        if change <= tol:
            result.converged = True
            break
    result.beta = beta
    result.objective = f
    return result
