"""
Cyclic localization protocol and Monte Carlo harness.

Every cycle the users transmit once through the current RIS phases, all
users are localized from every observation collected so far, and (except in
the last cycle) the phases of the next cycle are optimized against the
weighted CRB of the current estimates.

Randomness of trial ``t`` comes from ``numpy.random.default_rng([seed, t])``,
so results do not depend on how trials are spread over workers.
"""
from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .ccm import CcmConfig, CrbObjective, optimize_phase_shifts, random_phases
from .channel import ScenarioTruth, complex_gaussian
from .crb import CrbWeights, UserEstimate
from .dictionary import AtomDictionary, AtomSignals, build_dictionary
from .geometry import (
    AZIMUTH_RANGE,
    Region,
    RisConfig,
    SphericalPoint,
    classify_region,
    nf_boundary_range,
    spherical_to_cartesian,
)
from .localizer import LocalizerConfig, localize_signals

__all__ = [
    "DictionaryConfig",
    "ProtocolConfig",
    "TrialRecord",
    "MonteCarloResult",
    "UserErrors",
    "RmseReport",
    "scenario_sampler",
    "snr_calibration",
    "run_protocol",
    "run_trial",
    "run_trials",
    "user_errors",
    "compute_rmse",
    "bootstrap_ci",
    "predicted_power",
    "power_scaling_experiment",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DictionaryConfig:
    """Grid parameters. ``model`` is ``"hybrid"``, ``"far"`` or ``"near"``."""

    model: str = "hybrid"
    r_min: float = 0.25
    r_step: float = 0.25
    n_polar: int = 10
    n_azimuth: int = 10

    def build(self, ris: RisConfig, radius: float) -> AtomDictionary:
        return build_dictionary(
            ris, self.model, self.r_min, self.r_step, self.n_polar, self.n_azimuth, radius
        )


@dataclass(frozen=True)
class ProtocolConfig:
    """Scenario and protocol settings; defaults follow the reference setup
    (10x10 RIS at 5 GHz with half-wavelength spacing, 2 users, 3 scatters,
    10 m localization radius, pi/10 angle and 0.25 m range grids, 20 cycles).
    """

    ris: RisConfig = field(default_factory=lambda: RisConfig.from_frequency(10, 10, 5e9))
    n_users: int = 2
    n_scatters: int = 3
    cycles: int = 20
    trials: int = 1000
    snr_db: float = 0.0
    radius: float = 10.0
    scatter_gain_ratio: float = 0.3
    ris_bs_variance: float = 1.0
    optimize: bool = True
    seed: int = 0
    dictionary: DictionaryConfig = DictionaryConfig()
    localizer: LocalizerConfig = LocalizerConfig()
    ccm: CcmConfig = CcmConfig()
    weights: CrbWeights = CrbWeights()

    def __post_init__(self):
        if self.cycles < 1:
            raise ValueError("need at least one cycle")
        if self.trials < 1:
            raise ValueError("need at least one trial")
        if self.n_users < 1:
            raise ValueError("need at least one user")
        if self.n_scatters < 0:
            raise ValueError("scatter count must be non-negative")
        if not self.radius > self.dictionary.r_min:
            raise ValueError("localization radius must exceed the minimum range")

    def with_(self, **changes) -> "ProtocolConfig":
        return replace(self, **changes)


def _uniform_direction(rng):
    polar = rng.uniform(0.0, np.pi)
    azimuth = rng.uniform(*AZIMUTH_RANGE)
    return polar, azimuth


def _sample_user(region: Region, cfg: ProtocolConfig, rng) -> SphericalPoint:
    r_min = cfg.dictionary.r_min
    for _ in range(10_000):
        polar, azimuth = _uniform_direction(rng)
        if not (0 < polar < np.pi and AZIMUTH_RANGE[0] < azimuth < AZIMUTH_RANGE[1]):
            continue
        boundary = min(nf_boundary_range(polar, azimuth, cfg.ris), cfg.radius)
        if region is Region.NEAR_FIELD:
            lo, hi = r_min, boundary
        else:
            lo, hi = max(boundary, r_min), cfg.radius
        if hi <= lo:
            continue
        p = SphericalPoint(rng.uniform(lo, hi), polar, azimuth)
        if classify_region(p, cfg.ris) is region:
            return p
    raise RuntimeError(f"could not place a {region.value}-field user inside the localization range")


def _sample_scatter(cfg: ProtocolConfig, rng) -> SphericalPoint:
    while True:
        r = cfg.radius * rng.uniform() ** (1 / 3)
        v = rng.standard_normal(3)
        v[0] = abs(v[0])
        v /= np.linalg.norm(v)
        polar = float(np.arccos(v[2]))
        azimuth = float(np.arctan2(v[1], v[0]))
        if r >= cfg.dictionary.r_min and 0 < polar < np.pi and abs(azimuth) < np.pi / 2:
            return SphericalPoint(r, polar, azimuth)


def scenario_sampler(cfg: ProtocolConfig, rng: np.random.Generator) -> ScenarioTruth:
    """Draw users, scatters, gains and RIS-BS channels for one trial.

    Users alternate between the near-field and far-field regions (so an
    even user count splits exactly in half); within its region a user is
    uniform in range and angles. Scatters are uniform in the half-ball of
    the localization radius. Direct gains have unit modulus and random
    phase; scatter gains are ``scatter_gain_ratio`` times weaker.
    The noise power is left at zero; see :func:`snr_calibration`.
    """
    regions = [Region.NEAR_FIELD if k % 2 == 0 else Region.FAR_FIELD for k in range(cfg.n_users)]
    users = [_sample_user(r, cfg, rng) for r in regions]
    scatters = [_sample_scatter(cfg, rng) for _ in range(cfg.n_scatters)]
    K, L, N = cfg.n_users, cfg.n_scatters, cfg.ris.n_elements
    direct = np.exp(2j * np.pi * rng.uniform(size=K))
    scat = cfg.scatter_gain_ratio * np.exp(2j * np.pi * rng.uniform(size=(K, L)))
    h_a = complex_gaussian(rng, (K, N), cfg.ris_bs_variance)
    return ScenarioTruth(users, scatters, direct, scat, h_a)


def snr_calibration(truth: ScenarioTruth, snr_db: float, cfg: RisConfig) -> float:
    """Noise power giving the target SNR for the direct path with all-ones phases.

    The received direct-path power ``|h_A^T h_direct|^2`` is averaged over users.
    """
    powers = np.array(
        [
            abs(np.sum(truth.ris_bs_channels[k] * truth.direct_channel(k, cfg))) ** 2
            for k in range(truth.n_users)
        ]
    )
    p_s = float(np.mean(powers))
    if p_s == 0:
        raise ValueError("direct paths carry no power; SNR is undefined")
    return p_s / 10 ** (snr_db / 10)


@dataclass
class TrialRecord:
    """Everything one protocol run produced.

    Per-cycle arrays have the cycle on their first axis. ``estimates`` holds
    ``(R, theta, phi)`` of the selected atoms (R is NaN for far-field atoms).
    ``nearest_grid`` is the atom closest to each true user (within the
    user's own region when the dictionary has one) and ``mismatch`` the
    distance to it: meters for near-field users, radians of direction for
    far-field users.
    """

    truth: ScenarioTruth
    noise_power: float
    phases: np.ndarray
    user_indices: np.ndarray
    coarse_indices: np.ndarray
    estimates: np.ndarray
    representative_range: np.ndarray
    near_atom: np.ndarray
    coarse_loss: np.ndarray
    loss: np.ndarray
    supports: list
    objective_initial: np.ndarray
    objective_final: np.ndarray
    fallbacks: int
    nearest_grid: np.ndarray
    mismatch: np.ndarray
    cpu_seconds: np.ndarray
    true_near: np.ndarray
    trial: int = -1

    @property
    def cycles(self) -> int:
        return self.user_indices.shape[0]

    @property
    def misjudged(self) -> np.ndarray:
        """(C, K) flags: estimate differs from the nearest grid point."""
        return self.user_indices != self.nearest_grid[None, :]

    @property
    def final_estimates(self) -> np.ndarray:
        return self.estimates[-1]


def _direction(polar, azimuth):
    return spherical_to_cartesian(np.stack([np.ones_like(polar), polar, azimuth], axis=-1))


def _nearest_grid(truth: ScenarioTruth, dictionary: AtomDictionary, ris: RisConfig):
    idx, dist = [], []
    loc = dictionary.locations
    near = np.arange(dictionary.size) < dictionary.near_count
    dirs = _direction(loc[:, 1], loc[:, 2])
    for p in truth.users:
        is_nf = classify_region(p, ris) is Region.NEAR_FIELD
        if is_nf and near.any():
            xyz = spherical_to_cartesian(loc[near])
            dd = np.linalg.norm(xyz - spherical_to_cartesian(p), axis=1)
            cand = np.flatnonzero(near)
        else:
            pool = ~near if (~near).any() else near
            u = _direction(np.array(p.polar), np.array(p.azimuth))
            dd = np.arccos(np.clip(dirs[pool] @ u, -1, 1))
            cand = np.flatnonzero(pool)
        j = int(np.argmin(dd))
        idx.append(int(cand[j]))
        dist.append(float(dd[j]))
    return np.array(idx), np.array(dist)


def run_protocol(truth: ScenarioTruth, cfg: ProtocolConfig, dictionary: AtomDictionary, rng, trial: int = -1) -> TrialRecord:
    """Play ``cfg.cycles`` cycles of transmission, localization and optimization.

    The first cycle uses random phases; later cycles use the phases optimized
    at the end of the previous cycle. If the optimizer cannot evaluate the
    CRB (singular FIM, or zero noise power where the bound vanishes) the next
    cycle falls back to random phases and the event is counted.
    """
    ris = cfg.ris
    K, N, C = truth.n_users, ris.n_elements, cfg.cycles
    channels = truth.cascaded(ris)
    signals = [AtomSignals(dictionary, truth.ris_bs_channels[k], truth.tx_symbols[k], k) for k in range(K)]

    phases = np.empty((C, N), dtype=complex)
    G = np.empty((K, C), dtype=complex)
    user_idx = np.empty((C, K), dtype=int)
    coarse_idx = np.empty((C, K), dtype=int)
    coarse_loss = np.empty(C)
    loss = np.empty(C)
    supports = []
    f_init = np.full(max(C - 1, 0), np.nan)
    f_final = np.full(max(C - 1, 0), np.nan)
    cpu = np.empty(C)
    fallbacks = 0

    beta = random_phases(N, rng)
    for c in range(C):
        t0 = time.process_time()
        phases[c] = beta
        G[:, c] = truth.observe(beta, ris, rng, channels)
        for sig in signals:
            sig.append(beta)
        res = localize_signals(G[:, : c + 1], [s.matrix for s in signals], cfg.localizer)
        user_idx[c] = res.user_indices
        coarse_idx[c] = res.coarse_indices
        coarse_loss[c] = res.coarse_loss
        loss[c] = res.loss
        supports.append(list(res.support))

        if c < C - 1:
            beta = None
            if cfg.optimize and truth.noise_power > 0:
                users = [
                    UserEstimate.from_atom(
                        dictionary, res.user_indices[k], res.user_gains[k],
                        truth.ris_bs_channels[k], truth.tx_symbols[k],
                    )
                    for k in range(K)
                ]
                objective = CrbObjective(users, phases[: c + 1], cfg.weights, truth.noise_power, ris)
                opt = optimize_phase_shifts(objective, phases[c], cfg.ccm)
                if np.isfinite(opt.initial_objective):
                    beta = opt.beta
                    f_init[c], f_final[c] = opt.initial_objective, opt.objective
                else:
                    logger.info("cycle %d: %s; using random phases", c + 1, opt.diagnostic)
            if beta is None:
                if cfg.optimize:
                    fallbacks += 1
                beta = random_phases(N, rng)
        cpu[c] = time.process_time() - t0

    est = dictionary.locations[user_idx]
    nearest, mismatch = _nearest_grid(truth, dictionary, ris)
    return TrialRecord(
        truth=truth,
        noise_power=truth.noise_power,
        phases=phases,
        user_indices=user_idx,
        coarse_indices=coarse_idx,
        estimates=est,
        representative_range=dictionary.representative_range[user_idx],
        near_atom=user_idx < dictionary.near_count,
        coarse_loss=coarse_loss,
        loss=loss,
        supports=supports,
        objective_initial=f_init,
        objective_final=f_final,
        fallbacks=fallbacks,
        nearest_grid=nearest,
        mismatch=mismatch,
        cpu_seconds=cpu,
        true_near=np.array([classify_region(p, ris) is Region.NEAR_FIELD for p in truth.users]),
        trial=trial,
    )


def run_trial(cfg: ProtocolConfig, trial: int, dictionary: AtomDictionary | None = None) -> TrialRecord:
    """Sample a scenario, calibrate the noise and run the protocol for one trial."""
    if dictionary is None:
        dictionary = cfg.dictionary.build(cfg.ris, cfg.radius)
    rng = np.random.default_rng([cfg.seed, trial])
    truth = scenario_sampler(cfg, rng)
    truth.noise_power = snr_calibration(truth, cfg.snr_db, cfg.ris)
    return run_protocol(truth, cfg, dictionary, rng, trial)


@dataclass
class MonteCarloResult:
    records: list
    failures: list  # (trial, message)
    cpu_seconds: float


_worker_state = {}


def _init_worker(cfg):
    _worker_state["cfg"] = cfg
    _worker_state["dictionary"] = cfg.dictionary.build(cfg.ris, cfg.radius)


def _run_one(trial):
    cfg = _worker_state["cfg"]
    try:
        return trial, run_trial(cfg, trial, _worker_state["dictionary"]), None
    except Exception as exc:  # noqa: BLE001 - counted against the failure budget
        return trial, None, f"{type(exc).__name__}: {exc}"


def run_trials(cfg: ProtocolConfig, trials: int | None = None, workers: int = 1, progress=None) -> MonteCarloResult:
    """Run independent trials ``0 .. trials-1`` of the protocol.

    Records come back ordered by trial index whatever ``workers`` is.
    ``progress``, if given, is called with the number of finished trials.
    """
    n = cfg.trials if trials is None else trials
    t0 = time.process_time()
    if workers <= 1:
        _init_worker(cfg)
        outcomes = []
        for t in range(n):
            outcomes.append(_run_one(t))
            if progress is not None:
                progress(t + 1)
    else:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(cfg,)) as pool:
            outcomes = []
            for i, out in enumerate(pool.map(_run_one, range(n), chunksize=max(1, n // (8 * workers)))):
                outcomes.append(out)
                if progress is not None:
                    progress(i + 1)
    records = [r for _, r, err in outcomes if err is None]
    failures = [(t, err) for t, _, err in outcomes if err is not None]
    cpu = time.process_time() - t0 + (sum(float(np.sum(r.cpu_seconds)) for r in records) if workers > 1 else 0.0)
    return MonteCarloResult(records, failures, cpu)


@dataclass
class UserErrors:
    """Per-user estimation errors pooled over trials (one entry per user)."""

    trial: np.ndarray
    near_field: np.ndarray
    d_polar: np.ndarray
    d_azimuth: np.ndarray
    d_range: np.ndarray
    d_position: np.ndarray


def user_errors(records, cycle: int | None = None) -> UserErrors:
    """Errors of every user at a given cycle (1-based; default the last).

    Range errors are defined for near-field users only (NaN otherwise); a
    near-field user estimated at a far-field atom is assigned that atom's
    representative range (the near-field boundary along its direction).
    Position errors use the estimated range for near-field atoms; for a
    far-field atom, whose range is unobservable, the true range is used so
    that only the angular error contributes.
    """
    cols = {k: [] for k in ("trial", "nf", "dt", "dp", "dr", "dx")}
    for rec in records:
        c = rec.cycles if cycle is None else cycle
        if not 1 <= c <= rec.cycles:
            raise ValueError(f"cycle {c} outside 1..{rec.cycles}")
        est = rec.estimates[c - 1]
        rep = rec.representative_range[c - 1]
        near_atom = rec.near_atom[c - 1]
        for k, p in enumerate(rec.truth.users):
            is_nf = bool(rec.true_near[k])
            r_hat = est[k, 0] if near_atom[k] else p.range
            true_xyz = spherical_to_cartesian(p)
            est_xyz = spherical_to_cartesian(np.array([r_hat, est[k, 1], est[k, 2]]))
            cols["trial"].append(rec.trial)
            cols["nf"].append(is_nf)
            cols["dt"].append(est[k, 1] - p.polar)
            cols["dp"].append(est[k, 2] - p.azimuth)
            cols["dr"].append(rep[k] - p.range if is_nf else np.nan)
            cols["dx"].append(float(np.linalg.norm(est_xyz - true_xyz)))
    return UserErrors(
        np.array(cols["trial"]),
        np.array(cols["nf"], dtype=bool),
        np.array(cols["dt"]),
        np.array(cols["dp"]),
        np.array(cols["dr"]),
        np.array(cols["dx"]),
    )


@dataclass
class RmseReport:
    """RMSEs pooled over trials.

    Angle RMSEs pool the polar and azimuth errors as separate samples, so
    they are per-axis values in radians. NaN marks an empty user class.
    """

    angle_rmse_nf: float
    angle_rmse_ff: float
    range_rmse_nf: float
    position_rmse: float
    n_trials: int
    n_nf_users: int
    n_ff_users: int


def _rms(x):
    x = np.asarray(x, dtype=float)
    return float(np.sqrt(np.mean(x**2))) if x.size else float("nan")


def compute_rmse(records, cycle: int | None = None) -> RmseReport:
    if not records:
        raise ValueError("no trial records")
    e = user_errors(records, cycle)
    nf, ff = e.near_field, ~e.near_field
    return RmseReport(
        angle_rmse_nf=_rms(np.concatenate([e.d_polar[nf], e.d_azimuth[nf]])),
        angle_rmse_ff=_rms(np.concatenate([e.d_polar[ff], e.d_azimuth[ff]])),
        range_rmse_nf=_rms(e.d_range[nf]),
        position_rmse=_rms(e.d_position),
        n_trials=len(records),
        n_nf_users=int(nf.sum()),
        n_ff_users=int(ff.sum()),
    )


def bootstrap_ci(values, statistic=np.median, n_boot: int = 2000, level: float = 0.95, rng=None):
    """Percentile bootstrap confidence interval of ``statistic(values)``."""
    values = np.asarray(values, dtype=float)
    if rng is None:
        rng = np.random.default_rng(0)
    idx = rng.integers(0, len(values), size=(n_boot, len(values)))
    stats = np.apply_along_axis(statistic, 1, values[idx])
    a = (1 - level) / 2
    return float(np.quantile(stats, a)), float(np.quantile(stats, 1 - a))


def predicted_power(n: int, rho_a: float, rho_t: float, mode: str) -> float:
    """Large-N average received power for fixed all-ones or SNR-maximizing phases."""
    if mode == "all-ones":
        return n * rho_a**2 * rho_t**2
    if mode == "max-snr":
        return n**2 * np.pi**2 * rho_a**2 * rho_t**2 / 16
    raise ValueError(f"unknown phase mode {mode!r}")


def power_scaling_experiment(n_list, rho_a, rho_t, trials, mode, rng, chunk: int = 1000) -> dict:
    """Empirical mean of ``|sum_n beta_n h_A,n h_t,n|^2`` for each panel size.

    ``mode="all-ones"`` fixes every phase to 1; ``mode="max-snr"`` sets
    ``beta_n = exp(-j arg(h_A,n h_t,n))`` so all terms add in phase.
    """
    if mode not in ("all-ones", "max-snr"):
        raise ValueError(f"unknown phase mode {mode!r}")
    out = {}
    for n in n_list:
        total, done = 0.0, 0
        while done < trials:
            m = min(chunk, trials - done)
            prod = complex_gaussian(rng, (m, n), rho_a**2) * complex_gaussian(rng, (m, n), rho_t**2)
            if mode == "all-ones":
                h = prod.sum(axis=1)
            else:
                h = np.abs(prod).sum(axis=1)
            total += float(np.sum(np.abs(h) ** 2))
            done += m
        out[int(n)] = total / trials
    return out
