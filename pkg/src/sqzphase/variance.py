"""Ensemble experiments and Holevo-variance statistics.

A run integrates ``n_traj`` independent trajectories for ``130/chi`` (defaults),
discards the first ``30/chi``, samples the wrapped estimate error every
``0.1/chi``, and pools everything into the Holevo variance
``Re<e^{i d}>^{-2} - 1`` (or the modulus form).  Standard errors come from a
jackknife over trajectories, since samples within one trajectory are
correlated.  Trajectories are keyed by (master seed, index), so results are
independent of chunking and thread count.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels, sde
from .filters import PHI_OFFSET, _uniform_grid, diffusion_kernel
from .theory import BeamParams, SchemeConfig, analytic_current_covariance

__all__ = [
    "VarianceEstimate",
    "RunProtocol",
    "RunSettings",
    "holevo_variance",
    "holevo_from_trajectories",
    "run_ensemble",
    "CompareResult",
    "compare_estimators",
    "covariance_check",
    "RESULT_COLUMNS",
    "result_row",
]

RESULT_COLUMNS = (
    "scheme,detection,n_over_kappa,gamma_over_kappa,r,chi_over_kappa,delta,"
    "estimator,variance,std_error,n_traj,dt_eta,seed"
)


@dataclass(frozen=True)
class VarianceEstimate:
    """Holevo variance with jackknife standard error and sample bookkeeping."""

    value: float
    std_error: float
    n_trajectories: int
    n_samples: int
    definition: str = "real"
    n_undefined: int = 0

    def scaled(self, n_over_kappa: float) -> float:
        """sigma^2 sqrt(N/kappa), the asymptotically flat combination."""
        return self.value * math.sqrt(n_over_kappa)


@dataclass(frozen=True)
class RunProtocol:
    """Timing and ensemble-size conventions for one run, in units of 1/chi."""

    duration_over_chi: float = 130.0
    burnin_over_chi: float = 30.0
    stride_over_chi: float = 0.1
    n_traj: int = 1024
    seed: int = 0
    dt_eta: float = sde.DT_ETA_DEFAULT

    def __post_init__(self):
        if not 0 <= self.burnin_over_chi < self.duration_over_chi:
            raise ValueError("need 0 <= burn-in < duration")
        if self.n_traj < 1 or self.stride_over_chi <= 0:
            raise ValueError("need n_traj >= 1 and a positive stride")


@dataclass(frozen=True)
class RunSettings:
    """One experiment point: scheme, beam, and filter parameters (kappa = 1)."""

    scheme: SchemeConfig
    params: BeamParams
    chi: float
    delta: float = 0.0
    theta_init: float = 0.0

    def __post_init__(self):
        self.scheme.validate_point(self.params.r, self.params.gamma)
        if self.chi <= 0:
            raise ValueError("chi must be > 0")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")

    @classmethod
    def from_point(
        cls,
        scheme: SchemeConfig,
        n_over_kappa: float,
        chi: float,
        delta: float = 0.0,
        r: float = 0.0,
        gamma: float = 0.0,
    ) -> "RunSettings":
        if scheme.squeezing == "coherent":
            r, gamma = 0.0, 0.0
        params = BeamParams(n_flux=n_over_kappa, gamma=gamma, r=r, kappa=1.0)
        return cls(scheme=scheme, params=params, chi=chi, delta=delta)


def _resultant(errors: np.ndarray) -> tuple[complex, int]:
    """Sum of e^{i err} over defined (non-NaN) wrapped errors."""
    ok = np.isfinite(errors)
    e = errors[ok]
    return complex(np.exp(1j * e).sum()), int(e.size)


def _holevo_value(z_mean: complex, definition: str) -> float:
    if definition not in ("real", "modulus"):
        raise ValueError("definition must be 'real' or 'modulus'")
    mag = abs(z_mean) if definition == "modulus" else complex(z_mean).real
    if abs(mag) < 1e-6:
        return math.inf
    return float(1.0 / mag**2 - 1.0)


def holevo_variance(errors, definition: str = "real") -> VarianceEstimate:
    """Holevo variance of a flat list of phase errors (no trajectory structure).

    The real-part form is the default: it penalizes systematic offsets.  A
    resultant shorter than 1e-6 signals infinite variance rather than raising.
    """
    errors = np.asarray(errors, dtype=float)
    if errors.size == 0:
        raise ValueError("need at least one error sample")
    wrapped = kernels.wrap_array(errors)
    z, n = _resultant(wrapped)
    if n == 0:
        raise ValueError("all samples undefined")
    return VarianceEstimate(
        value=_holevo_value(z / n, definition),
        std_error=math.nan,
        n_trajectories=1,
        n_samples=n,
        definition=definition,
        n_undefined=errors.size - n,
    )


def holevo_from_trajectories(
    z_sums: np.ndarray, counts: np.ndarray, definition: str = "real", n_undefined: int = 0
) -> VarianceEstimate:
    """Pooled Holevo variance with a leave-one-trajectory-out jackknife SE."""
    keep = counts > 0
    z_sums, counts = z_sums[keep], counts[keep]
    n_traj = counts.size
    if n_traj == 0:
        raise ValueError("no trajectories with defined samples")
    z_tot, n_tot = z_sums.sum(), counts.sum()
    value = _holevo_value(z_tot / n_tot, definition)
    if n_traj < 2 or not math.isfinite(value):
        se = math.nan
    else:
        loo = (z_tot - z_sums) / (n_tot - counts)
        vals = np.array([_holevo_value(z, definition) for z in loo])
        se = math.sqrt((n_traj - 1) / n_traj * ((vals - vals.mean()) ** 2).sum())
    return VarianceEstimate(
        value=value,
        std_error=se,
        n_trajectories=int(n_traj),
        n_samples=int(n_tot),
        definition=definition,
        n_undefined=n_undefined,
    )


def _plan(settings: RunSettings, protocol: RunProtocol):
    """dt, number of steps, and sampled step indices for one run."""
    dt = sde.choose_dt(settings.params, settings.chi, protocol.dt_eta)
    n_steps = math.ceil(protocol.duration_over_chi / settings.chi / dt)
    burn = round(protocol.burnin_over_chi / settings.chi / dt)
    stride = max(1, round(protocol.stride_over_chi / settings.chi / dt))
    sample_idx = np.arange(burn, n_steps, stride, dtype=np.int64)
    if sample_idx.size == 0:
        raise ValueError("no samples inside the measurement window")
    return dt, n_steps, sample_idx


def _bayes_diffusion_plan(kappa: float, dt: float, spacing: float, n_points: int):
    """Batch phase diffusion until its variance resolves on the grid."""
    if kappa == 0.0:
        return np.ones(1), 0
    every = max(1, math.ceil((2.5 * spacing) ** 2 / (kappa * dt)))
    kern = diffusion_kernel(kappa * dt * every, spacing, (n_points - 1) // 2)
    return kern, every


def _run_chunk(settings, protocol, dt, n_steps, sample_idx, lo, hi, estimator, grid_size):
    """Simulate trajectories [lo, hi); returns per-trajectory resultants."""
    het = settings.scheme.detection == "heterodyne"
    channels = sde.HETERODYNE_CHANNELS if het else sde.HOMODYNE_CHANNELS
    n = hi - lo
    noise = np.empty((n, n_steps + 1, channels))
    for i in range(n):
        noise[i] = sde.trajectory_noise(protocol.seed, lo + i, n_steps, channels)
    theta0 = np.full(n, settings.theta_init)
    p = settings.params
    want_bayes = estimator in ("bayes", "both")
    want_linear = estimator in ("linear", "both")
    out = {}
    if het:
        err, est, i_re, i_im, theta_rec, *_ = kernels.run_heterodyne_batch(
            noise, theta0, p.gamma, p.epsilon, p.e_amp, p.kappa, dt,
            settings.chi, sample_idx, want_bayes,
        )
    else:
        err, est, i_rec, phi_rec, theta_rec, *_ = kernels.run_homodyne_batch(
            noise, theta0, theta0.copy(), p.gamma, p.epsilon, p.e_amp, p.kappa, dt,
            settings.chi, settings.delta, PHI_OFFSET, True, sample_idx, want_bayes,
        )
    if want_linear:
        z = np.empty(n, dtype=complex)
        cnt = np.empty(n, dtype=np.int64)
        for i in range(n):
            z[i], cnt[i] = _resultant(err[i])
        out["linear"] = (z, cnt, int(np.isnan(err).sum()))
        out["linear_est"] = est
    if want_bayes:
        grid = _uniform_grid(grid_size)
        cos_th, sin_th = np.cos(grid), np.sin(grid)
        spacing = 2.0 * math.pi / grid_size
        kern, every = _bayes_diffusion_plan(p.kappa, dt, spacing, grid_size)
        z = np.empty(n, dtype=complex)
        cnt = np.empty(n, dtype=np.int64)
        best = np.empty((n, sample_idx.size))
        eps = p.epsilon
        nan_count = 0
        for i in range(n):
            log_p = np.zeros(grid_size)
            if het:
                bay_est, *_ = kernels.bayes_heterodyne_replay(
                    i_re[i], i_im[i], cos_th, sin_th,
                    log_p, np.zeros(grid_size), np.zeros(grid_size),
                    np.full(grid_size, 1.0 / (1.0 + eps)), np.full(grid_size, 1.0 / (1.0 - eps)),
                    p.gamma, eps, p.e_amp, p.kappa, dt, kern, every, sample_idx,
                )
            else:
                bay_est, fixes, *_ = kernels.bayes_homodyne_replay(
                    i_rec[i], phi_rec[i], cos_th, sin_th,
                    log_p, np.zeros(grid_size), np.zeros(grid_size),
                    np.full(grid_size, 1.0 + eps), np.zeros(grid_size), np.full(grid_size, 1.0 - eps),
                    p.gamma, eps, p.e_amp, p.kappa, dt, kern, every, sample_idx,
                )
                if fixes > 0.01 * len(i_rec[i]) * grid_size:
                    raise RuntimeError(
                        "persistent loss of positive definiteness in the Bayes filter"
                    )
            errs = kernels.wrap_array(bay_est - theta_rec[i][sample_idx])
            best[i] = bay_est
            z[i], cnt[i] = _resultant(errs)
            nan_count += int(np.isnan(errs).sum())
        out["bayes"] = (z, cnt, nan_count)
        out["bayes_est"] = best
    return out


def run_ensemble(
    settings: RunSettings,
    protocol: RunProtocol,
    estimator: str = "linear",
    threads: int | None = None,
    grid_size: int = 2000,
    chunk: int = 64,
):
    """Monte Carlo ensemble; returns a VarianceEstimate (dict of them for 'both').

    Deterministic for a fixed protocol seed regardless of chunking or thread
    count; trajectories with undefined estimates contribute their defined
    samples only, with the undefined count logged on the estimate.
    """
    if estimator not in ("linear", "bayes", "both"):
        raise ValueError("estimator must be 'linear', 'bayes', or 'both'")
    dt, n_steps, sample_idx = _plan(settings, protocol)
    ranges = [
        (lo, min(lo + chunk, protocol.n_traj)) for lo in range(0, protocol.n_traj, chunk)
    ]

    def work(rng):
        return _run_chunk(
            settings, protocol, dt, n_steps, sample_idx, rng[0], rng[1], estimator, grid_size
        )

    if threads is not None and threads > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(work, ranges))
    else:
        chunks = [work(r) for r in ranges]

    results = {}
    for key in ("linear", "bayes"):
        if key not in chunks[0]:
            continue
        z = np.concatenate([c[key][0] for c in chunks])
        cnt = np.concatenate([c[key][1] for c in chunks])
        nundef = sum(c[key][2] for c in chunks)
        results[key] = holevo_from_trajectories(z, cnt, n_undefined=nundef)
    return results if estimator == "both" else results[estimator]


@dataclass(frozen=True)
class CompareResult:
    """Linear-vs-Bayes comparison on shared measurement records."""

    variance_ratio: float  # v_linear / v_bayes
    msd_over_variance: float  # mean-square estimate difference / v_bayes
    linear: VarianceEstimate
    bayes: VarianceEstimate


def compare_estimators(
    settings: RunSettings,
    protocol: RunProtocol,
    threads: int | None = None,
    grid_size: int = 2000,
    chunk: int = 32,
) -> CompareResult:
    """Run both estimators over identical records and compare their variances."""
    if settings.scheme.detection != "adaptive":
        raise ValueError("estimator comparison is defined for the adaptive scheme")
    dt, n_steps, sample_idx = _plan(settings, protocol)
    ranges = [
        (lo, min(lo + chunk, protocol.n_traj)) for lo in range(0, protocol.n_traj, chunk)
    ]

    def work(rng):
        return _run_chunk(
            settings, protocol, dt, n_steps, sample_idx, rng[0], rng[1], "both", grid_size
        )

    if threads is not None and threads > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(work, ranges))
    else:
        chunks = [work(r) for r in ranges]

    out = {}
    for key in ("linear", "bayes"):
        z = np.concatenate([c[key][0] for c in chunks])
        cnt = np.concatenate([c[key][1] for c in chunks])
        out[key] = holevo_from_trajectories(z, cnt, n_undefined=sum(c[key][2] for c in chunks))
    d_lin = np.concatenate([c["linear_est"] for c in chunks]).ravel()
    d_bay = np.concatenate([c["bayes_est"] for c in chunks]).ravel()
    ok = np.isfinite(d_lin) & np.isfinite(d_bay)
    msd = float(np.mean(kernels.wrap_array(d_lin[ok] - d_bay[ok]) ** 2))
    return CompareResult(
        variance_ratio=out["linear"].value / out["bayes"].value,
        msd_over_variance=msd / out["bayes"].value,
        linear=out["linear"],
        bayes=out["bayes"],
    )


def covariance_check(
    params: BeamParams,
    phi_minus_theta: float,
    n_steps: int = 200_000,
    dt: float | None = None,
    seed: int = 0,
    candidate_offset: float = 0.0,
) -> float:
    """Worst empirical-vs-analytic residual-current covariance, in SE units.

    Simulates a fixed-LO, fixed-phase record (kappa frozen to 0), forms
    dI = I - sE with s at the candidate angle, and compares the raw lag
    moments at lags {dt, 1/gamma, 2/gamma, 4/gamma} (plus dt at gamma = 0)
    against the analytic exponential form.  SEs come from batch means.
    """
    frozen = BeamParams(n_flux=params.n_flux, gamma=params.gamma, r=params.r, kappa=0.0)
    if dt is None:
        ref_rate = params.gamma if params.gamma > 0 else 1.0
        dt = 0.05 * 2.0 / (ref_rate * (1.0 + frozen.epsilon))
    noise = sde.trajectory_noise(seed, 0, n_steps, sde.HOMODYNE_CHANNELS)[None]
    _, _, i_rec, _, _, _, _, _ = kernels.run_homodyne_batch(
        noise, np.zeros(1), np.full(1, phi_minus_theta),
        frozen.gamma, frozen.epsilon, frozen.e_amp, 0.0, dt,
        1.0, 0.0, 0.0, False, np.empty(0, dtype=np.int64), True,
    )
    s_true = math.sin(phi_minus_theta)
    s_cand = math.sin(phi_minus_theta - candidate_offset)
    d_i = i_rec[0] - s_cand * frozen.e_amp
    if params.gamma > 0:
        lags = [dt, 1.0 / params.gamma, 2.0 / params.gamma, 4.0 / params.gamma]
    else:
        lags = [dt, 10 * dt, 100 * dt]
    worst = 0.0
    for tau in lags:
        lag = max(1, round(tau / dt))
        prod = d_i[:-lag] * d_i[lag:]
        n_blocks = 100
        blocks = np.array_split(prod, n_blocks)
        means = np.array([b.mean() for b in blocks])
        se = means.std(ddof=1) / math.sqrt(n_blocks)
        expect = analytic_current_covariance(frozen, s_true, s_cand, lag * dt).value
        worst = max(worst, abs(prod.mean() - expect) / se)
    return worst


def result_row(
    settings: RunSettings,
    protocol: RunProtocol,
    estimate: VarianceEstimate,
    estimator: str,
) -> str:
    """One line in the fixed results-CSV schema (see RESULT_COLUMNS)."""
    p = settings.params
    return (
        f"{settings.scheme.squeezing},{settings.scheme.detection},"
        f"{p.n_flux / p.kappa!r},{p.gamma / p.kappa!r},{p.r!r},"
        f"{settings.chi / p.kappa!r},{settings.delta!r},"
        f"{estimator},{estimate.value!r},{estimate.std_error!r},"
        f"{estimate.n_trajectories},{protocol.dt_eta!r},{protocol.seed}"
    )
