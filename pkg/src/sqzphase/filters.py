"""Phase estimators: the exponential-window linear filter and the grid Bayes filter.

The linear filter keeps two complex accumulators,
    A <- A + dt(-chi A + e^{i Phi} I),    B <- B + dt(-chi B - e^{2 i Phi}),
estimates the phase as arg(C) with C = A + chi B A*, and feeds back
Phi = arg(C)^(1-delta)-blended-with-arg(A)^delta plus a fixed offset.  The
mean field rides on the y quadrature, so arg(C) tracks Theta + pi/2; the
offset -pi/2 (calibrated once on the coherent benchmark, then frozen) makes
the estimate unbiased and parks the LO on the squeezed quadrature.

The Bayes filter carries, on a uniform phase grid, a log-weight and the
conditional Gaussian (mean 2-vector, 2x2 inverse covariance) per candidate
phase, advanced by the combined measurement/unraveling differentials; phase
diffusion becomes a circular convolution of the weights.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .theory import BeamParams, wrap_angle

__all__ = [
    "PHI_OFFSET",
    "EstimatorUndefined",
    "LinearFilterState",
    "linear_update",
    "linear_estimate",
    "heterodyne_linear_update",
    "heterodyne_linear_estimate",
    "BayesState",
    "HeterodyneBayesState",
    "bayes_update_homodyne",
    "bayes_update_heterodyne",
    "bayes_diffuse",
    "bayes_estimate",
    "diffusion_kernel",
    "write_bayes_snapshot",
]

# Feedback/estimate offset fixed by the coherent-state calibration run
# (unbiased estimate, variance ~ (1/2)sqrt(kappa/N)); see tests.
PHI_OFFSET = -math.pi / 2.0


class EstimatorUndefined(ValueError):
    """Raised when a phase estimate is requested from a vanishing resultant."""


@dataclass(frozen=True)
class LinearFilterState:
    chi: float
    delta: float = 0.0
    phi_offset: float = PHI_OFFSET
    acc_a: complex = 0j
    acc_b: complex = 0j
    phi: float = 0.0

    @property
    def acc_c(self) -> complex:
        return self.acc_a + self.chi * self.acc_b * self.acc_a.conjugate()


def linear_update(state: LinearFilterState, current: float, dt: float) -> LinearFilterState:
    """Advance the accumulators by one current sample, then re-aim the LO.

    The new Phi blends arg(C) toward arg(A) along the shorter arc by the
    mixing exponent delta; with A = 0 (or C = 0) the previous Phi is held.
    """
    if dt * state.chi >= 1.0:
        raise ValueError(f"dt chi = {dt * state.chi:g} violates dt chi < 1")
    rot = cmath.exp(1j * state.phi)
    acc_a = state.acc_a + dt * (-state.chi * state.acc_a + rot * current)
    acc_b = state.acc_b + dt * (-state.chi * state.acc_b - rot * rot)
    acc_c = acc_a + state.chi * acc_b * acc_a.conjugate()
    phi = state.phi
    if acc_a != 0 and acc_c != 0:
        arg_a, arg_c = cmath.phase(acc_a), cmath.phase(acc_c)
        phi = wrap_angle(arg_c + state.delta * wrap_angle(arg_a - arg_c) + state.phi_offset)
    return replace(state, acc_a=acc_a, acc_b=acc_b, phi=phi)


def linear_estimate(state: LinearFilterState) -> float:
    """Phase estimate arg(C) plus the calibration offset, wrapped to (-pi, pi]."""
    c = state.acc_c
    if c == 0:
        raise EstimatorUndefined("C = 0: linear estimate undefined")
    return wrap_angle(cmath.phase(c) + state.phi_offset)


def heterodyne_linear_update(acc_a: complex, current: complex, chi: float, dt: float) -> complex:
    """Exponential window on the complex heterodyne current (no feedback, no B)."""
    return acc_a + dt * (-chi * acc_a + current)


def heterodyne_linear_estimate(acc_a: complex) -> float:
    """arg(A) - pi/2: the mean heterodyne current is i e^{i Theta} E/sqrt(2)."""
    if acc_a == 0:
        raise EstimatorUndefined("A = 0: heterodyne estimate undefined")
    return wrap_angle(cmath.phase(acc_a) - math.pi / 2.0)


# --- grid Bayes ---------------------------------------------------------------


def _uniform_grid(n_points: int) -> np.ndarray:
    if n_points < 8:
        raise ValueError("need at least 8 grid points")
    # uniform on (-pi, pi]
    return -math.pi + (np.arange(n_points) + 1.0) * (2.0 * math.pi / n_points)


@dataclass
class BayesState:
    """Per-candidate-phase Gaussian filter state for homodyne records.

    ``log_p`` holds max-normalized log-weights (max 0 after every update);
    :meth:`probabilities` returns the grid densities integrating to 1.
    """

    theta: np.ndarray
    log_p: np.ndarray
    xbar: np.ndarray  # (K, 2)
    gmat: np.ndarray  # (K, 3) packed symmetric [g00, g01, g11]
    pd_fixes: int = 0

    @classmethod
    def flat_prior(cls, params: BeamParams, n_points: int = 2000) -> "BayesState":
        """Flat phase prior; conditional Gaussians start at the stationary beam state."""
        theta = _uniform_grid(n_points)
        eps = params.epsilon
        gmat = np.tile([1.0 + eps, 0.0, 1.0 - eps], (n_points, 1))
        return cls(
            theta=theta,
            log_p=np.zeros(n_points),
            xbar=np.zeros((n_points, 2)),
            gmat=gmat,
        )

    @property
    def n_points(self) -> int:
        return self.theta.shape[0]

    @property
    def spacing(self) -> float:
        return 2.0 * math.pi / self.n_points

    def probabilities(self) -> np.ndarray:
        """Normalized densities on the grid: sum(p) * spacing = 1."""
        p = np.exp(self.log_p - self.log_p.max())
        return p / (p.sum() * self.spacing)

    def normalize(self) -> None:
        self.log_p -= self.log_p.max()

    def covariances(self) -> np.ndarray:
        """(K, 2, 2) conditional covariance matrices (inverse of the packed G)."""
        g00, g01, g11 = self.gmat.T
        det = g00 * g11 - g01 * g01
        out = np.empty((self.n_points, 2, 2))
        out[:, 0, 0] = g11 / det
        out[:, 0, 1] = out[:, 1, 0] = -g01 / det
        out[:, 1, 1] = g00 / det
        return out


@dataclass
class HeterodyneBayesState:
    """Per-candidate-phase state for heterodyne records: decoupled x/y moments."""

    theta: np.ndarray
    log_p: np.ndarray
    xbar: np.ndarray
    ybar: np.ndarray
    var_x: np.ndarray
    var_y: np.ndarray

    @classmethod
    def flat_prior(cls, params: BeamParams, n_points: int = 2000) -> "HeterodyneBayesState":
        theta = _uniform_grid(n_points)
        eps = params.epsilon
        return cls(
            theta=theta,
            log_p=np.zeros(n_points),
            xbar=np.zeros(n_points),
            ybar=np.zeros(n_points),
            var_x=np.full(n_points, 1.0 / (1.0 + eps)),
            var_y=np.full(n_points, 1.0 / (1.0 - eps)),
        )

    @property
    def n_points(self) -> int:
        return self.theta.shape[0]

    @property
    def spacing(self) -> float:
        return 2.0 * math.pi / self.n_points

    def probabilities(self) -> np.ndarray:
        p = np.exp(self.log_p - self.log_p.max())
        return p / (p.sum() * self.spacing)


_NO_SAMPLES = np.empty(0, dtype=np.int64)
_NO_KERNEL = np.ones(1)


def bayes_update_homodyne(
    state: BayesState, current: float, phi: float, params: BeamParams, dt: float
) -> BayesState:
    """One measurement step of the homodyne grid filter (no phase diffusion)."""
    if params.gamma > 0 and params.gamma * (1.0 + params.epsilon) * dt / 2.0 >= 1.0:
        raise ValueError("dt too large for the cavity decay rate")
    cos_th, sin_th = np.cos(state.theta), np.sin(state.theta)
    g00, g01, g11 = (state.gmat[:, i].copy() for i in range(3))
    _, fixes, log_p, xb0, xb1, g00, g01, g11 = kernels.bayes_homodyne_replay(
        np.array([current]), np.array([phi]),
        cos_th, sin_th,
        state.log_p.copy(), state.xbar[:, 0].copy(), state.xbar[:, 1].copy(),
        g00, g01, g11,
        params.gamma, params.epsilon, params.e_amp, params.kappa, dt,
        _NO_KERNEL, 0, _NO_SAMPLES,
    )
    return BayesState(
        theta=state.theta,
        log_p=log_p,
        xbar=np.stack([xb0, xb1], axis=1),
        gmat=np.stack([g00, g01, g11], axis=1),
        pd_fixes=state.pd_fixes + int(fixes),
    )


def bayes_update_heterodyne(
    state: HeterodyneBayesState, current: complex, params: BeamParams, dt: float
) -> HeterodyneBayesState:
    """One measurement step of the heterodyne grid filter."""
    cos_th, sin_th = np.cos(state.theta), np.sin(state.theta)
    _, log_p, xb, yb, sx2, sy2 = kernels.bayes_heterodyne_replay(
        np.array([complex(current).real]), np.array([complex(current).imag]),
        cos_th, sin_th,
        state.log_p.copy(), state.xbar.copy(), state.ybar.copy(),
        state.var_x.copy(), state.var_y.copy(),
        params.gamma, params.epsilon, params.e_amp, params.kappa, dt,
        _NO_KERNEL, 0, _NO_SAMPLES,
    )
    return HeterodyneBayesState(
        theta=state.theta, log_p=log_p, xbar=xb, ybar=yb, var_x=sx2, var_y=sy2
    )


def diffusion_kernel(variance: float, spacing: float, max_half: int) -> np.ndarray:
    """Discrete wrapped-Gaussian kernel of the given variance, normalized to 1."""
    if variance < 0:
        raise ValueError("variance must be >= 0")
    if variance == 0.0:
        return np.ones(1)
    half = int(min(max_half, max(2, math.ceil(6.0 * math.sqrt(variance) / spacing))))
    offs = np.arange(-half, half + 1) * spacing
    w = np.exp(-0.5 * offs**2 / variance)
    return w / w.sum()


def bayes_diffuse(state, kappa: float, dt: float):
    """Spread the phase weights by the accumulated diffusion variance kappa*dt.

    Works for both filter states; means and covariances are untouched.  May be
    called every m steps with the m-step variance instead of per step.
    """
    if kappa < 0 or dt < 0:
        raise ValueError("kappa and dt must be >= 0")
    var = kappa * dt
    if var == 0.0:
        return state
    kern = diffusion_kernel(var, state.spacing, (state.n_points - 1) // 2)
    log_p = kernels._diffuse_weights(state.log_p.copy(), kern, kern.shape[0] // 2)
    return replace(state, log_p=log_p)


def bayes_estimate(state) -> float:
    """arg of the weight resultant sum_k P_k e^{i theta_k}."""
    p = state.probabilities()
    z = complex(np.sum(p * np.cos(state.theta)), np.sum(p * np.sin(state.theta)))
    if abs(z) * state.spacing < 1e-9:
        raise EstimatorUndefined("vanishing posterior resultant")
    return wrap_angle(cmath.phase(z))


def write_bayes_snapshot(state: BayesState, path: str) -> None:
    """Debug/figure export: `theta,logP,xbar0,xbar1,G00,G01,G11`."""
    with open(path, "w") as fh:
        fh.write("theta,logP,xbar0,xbar1,G00,G01,G11\n")
        for k in range(state.n_points):
            fh.write(
                f"{state.theta[k]!r},{state.log_p[k]!r},"
                f"{state.xbar[k, 0]!r},{state.xbar[k, 1]!r},"
                f"{state.gmat[k, 0]!r},{state.gmat[k, 1]!r},{state.gmat[k, 2]!r}\n"
            )
