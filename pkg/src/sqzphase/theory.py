"""Closed-form theory for phase tracking of a narrowband squeezed beam.

A cavity with decay rate ``gamma`` and squeezing parameter ``r`` emits a beam
with coherent amplitude ``E`` riding on the anti-squeezed quadrature.  The
beam phase diffuses with linewidth ``kappa`` and is tracked by homodyne
detection with a feedback-steered local-oscillator phase (adaptive) or by
heterodyne detection.  Everything in this module is analytic: steady-state
conditional covariances of the per-phase Gaussian filter, the phase
information carried by the mean field and by the squeezed noise, asymptotic
variance constants, and the tolerance window for gamma.

All rates are per unit time with kappa=1 units used throughout the package;
angles are radians, reduced to (-pi, pi] by :func:`wrap_angle`.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

__all__ = [
    "wrap_angle",
    "epsilon_from_r",
    "r_from_epsilon",
    "photon_flux",
    "amplitude_from_flux",
    "BeamParams",
    "SchemeConfig",
    "ALL_SCHEMES",
    "SteadyStateG",
    "steady_state_g_matrix",
    "info_identity_check",
    "noise_info_f",
    "noise_info_g",
    "noise_info_h",
    "adaptive_info_rate",
    "heterodyne_info_rate",
    "predicted_variance",
    "GammaBounds",
    "gamma_bounds",
    "ScalingPredictions",
    "scaling_predictions",
    "squeezing_timescale",
    "CurrentCovariance",
    "analytic_current_covariance",
]


def wrap_angle(x: float) -> float:
    """Reduce an angle to (-pi, pi].  Phase is mod 2*pi throughout."""
    return math.pi - (math.pi - x) % (2.0 * math.pi)


def epsilon_from_r(r: float) -> float:
    """Cavity squeezing parameter: e^r = (1+eps)/(1-eps), so eps = (e^r-1)/(e^r+1)."""
    if r < 0:
        raise ValueError(f"squeezing r must be >= 0, got {r}")
    return math.tanh(r / 2.0)


def r_from_epsilon(eps: float) -> float:
    """Inverse of :func:`epsilon_from_r`."""
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"epsilon must lie in [0, 1), got {eps}")
    return 2.0 * math.atanh(eps)


def photon_flux(e_amp: float, gamma: float, r: float) -> float:
    """Total flux N = E^2/4 + (gamma/2) sinh^2 r (coherent + squeezing part)."""
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    if not (math.isfinite(e_amp) and math.isfinite(gamma) and math.isfinite(r)):
        raise ValueError("photon_flux arguments must be finite")
    return 0.25 * e_amp**2 + 0.5 * gamma * math.sinh(r) ** 2


def amplitude_from_flux(n_flux: float, gamma: float, r: float) -> float:
    """Coherent amplitude E with E^2 = 4(N - (gamma/2) sinh^2 r); fails if negative."""
    e2 = 4.0 * (n_flux - 0.5 * gamma * math.sinh(r) ** 2)
    if e2 < 0:
        raise ValueError(
            f"squeezing flux (gamma/2)sinh^2 r = {0.5 * gamma * math.sinh(r) ** 2:g} "
            f"exceeds total flux N = {n_flux:g}"
        )
    return math.sqrt(e2)


@dataclass(frozen=True)
class BeamParams:
    """Physical beam model: flux N, linewidth kappa, cavity decay gamma, squeezing r.

    The coherent amplitude E and eps are derived.  gamma=0 with r=0 is the pure
    coherent beam (the cavity drops out of the current entirely).
    """

    n_flux: float
    gamma: float = 0.0
    r: float = 0.0
    kappa: float = 1.0

    def __post_init__(self):
        if self.n_flux < 0 or self.gamma < 0 or self.r < 0 or self.kappa < 0:
            raise ValueError("BeamParams fields must be >= 0")
        if self.r > 0 and self.gamma == 0:
            raise ValueError("squeezing (r > 0) requires a cavity (gamma > 0)")
        amplitude_from_flux(self.n_flux, self.gamma, self.r)  # validates E^2 >= 0

    @property
    def epsilon(self) -> float:
        return epsilon_from_r(self.r)

    @property
    def e_amp(self) -> float:
        return amplitude_from_flux(self.n_flux, self.gamma, self.r)

    @property
    def e_scaled(self) -> float:
        """E' with E = sqrt(gamma) E'; only meaningful for gamma > 0."""
        if self.gamma == 0:
            raise ValueError("E' undefined at gamma = 0")
        return self.e_amp / math.sqrt(self.gamma)

    @classmethod
    def coherent(cls, n_flux: float, kappa: float = 1.0) -> "BeamParams":
        return cls(n_flux=n_flux, gamma=0.0, r=0.0, kappa=kappa)

    @classmethod
    def from_amplitude(cls, e_amp: float, gamma: float, r: float, kappa: float = 1.0) -> "BeamParams":
        return cls(n_flux=photon_flux(e_amp, gamma, r), gamma=gamma, r=r, kappa=kappa)


_DETECTIONS = ("adaptive", "heterodyne")
_SQUEEZINGS = ("arbitrary", "limited", "coherent")


@dataclass(frozen=True)
class SchemeConfig:
    """One of the six measurement schemes: detection x squeezing mode.

    ``limited`` enforces e^{2r} <= cap (default cap 2, the typical laboratory
    maximum); ``coherent`` forces r = 0 and drops the cavity.
    """

    detection: str
    squeezing: str
    cap: float = 2.0

    def __post_init__(self):
        if self.detection not in _DETECTIONS:
            raise ValueError(f"detection must be one of {_DETECTIONS}")
        if self.squeezing not in _SQUEEZINGS:
            raise ValueError(f"squeezing must be one of {_SQUEEZINGS}")
        if self.cap <= 1.0:
            raise ValueError("squeezing cap e^{2r} must exceed 1")

    @property
    def r_max(self) -> float:
        if self.squeezing == "coherent":
            return 0.0
        if self.squeezing == "limited":
            return 0.5 * math.log(self.cap)
        return math.inf

    @property
    def free_parameters(self) -> tuple[str, ...]:
        """Parameters optimized for this scheme; chi always, delta only adaptive."""
        names = ["chi"]
        if self.detection == "adaptive":
            names.append("delta")
        if self.squeezing != "coherent":
            names += ["r", "gamma"]
        return tuple(names)

    def validate_point(self, r: float, gamma: float) -> None:
        if self.squeezing == "coherent" and r != 0.0:
            raise ValueError("coherent scheme forces r = 0")
        if r > self.r_max + 1e-12:
            raise ValueError(f"r = {r:g} exceeds scheme limit r_max = {self.r_max:g}")
        if gamma < 0:
            raise ValueError("gamma must be >= 0")

    @property
    def label(self) -> str:
        return f"{self.detection}-{self.squeezing}"


ALL_SCHEMES = tuple(
    SchemeConfig(det, sq) for sq in _SQUEEZINGS for det in _DETECTIONS
)


# --- steady-state filter covariance -----------------------------------------
#
# For fixed feedback and candidate phases the per-phase Gaussian filter's
# inverse covariance equilibrates.  In the frame rotated onto the measured
# quadrature, with X = (1-eps)/2 + eps sin^2(w), Y = eps sin(w) cos(w) and
# w the LO-to-candidate angle, the elements a, b, d obey
#     a^2 = 2(aX + bY),   b^2 + 2(Xd - Yb) = 1,   ba = Y(a + d),
# solved by a^2 = 2[X^2+Y^2 + sqrt((X^2+Y^2)^2 + Y^2)].  The filter's
# residual-weight impulse response is Re(Omega e^{gamma Lambda tau}) with
# 2 Lambda = a + i Delta, Delta^2/2 = sqrt((X^2+Y^2)^2+Y^2) - (X^2+Y^2) and
# Omega = a - 1 + i (a-2X)/Delta, whose Y -> 0 limit is a - 1.
#
# Internally Delta carries the sign of Y so that everything is analytic
# through Y = 0 (the noise-information function is invariant under joint
# conjugation of Omega and Lambda); reported values canonicalize Delta >= 0.


class _Jet:
    """Second-order Taylor coefficients (value, d/dw, d2/dw2) with complex parts."""

    __slots__ = ("f0", "f1", "f2")

    def __init__(self, f0, f1=0.0, f2=0.0):
        self.f0 = complex(f0)
        self.f1 = complex(f1)
        self.f2 = complex(f2)

    def __add__(self, other):
        if isinstance(other, _Jet):
            return _Jet(self.f0 + other.f0, self.f1 + other.f1, self.f2 + other.f2)
        return _Jet(self.f0 + other, self.f1, self.f2)

    __radd__ = __add__

    def __neg__(self):
        return _Jet(-self.f0, -self.f1, -self.f2)

    def __sub__(self, other):
        return self + (-other if isinstance(other, _Jet) else -complex(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, _Jet):
            return _Jet(
                self.f0 * other.f0,
                self.f0 * other.f1 + self.f1 * other.f0,
                self.f0 * other.f2 + 2.0 * self.f1 * other.f1 + self.f2 * other.f0,
            )
        return _Jet(self.f0 * other, self.f1 * other, self.f2 * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, _Jet):
            return self * (1.0 / complex(other))
        c0 = self.f0 / other.f0
        c1 = (self.f1 - c0 * other.f1) / other.f0
        c2 = (self.f2 - c0 * other.f2 - 2.0 * c1 * other.f1) / other.f0
        return _Jet(c0, c1, c2)

    def __rtruediv__(self, other):
        return _Jet(other) / self

    def sqrt(self):
        s0 = cmath.sqrt(self.f0)
        s1 = self.f1 / (2.0 * s0)
        return _Jet(s0, s1, (self.f2 - 2.0 * s1 * s1) / (2.0 * s0))

    def conjugate(self):
        return _Jet(self.f0.conjugate(), self.f1.conjugate(), self.f2.conjugate())


def _sqrt(x):
    return x.sqrt() if isinstance(x, _Jet) else cmath.sqrt(x)


def _steady_core(sin_w, cos_w, eps):
    """a, signed Delta, Omega, Lambda in generic (scalar or jet) arithmetic."""
    x = 0.5 * (1.0 - eps) + eps * sin_w * sin_w
    y = eps * sin_w * cos_w
    t = x * x + y * y
    w = _sqrt(t * t + y * y)
    a = _sqrt(2.0 * (t + w))
    dlt = y * _sqrt(2.0 / (w + t))
    im_om = 2.0 * y * (2.0 + 1.0 / (w + t)) * _sqrt(0.5 * (w + t)) / (a + 2.0 * x)
    omega = (a - 1.0) + 1j * im_om
    lam = 0.5 * (a + 1j * dlt)
    return x, y, a, dlt, omega, lam


@dataclass(frozen=True)
class SteadyStateG:
    """Rotated steady-state inverse covariance [[a, b], [b, d]] and filter constants."""

    a: float
    b: float
    d: float
    x_aux: float
    y_aux: float
    delta: float
    omega: complex
    lam: complex

    def equation_residuals(self) -> tuple[float, float, float]:
        """Residuals of the three simultaneous steady-state equations."""
        a, b, d, x, y = self.a, self.b, self.d, self.x_aux, self.y_aux
        return (
            a * a - 2.0 * (a * x + b * y),
            b * b + 2.0 * (x * d - y * b) - 1.0,
            b * a - y * (a + d),
        )


def steady_state_g_matrix(r: float, phi_minus_theta: float) -> SteadyStateG:
    """Steady-state filter covariance constants at squeezing r and LO angle.

    All forms are algebraically rearranged to stay stable near Y = 0 (angle a
    multiple of pi/2), where b = 0, d = 1/(2X) and Omega = a - 1 exactly.
    """
    eps = epsilon_from_r(r)
    sw, cw = math.sin(phi_minus_theta), math.cos(phi_minus_theta)
    _, _, a_c, dlt_c, omega, lam = _steady_core(sw, cw, eps)
    a, dlt = a_c.real, dlt_c.real
    x = 0.5 * (1.0 - eps) + eps * sw * sw
    y = eps * sw * cw
    p = x * a - y * y
    dd = math.sqrt(p * p + y * y * (2.0 * x * a + 1.0))
    b = y * (2.0 * x * a + 1.0) / (dd + p)
    d = a * (2.0 * x * a + 1.0 - dd - p) / (dd + p)
    # canonical branch: Delta >= 0, Im(Omega) >= 0 (conjugation-equivalent pair)
    if y < 0:
        dlt, omega, lam = -dlt, omega.conjugate(), lam.conjugate()
    return SteadyStateG(
        a=a, b=b, d=d, x_aux=x, y_aux=y, delta=dlt,
        omega=complex(omega), lam=complex(lam),
    )


def info_identity_check(r: float, phi_minus_theta: float) -> float:
    """|[1 - Re(Omega/Lambda)]^2 - (c^2 e^{-2r} + s^2 e^{2r})^{-1}|."""
    st = steady_state_g_matrix(r, phi_minus_theta)
    lhs = (1.0 - (st.omega / st.lam).real) ** 2
    c, s = math.cos(phi_minus_theta), math.sin(phi_minus_theta)
    rhs = 1.0 / (c * c * math.exp(-2.0 * r) + s * s * math.exp(2.0 * r))
    return abs(lhs - rhs)


def _f_expression(sin_w, cos_w, eps: float, s_true_sq: float):
    """Noise-information expression in generic arithmetic.

    The filter constants live at the LO-to-candidate angle w (generic), the
    covariance weights at the LO-to-true angle (s_true_sq = sin^2, scalar).
    """
    _, _, a, _, omega, lam = _steady_core(sin_w, cos_w, eps)
    abs_om_sq = omega * omega.conjugate()
    core = omega * omega / (2.0 * lam) + abs_om_sq / a - 2.0 * omega
    out = abs_om_sq / (2.0 * a) + omega * omega / (4.0 * lam)
    if eps > 0.0:
        out = out + (s_true_sq * eps / (1.0 - eps)) * (
            1.0 + core / (lam + 0.5 * (1.0 - eps))
        )
        out = out + ((s_true_sq - 1.0) * eps / (1.0 + eps)) * (
            1.0 + core / (lam + 0.5 * (1.0 + eps))
        )
    return out


def noise_info_f(r: float, phi_minus_theta: float, theta_offset: float) -> float:
    """Expected squared filter residual per unit gamma, less shot noise and the
    mean-field term.

    ``phi_minus_theta`` is the LO phase minus the true phase; ``theta_offset``
    the candidate phase minus the true phase.  Constant in the offset at r=0.
    """
    if r < 0:
        raise ValueError("r must be >= 0")
    eps = epsilon_from_r(r)
    w = phi_minus_theta - theta_offset
    s_true = math.sin(phi_minus_theta)
    val = _f_expression(math.sin(w), math.cos(w), eps, s_true * s_true)
    return val.real


def noise_info_g(r: float, phi_minus_theta: float) -> float:
    """Phase information per unit gamma from the squeezed noise.

    Half the second derivative of :func:`noise_info_f` in the candidate-phase
    offset at zero offset, evaluated exactly with second-order Taylor (jet)
    arithmetic.  Vanishes identically at r = 0 and is bounded by e^{3r}/4.
    """
    if r < 0:
        raise ValueError("r must be >= 0")
    eps = epsilon_from_r(r)
    if eps == 0.0:
        return 0.0
    u = phi_minus_theta
    # d/d(offset) = -d/dw, so the second derivatives coincide
    sin_w = _Jet(math.sin(u), math.cos(u), -math.sin(u))
    cos_w = _Jet(math.cos(u), -math.sin(u), -math.cos(u))
    s_true = math.sin(u)
    val = _f_expression(sin_w, cos_w, eps, s_true * s_true)
    out = 0.5 * val.f2.real
    if -1e-10 < out < 0.0:  # roundoff at the locked angle, where g -> 0
        return 0.0
    return out


def noise_info_h(r: float) -> float:
    """Heterodyne noise information h(r) = cosh r - (eps^2 + 1)^{-1/2}."""
    if r < 0:
        raise ValueError("r must be >= 0")
    eps = epsilon_from_r(r)
    return math.cosh(r) - 1.0 / math.sqrt(eps * eps + 1.0)


def adaptive_info_rate(params: BeamParams, phi_minus_theta: float) -> float:
    """Inverse-variance growth rate for adaptive detection at a fixed LO offset.

    E^2 cos^2(dphi)/Xi + gamma g(r, dphi), with Xi = (1-S^2)e^{-2r} + S^2 e^{2r}
    the effective noise of the measured quadrature.
    """
    s = math.sin(phi_minus_theta)
    c = math.cos(phi_minus_theta)
    xi = (1.0 - s * s) * math.exp(-2.0 * params.r) + s * s * math.exp(2.0 * params.r)
    return params.e_amp**2 * c * c / xi + params.gamma * noise_info_g(params.r, phi_minus_theta)


def heterodyne_info_rate(params: BeamParams) -> float:
    """Inverse-variance growth rate for heterodyne: E^2/(1+e^{-2r}) + 2 gamma h(r)."""
    return params.e_amp**2 / (1.0 + math.exp(-2.0 * params.r)) + 2.0 * params.gamma * noise_info_h(params.r)


def predicted_variance(scheme: SchemeConfig, params: BeamParams) -> float:
    """Asymptotic sigma^2 sqrt(N/kappa) for the scheme (N >> kappa regime).

    Adaptive squeezed: e^{-r}/2; heterodyne squeezed: sqrt(1+e^{-2r})/2; the
    coherent cases are the r=0 values 1/2 and 1/sqrt(2).  Arbitrary squeezing
    takes the r -> infinity limit (0 adaptive, 1/2 heterodyne).
    """
    if scheme.squeezing == "arbitrary":
        return 0.0 if scheme.detection == "adaptive" else 0.5
    r = 0.0 if scheme.squeezing == "coherent" else params.r
    if scheme.detection == "adaptive":
        return 0.5 * math.exp(-r)
    return 0.5 * math.sqrt(1.0 + math.exp(-2.0 * r))


@dataclass(frozen=True)
class GammaBounds:
    """Window of cavity decay rates where squeezing can help; crossed if empty."""

    lower: float
    upper: float
    crossed: bool = field(default=False)


def gamma_bounds(n_flux: float, kappa: float, r: float) -> GammaBounds:
    """Tolerance window for gamma: kappa e^{2r} sqrt(N/kappa) < gamma < 2N/sinh^2 r.

    The lower bound keeps the squeezing bandwidth fast enough to be seen within
    the estimator's memory; the upper keeps the squeezing photon flux from
    exhausting N.  At r = 0 the upper bound is infinite.
    """
    if n_flux <= 0 or kappa <= 0 or r < 0:
        raise ValueError("need n_flux > 0, kappa > 0, r >= 0")
    lower = kappa * math.exp(2.0 * r) * math.sqrt(n_flux / kappa)
    sh2 = math.sinh(r) ** 2
    upper = math.inf if sh2 == 0.0 else 2.0 * n_flux / sh2
    return GammaBounds(lower=lower, upper=upper, crossed=lower >= upper)


@dataclass(frozen=True)
class ScalingPredictions:
    """Unit-prefactor power laws in N/kappa; optimizer seeds, not acceptance values."""

    sigma2: float
    e_r: float
    gamma_over_kappa: float
    chi_over_kappa: float
    delta: float


def scaling_predictions(n_over_kappa: float) -> ScalingPredictions:
    """sigma^2 ~ x^{-5/8}, e^r ~ x^{1/8}, gamma ~ x^{3/4}, chi ~ x^{5/8}, delta ~ x^{1/4}."""
    if n_over_kappa <= 0:
        raise ValueError("n_over_kappa must be > 0")
    x = n_over_kappa
    return ScalingPredictions(
        sigma2=x ** -0.625,
        e_r=x**0.125,
        gamma_over_kappa=x**0.75,
        chi_over_kappa=x**0.625,
        delta=x**0.25,
    )


def squeezing_timescale(r: float, gamma: float) -> float:
    """Time to observe squeezing, (e^r + 1)/gamma: the slow filter decay 1/Re(gamma Lambda)."""
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    return (math.exp(r) + 1.0) / gamma


@dataclass(frozen=True)
class CurrentCovariance:
    """Smooth part of the residual-current covariance; the shot-noise delta at
    zero lag is flagged, not folded into the value (it is 1/dt in discrete records)."""

    value: float
    shot_noise_at_zero_lag: bool = True


def analytic_current_covariance(
    params: BeamParams, s_true: float, s_candidate: float, tau: float
) -> CurrentCovariance:
    """<dI(u) dI(u+tau)> less the delta term, for fixed LO and phases.

    (S-s)^2 E^2 + S^2 (g e/(1-e)) exp(-g(1-e)tau/2) + (S^2-1)(g e/(1+e)) exp(-g(1+e)tau/2),
    with S/s the true/candidate LO-offset sines.  Negative at tau=0+ for S=0,
    r>0: squeezing below shot noise.
    """
    if abs(s_true) > 1.0 or abs(s_candidate) > 1.0:
        raise ValueError("sines must lie in [-1, 1]")
    if tau < 0:
        raise ValueError("tau must be >= 0")
    g, eps = params.gamma, params.epsilon
    val = (s_true - s_candidate) ** 2 * params.e_amp**2
    if g > 0 and eps > 0:
        val += s_true**2 * (g * eps / (1.0 - eps)) * math.exp(-0.5 * g * (1.0 - eps) * tau)
        val += (s_true**2 - 1.0) * (g * eps / (1.0 + eps)) * math.exp(-0.5 * g * (1.0 + eps) * tau)
    return CurrentCovariance(value=val)
