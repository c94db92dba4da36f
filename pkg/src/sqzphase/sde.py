"""True-system integration: cavity quadratures, diffusing phase, photocurrents.

The integrator is Euler-Maruyama on the linear cavity SDEs, with the
measurement noise shared between the current sample and the quadrature kick
(that correlation is the squeezing).  Each trajectory owns a counter-seeded
Philox stream keyed by (master seed, trajectory index), so ensembles are
reproducible regardless of batching or thread count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .theory import BeamParams

__all__ = [
    "HOMODYNE_CHANNELS",
    "HETERODYNE_CHANNELS",
    "TrajectoryState",
    "StepOutput",
    "FixedPhase",
    "LinearFeedback",
    "choose_dt",
    "trajectory_noise",
    "step_homodyne",
    "step_heterodyne",
    "simulate_record",
    "Record",
    "write_record_csv",
]

HOMODYNE_CHANNELS = 3   # xi, eta, phase kick
HETERODYNE_CHANNELS = 5  # nu1 re/im, nu2 re/im, phase kick

DT_ETA_DEFAULT = 0.05


@dataclass(frozen=True)
class TrajectoryState:
    """True system state; theta is never wrapped here (diffusion statistics)."""

    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0
    t: float = 0.0


@dataclass(frozen=True)
class StepOutput:
    current: complex  # real-valued for homodyne
    dt: float
    state: TrajectoryState


@dataclass(frozen=True)
class FixedPhase:
    """Hold the LO at a constant phase (heterodyne, diagnostics)."""

    phi: float = 0.0


@dataclass(frozen=True)
class LinearFeedback:
    """Steer the LO with the exponential-window A/B/C filter."""

    chi: float
    delta: float = 0.0
    phi_offset: float = -math.pi / 2.0


def choose_dt(params: BeamParams, chi: float, eta: float = DT_ETA_DEFAULT) -> float:
    """eta times the shortest system timescale: cavity decay, filter window, linewidth."""
    if eta <= 0 or chi <= 0:
        raise ValueError("eta and chi must be > 0")
    scales = [1.0 / chi]
    if params.gamma > 0:
        scales.append(2.0 / (params.gamma * (1.0 + params.epsilon)))
    if params.kappa > 0:
        scales.append(1.0 / params.kappa)
    return eta * min(scales)


def _check_dt(params: BeamParams, dt: float) -> None:
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if params.gamma > 0 and params.gamma * (1.0 + params.epsilon) * dt / 2.0 >= 1.0:
        raise ValueError(
            f"dt = {dt:g} unstable for gamma(1+eps)/2 = "
            f"{params.gamma * (1.0 + params.epsilon) / 2.0:g}"
        )


def trajectory_noise(seed: int, traj_index: int, n_steps: int, channels: int) -> np.ndarray:
    """Unit normals (n_steps+1, channels) from Philox keyed on (seed, index).

    Row 0 seeds the stationary initial quadratures; rows 1..n drive the steps.
    """
    gen = np.random.Generator(np.random.Philox(key=[seed, traj_index]))
    return gen.standard_normal((n_steps + 1, channels))


def step_homodyne(
    state: TrajectoryState,
    params: BeamParams,
    phi: float,
    dt: float,
    rng: np.random.Generator,
) -> StepOutput:
    """One homodyne step: emit the current, advance quadratures and phase."""
    _check_dt(params, dt)
    xi, eta, z = rng.standard_normal(3)
    g, eps = params.gamma, params.epsilon
    sq, sdt = math.sqrt(g * dt), math.sqrt(dt)
    c = math.cos(phi - state.theta)
    s = math.sin(phi - state.theta)
    cur = (c * (sq * state.x - xi) + s * (sq * state.y + sdt * params.e_amp - eta)) / sdt
    new = TrajectoryState(
        x=state.x - state.x * dt * g * (1.0 + eps) / 2.0 + sq * xi,
        y=state.y - state.y * dt * g * (1.0 - eps) / 2.0 + sq * eta,
        theta=state.theta + math.sqrt(params.kappa * dt) * z,
        t=state.t + dt,
    )
    return StepOutput(current=cur, dt=dt, state=new)


def step_heterodyne(
    state: TrajectoryState,
    params: BeamParams,
    dt: float,
    rng: np.random.Generator,
) -> StepOutput:
    """One heterodyne step; nu1 drives the cavity, nu1+nu2 the shot noise."""
    _check_dt(params, dt)
    n = rng.standard_normal(5)
    nu1 = complex(n[0], n[1]) / math.sqrt(2.0)
    nu2 = complex(n[2], n[3]) / math.sqrt(2.0)
    g, eps = params.gamma, params.epsilon
    rot = complex(math.cos(state.theta), math.sin(state.theta))
    cur = rot * (
        math.sqrt(g / 2.0) * complex(state.x, state.y)
        + 1j * params.e_amp / math.sqrt(2.0)
        - (nu1 + nu2) / math.sqrt(dt)
    )
    sqg = math.sqrt(2.0 * g * dt)
    new = TrajectoryState(
        x=state.x - state.x * dt * g * (1.0 + eps) / 2.0 + sqg * nu1.real,
        y=state.y - state.y * dt * g * (1.0 - eps) / 2.0 + sqg * nu1.imag,
        theta=state.theta + math.sqrt(params.kappa * dt) * n[4],
        t=state.t + dt,
    )
    return StepOutput(current=cur, dt=dt, state=new)


@dataclass(frozen=True)
class Record:
    """Synchronized single-trajectory record; current is complex for heterodyne."""

    t: np.ndarray
    current: np.ndarray
    phi: np.ndarray
    theta: np.ndarray
    dt: float
    detection: str


def simulate_record(
    params: BeamParams,
    detection: str,
    feedback: FixedPhase | LinearFeedback,
    duration: float,
    seed: int = 0,
    traj_index: int = 0,
    dt: float | None = None,
    theta_init: float = 0.0,
) -> Record:
    """Integrate one trajectory and return the full (t, I, Phi, Theta) record.

    The feedback policy is consulted every step for adaptive homodyne and
    ignored (fixed LO) for heterodyne.
    """
    if detection not in ("adaptive", "heterodyne"):
        raise ValueError("detection must be 'adaptive' or 'heterodyne'")
    if duration < 0:
        raise ValueError("duration must be >= 0")
    if dt is None:
        chi = feedback.chi if isinstance(feedback, LinearFeedback) else 1.0
        dt = choose_dt(params, chi)
    _check_dt(params, dt)
    n_steps = math.ceil(duration / dt)
    t = np.arange(n_steps) * dt
    empty = np.empty(0, dtype=np.int64)
    if detection == "adaptive":
        noise = trajectory_noise(seed, traj_index, n_steps, HOMODYNE_CHANNELS)[None]
        fb_on = isinstance(feedback, LinearFeedback)
        chi = feedback.chi if fb_on else 0.0
        delta = feedback.delta if fb_on else 0.0
        off = feedback.phi_offset if fb_on else 0.0
        phi0 = 0.0 if fb_on else feedback.phi
        _, _, i_rec, phi_rec, theta_rec, *_ = kernels.run_homodyne_batch(
            noise, np.array([theta_init]), np.array([phi0]),
            params.gamma, params.epsilon, params.e_amp, params.kappa, dt,
            chi, delta, off, fb_on, empty, True,
        )
        if n_steps == 0:
            return Record(t, np.empty(0), np.empty(0), np.empty(0), dt, detection)
        return Record(t, i_rec[0], phi_rec[0], theta_rec[0], dt, detection)
    noise = trajectory_noise(seed, traj_index, n_steps, HETERODYNE_CHANNELS)[None]
    _, _, i_re, i_im, theta_rec, *_ = kernels.run_heterodyne_batch(
        noise, np.array([theta_init]),
        params.gamma, params.epsilon, params.e_amp, params.kappa, dt,
        1.0, empty, True,
    )
    if n_steps == 0:
        return Record(t, np.empty(0, dtype=complex), np.empty(0), np.empty(0), dt, detection)
    phi = np.full(n_steps, feedback.phi if isinstance(feedback, FixedPhase) else 0.0)
    return Record(t, i_re[0] + 1j * i_im[0], phi, theta_rec[0], dt, detection)


def write_record_csv(record: Record, path: str) -> None:
    """Dump a record as `t,I_re,I_im,Phi,Theta` (I_im empty for homodyne)."""
    with open(path, "w") as fh:
        fh.write("t,I_re,I_im,Phi,Theta\n")
        het = record.detection == "heterodyne"
        for i in range(len(record.t)):
            cur = record.current[i]
            i_im = f"{cur.imag!r}" if het else ""
            i_re = cur.real if het else cur
            fh.write(f"{record.t[i]!r},{i_re!r},{i_im},{record.phi[i]!r},{record.theta[i]!r}\n")
