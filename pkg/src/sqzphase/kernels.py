"""Hot numerical kernels: trajectory integration, linear filtering, grid Bayes.

Every kernel is written once over numpy arrays and compiled with numba when
the backend allows; with ``SQZPHASE_NUMBA=0`` the identical source runs as
vectorized numpy.  Trajectory kernels advance a whole batch in lockstep, one
column of pregenerated unit normals per noise channel and step.  No kernel
draws randomness itself, so results are a pure function of the noise arrays.

Homodyne current sample over one step (all per-trajectory arrays):
    I = {c [sqrt(g dt) x - xi] + s [sqrt(g dt) y + sqrt(dt) E - eta]} / sqrt(dt)
with c = cos(Phi - Theta), s = sin(Phi - Theta) at the step start, and the
same xi, eta driving the cavity update (the squeezing correlations live in
that reuse).  Heterodyne replaces the projection by the full complex current.
"""
import math

import numpy as np

from ._backend import USE_NUMBA, njit

NAN = math.nan


if USE_NUMBA:

    @njit(cache=True, nogil=True)
    def _conv_valid(pad, kern):
        """Valid-mode convolution; the explicit loop vectorizes well under LLVM."""
        width = kern.shape[0]
        n_out = pad.shape[0] - width + 1
        out = np.empty(n_out)
        for i in range(n_out):
            acc = 0.0
            for d in range(width):
                acc += pad[i + d] * kern[d]
            out[i] = acc
        return out

else:

    def _conv_valid(pad, kern):
        return np.convolve(pad, kern[::-1], mode="valid")


@njit(cache=True, nogil=True)
def wrap_array(x):
    """Reduce angles to (-pi, pi] elementwise."""
    return np.pi - np.mod(np.pi - x, 2.0 * np.pi)


@njit(cache=True, nogil=True)
def run_homodyne_batch(
    noise,          # (B, n_steps+1, 3) unit normals; row 0 seeds x, y
    theta_init,     # (B,)
    phi_init,       # (B,)
    gamma, eps, e_amp, kappa, dt,
    chi, delta, phi_offset,
    feedback_on,    # False: hold phi_init fixed (no filter-driven feedback)
    sample_idx,     # (m,) ascending step indices at which errors are taken
    want_record,
):
    """Adaptive (or fixed-LO) homodyne trajectories with the A/B/C filter.

    Returns (err, est, i_rec, phi_rec, theta_rec, theta, x, y).  err holds the
    wrapped estimate errors at the sampled steps (NaN where the estimator is
    undefined, i.e. C = 0); records are length-1 dummies unless requested.
    """
    n_traj = noise.shape[0]
    n_steps = noise.shape[1] - 1
    n_samp = sample_idx.shape[0]

    x = noise[:, 0, 0] * math.sqrt(1.0 / (1.0 + eps)) if gamma > 0 else np.zeros(n_traj)
    y = noise[:, 0, 1] * math.sqrt(1.0 / (1.0 - eps)) if gamma > 0 else np.zeros(n_traj)
    theta = theta_init.copy()
    phi = phi_init.copy()
    acc_a = np.zeros(n_traj, dtype=np.complex128)
    acc_b = np.zeros(n_traj, dtype=np.complex128)

    err = np.full((n_traj, n_samp), NAN)
    est = np.full((n_traj, n_samp), NAN)
    nrec = n_steps if want_record else 1
    i_rec = np.zeros((n_traj, nrec))
    phi_rec = np.zeros((n_traj, nrec))
    theta_rec = np.zeros((n_traj, nrec))

    sq = math.sqrt(gamma * dt)
    sdt = math.sqrt(dt)
    skdt = math.sqrt(kappa * dt)
    k = 0
    for j in range(n_steps):
        xi = noise[:, j + 1, 0]
        eta = noise[:, j + 1, 1]
        c = np.cos(phi - theta)
        s = np.sin(phi - theta)
        cur = (c * (sq * x - xi) + s * (sq * y + sdt * e_amp - eta)) / sdt
        if want_record:
            i_rec[:, j] = cur
            phi_rec[:, j] = phi
            theta_rec[:, j] = theta

        # filter sees the step's current with the step's LO phase (zero-order hold)
        rot = np.cos(phi) + 1j * np.sin(phi)
        acc_a = acc_a + dt * (-chi * acc_a + rot * cur)
        acc_b = acc_b + dt * (-chi * acc_b - rot * rot)
        acc_c = acc_a + chi * acc_b * np.conj(acc_a)

        arg_a = np.arctan2(acc_a.imag, acc_a.real)
        arg_c = np.arctan2(acc_c.imag, acc_c.real)
        defined = (np.abs(acc_a) > 0.0) & (np.abs(acc_c) > 0.0)
        if k < n_samp and j == sample_idx[k]:
            e_hat = wrap_array(arg_c + phi_offset)
            est[:, k] = np.where(np.abs(acc_c) > 0.0, e_hat, NAN)
            err[:, k] = np.where(np.abs(acc_c) > 0.0, wrap_array(e_hat - theta), NAN)
            k += 1
        if feedback_on:
            # shorter-arc blend between arg C and arg A, plus the fixed offset
            new_phi = wrap_array(arg_c + delta * wrap_array(arg_a - arg_c) + phi_offset)
            phi = np.where(defined, new_phi, phi)

        if gamma > 0:
            x = x - x * (dt * gamma * (1.0 + eps) / 2.0) + sq * xi
            y = y - y * (dt * gamma * (1.0 - eps) / 2.0) + sq * eta
        theta = theta + skdt * noise[:, j + 1, 2]
    return err, est, i_rec, phi_rec, theta_rec, theta, x, y


@njit(cache=True, nogil=True)
def run_heterodyne_batch(
    noise,          # (B, n_steps+1, 5); row 0 seeds x, y
    theta_init,
    gamma, eps, e_amp, kappa, dt,
    chi,
    sample_idx,
    want_record,
):
    """Heterodyne trajectories; complex current, exponential-window estimator.

    The estimate is arg(A) - pi/2 since the mean current is i e^{i Theta} E/sqrt(2).
    Returns (err, est, i_re, i_im, theta_rec, theta, x, y).
    """
    n_traj = noise.shape[0]
    n_steps = noise.shape[1] - 1
    n_samp = sample_idx.shape[0]
    inv_rt2 = 1.0 / math.sqrt(2.0)

    x = noise[:, 0, 0] * math.sqrt(1.0 / (1.0 + eps)) if gamma > 0 else np.zeros(n_traj)
    y = noise[:, 0, 1] * math.sqrt(1.0 / (1.0 - eps)) if gamma > 0 else np.zeros(n_traj)
    theta = theta_init.copy()
    acc_a = np.zeros(n_traj, dtype=np.complex128)

    err = np.full((n_traj, n_samp), NAN)
    est = np.full((n_traj, n_samp), NAN)
    nrec = n_steps if want_record else 1
    i_re = np.zeros((n_traj, nrec))
    i_im = np.zeros((n_traj, nrec))
    theta_rec = np.zeros((n_traj, nrec))

    sq2 = math.sqrt(gamma / 2.0)
    sqg = math.sqrt(2.0 * gamma * dt)
    sdt = math.sqrt(dt)
    skdt = math.sqrt(kappa * dt)
    k = 0
    for j in range(n_steps):
        nu1 = (noise[:, j + 1, 0] + 1j * noise[:, j + 1, 1]) * inv_rt2
        nu2 = (noise[:, j + 1, 2] + 1j * noise[:, j + 1, 3]) * inv_rt2
        rot = np.cos(theta) + 1j * np.sin(theta)
        cur = rot * (sq2 * (x + 1j * y) + 1j * e_amp * inv_rt2 - (nu1 + nu2) / sdt)
        if want_record:
            i_re[:, j] = cur.real
            i_im[:, j] = cur.imag
            theta_rec[:, j] = theta

        acc_a = acc_a + dt * (-chi * acc_a + cur)
        if k < n_samp and j == sample_idx[k]:
            e_hat = wrap_array(np.arctan2(acc_a.imag, acc_a.real) - np.pi / 2.0)
            ok = np.abs(acc_a) > 0.0
            est[:, k] = np.where(ok, e_hat, NAN)
            err[:, k] = np.where(ok, wrap_array(e_hat - theta), NAN)
            k += 1

        if gamma > 0:
            x = x - x * (dt * gamma * (1.0 + eps) / 2.0) + sqg * nu1.real
            y = y - y * (dt * gamma * (1.0 - eps) / 2.0) + sqg * nu1.imag
        theta = theta + skdt * noise[:, j + 1, 4]
    return err, est, i_re, i_im, theta_rec, theta, x, y


@njit(cache=True, nogil=True)
def _diffuse_weights(log_p, kern, half):
    """Circular convolution of exp(log_p) with a symmetric kernel; renormalized."""
    k_pts = log_p.shape[0]
    m = np.max(log_p)
    p = np.exp(log_p - m)
    pad = np.empty(k_pts + 2 * half)
    pad[:half] = p[k_pts - half:]
    pad[half:half + k_pts] = p
    pad[half + k_pts:] = p[:half]
    out = _conv_valid(pad, kern)
    out /= np.sum(out)
    return np.log(np.maximum(out, 1e-300))


@njit(cache=True, nogil=True)
def bayes_homodyne_replay(
    i_rec, phi_rec,            # (n,) shared measurement record
    cos_th, sin_th,            # (K,) grid direction cosines
    log_p, xb0, xb1, g00, g01, g11,   # (K,) state, updated in place
    gamma, eps, e_amp, kappa, dt,
    diff_kern, diffuse_every,  # per-application circular kernel; 0 disables
    sample_idx,
):
    """Grid Bayes filter driven by a recorded homodyne current and LO phase.

    Per grid point the conditional Gaussian advances by the combined
    measurement/unraveling differentials; log-weights take
    -(dt/2)(dI - sqrt(g) A.xbar)^2 and are max-normalized each step.  Phase
    diffusion is applied as a circular convolution every ``diffuse_every``
    steps.  Returns (estimates at samples, pd_fix_count).
    """
    n_steps = i_rec.shape[0]
    n_samp = sample_idx.shape[0]
    est = np.full(n_samp, NAN)
    half = diff_kern.shape[0] // 2
    rootg = math.sqrt(gamma)
    fixes = 0
    k = 0
    for j in range(n_steps):
        cphi = math.cos(phi_rec[j])
        sphi = math.sin(phi_rec[j])
        c = cphi * cos_th + sphi * sin_th
        s = sphi * cos_th - cphi * sin_th
        resid = (i_rec[j] - s * e_amp) - rootg * (c * xb0 + s * xb1)
        log_p += -0.5 * dt * resid * resid
        log_p -= np.max(log_p)

        if gamma > 0.0:
            u0 = g00 * c + g01 * s
            u1 = g01 * c + g11 * s
            w0 = g00 * s - g01 * c
            w1 = g01 * s - g11 * c
            d00 = gamma * dt * (c * c + (1.0 + eps) * g00 - (2.0 * c * u0 + w0 * w0))
            d01 = gamma * dt * (c * s + g01 - (c * u1 + s * u0 + w0 * w1))
            d11 = gamma * dt * (s * s + (1.0 - eps) * g11 - (2.0 * s * u1 + w1 * w1))
            det = g00 * g11 - g01 * g01
            v0 = (g11 / det - 1.0) * c - (g01 / det) * s
            v1 = -(g01 / det) * c + (g00 / det - 1.0) * s
            xb0 = xb0 - gamma * dt * (1.0 + eps) * xb0 / 2.0 + rootg * dt * v0 * resid
            xb1 = xb1 - gamma * dt * (1.0 - eps) * xb1 / 2.0 + rootg * dt * v1 * resid
            g00 = g00 + d00
            g01 = g01 + d01
            g11 = g11 + d11
            # restore positive definiteness by flooring the low eigenvalue
            bad = (g00 * g11 - g01 * g01 <= 0.0) | (g00 <= 0.0) | (g11 <= 0.0)
            if np.any(bad):
                for i in range(log_p.shape[0]):
                    if bad[i]:
                        mean = 0.5 * (g00[i] + g11[i])
                        disc = math.sqrt(0.25 * (g00[i] - g11[i]) ** 2 + g01[i] ** 2)
                        hi = mean + disc
                        lo = mean - disc
                        floor = max(1e-9, 1e-9 * abs(hi))
                        if hi <= 0.0:
                            g00[i], g01[i], g11[i] = floor, 0.0, floor
                        elif lo < floor:
                            # eigvec for hi: (g01, hi - g00) unless degenerate
                            vx, vy = g01[i], hi - g00[i]
                            nrm = math.hypot(vx, vy)
                            if nrm == 0.0:
                                vx, vy = 1.0, 0.0
                            else:
                                vx, vy = vx / nrm, vy / nrm
                            g00[i] = hi * vx * vx + floor * vy * vy
                            g01[i] = (hi - floor) * vx * vy
                            g11[i] = hi * vy * vy + floor * vx * vx
                        fixes += 1

        if k < n_samp and j == sample_idx[k]:
            m = np.max(log_p)
            p = np.exp(log_p - m)
            zr = np.sum(p * cos_th)
            zi = np.sum(p * sin_th)
            if math.hypot(zr, zi) > 1e-9 * np.sum(p):
                est[k] = math.atan2(zi, zr)
            k += 1

        if diffuse_every > 0 and (j + 1) % diffuse_every == 0:
            log_p = _diffuse_weights(log_p, diff_kern, half)
    return est, fixes, log_p, xb0, xb1, g00, g01, g11


@njit(cache=True, nogil=True)
def bayes_heterodyne_replay(
    i_re, i_im,
    cos_th, sin_th,
    log_p, xb, yb, sx2, sy2,   # (K,) state
    gamma, eps, e_amp, kappa, dt,
    diff_kern, diffuse_every,
    sample_idx,
):
    """Grid Bayes filter on a recorded complex heterodyne current.

    Per grid point the x/y conditional moments decouple; log-weights take
    -(g dt/4)[(Ix - xbar)^2 + (Iy - ybar)^2] with Ix + i Iy the de-rotated,
    displaced current.  At gamma = 0 only the weights evolve.
    Returns (estimates, log_p, xb, yb, sx2, sy2).
    """
    n_steps = i_re.shape[0]
    n_samp = sample_idx.shape[0]
    est = np.full(n_samp, NAN)
    half = diff_kern.shape[0] // 2
    inv_rt2 = 1.0 / math.sqrt(2.0)
    k = 0
    for j in range(n_steps):
        zr, zi = i_re[j], i_im[j]
        # z e^{-i theta_k}
        rot_r = zr * cos_th + zi * sin_th
        rot_i = zi * cos_th - zr * sin_th
        if gamma > 0.0:
            f = math.sqrt(2.0 / gamma)
            ix = f * rot_r
            iy = f * rot_i - e_amp / math.sqrt(gamma)
            log_p += -(gamma * dt / 4.0) * ((ix - xb) ** 2 + (iy - yb) ** 2)
            xb = xb - (xb * (sx2 + eps) + (1.0 - sx2) * ix) * gamma * dt / 2.0
            yb = yb - (yb * (sy2 - eps) + (1.0 - sy2) * iy) * gamma * dt / 2.0
            sx2 = sx2 + (1.0 - 2.0 * eps * sx2 - sx2 * sx2) * gamma * dt / 2.0
            sy2 = sy2 + (1.0 + 2.0 * eps * sy2 - sy2 * sy2) * gamma * dt / 2.0
        else:
            # gamma -> 0 limit of the same weight increment in current form
            dr = rot_r
            di = rot_i - e_amp * inv_rt2
            log_p += -0.5 * dt * (dr * dr + di * di)
        log_p -= np.max(log_p)

        if k < n_samp and j == sample_idx[k]:
            p = np.exp(log_p - np.max(log_p))
            res_r = np.sum(p * cos_th)
            res_i = np.sum(p * sin_th)
            if math.hypot(res_r, res_i) > 1e-9 * np.sum(p):
                est[k] = math.atan2(res_i, res_r)
            k += 1
        if diffuse_every > 0 and (j + 1) % diffuse_every == 0:
            log_p = _diffuse_weights(log_p, diff_kern, half)
    return est, log_p, xb, yb, sx2, sy2
