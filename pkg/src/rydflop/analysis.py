"""Damped-cosine fits and oscillation visibility.

Fit model, with the t = 0 normalization built in::

    F(t) = (1 - a) + a exp(-t / tau) cos(omega t)
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, signal

__all__ = [
    "FitModel",
    "FitResult",
    "FitPreconditionError",
    "DegenerateFitError",
    "damped_cosine",
    "damped_cosine_jacobian",
    "initial_guess",
    "fit_damped_cosine",
    "visibility",
    "bootstrap_visibility",
    "ramsey_probability",
    "curve_rms",
]


class FitPreconditionError(ValueError):
    pass


class DegenerateFitError(RuntimeError):
    """The data do not constrain the requested parameters."""


def damped_cosine(t, a, tau, omega):
    t = np.asarray(t, dtype=float)
    return (1.0 - a) + a * np.exp(-t / tau) * np.cos(omega * t)


def damped_cosine_jacobian(t, a, tau, omega) -> np.ndarray:
    """Columns d/da, d/dtau, d/domega; shape (len(t), 3)."""
    t = np.asarray(t, dtype=float)
    env = np.exp(-t / tau)
    c, s = np.cos(omega * t), np.sin(omega * t)
    return np.column_stack([env * c - 1.0, a * env * c * t / tau**2, -a * env * t * s])


@dataclass(frozen=True)
class FitModel:
    a: float
    tau: float
    omega: float

    def __post_init__(self):
        if not 0.0 <= self.a <= 1.0:
            raise ValueError("a must lie in [0, 1]")
        if not (self.tau > 0 and self.omega > 0):
            raise ValueError("tau and omega must be positive")

    def __call__(self, t):
        return damped_cosine(t, self.a, self.tau, self.omega)


@dataclass(frozen=True)
class FitResult:
    a: float
    tau: float
    omega: float
    a_err: float
    tau_err: float
    omega_err: float
    rms: float
    converged: bool
    degenerate: bool = False
    bracket: tuple[float, float] = (0.0, math.inf)
    grad_norm: float = math.nan
    grad_norm_initial: float = math.nan
    nfev: int = 0

    @property
    def omega_hz(self) -> float:
        return self.omega / (2 * math.pi)

    def model(self, t):
        return damped_cosine(t, self.a, self.tau, self.omega)

    def as_dict(self) -> dict:
        return {
            "a": self.a,
            "a_err": self.a_err,
            "tau_s": self.tau,
            "tau_err_s": self.tau_err,
            "omega_rad_s": self.omega,
            "omega_err_rad_s": self.omega_err,
            "rms": self.rms,
            "converged": self.converged,
            "degenerate": self.degenerate,
        }


def _zero_crossings(t, y):
    z = y - y.mean()
    idx = np.nonzero(np.signbit(z[:-1]) != np.signbit(z[1:]))[0]
    # linear interpolation of each crossing
    t0, t1, z0, z1 = t[idx], t[idx + 1], z[idx], z[idx + 1]
    return t0 - z0 * (t1 - t0) / (z1 - z0)


def initial_guess(t, y) -> tuple[float, float, float]:
    """(a, tau, omega) from range, envelope log-slope and zero-crossing spacing."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    span = t[-1] - t[0]
    zc = _zero_crossings(t, y)
    if len(zc) < 2:
        raise FitPreconditionError("fewer than two zero crossings; cannot estimate omega")
    omega = math.pi / np.mean(np.diff(zc))
    a = float(np.clip(0.5 * np.ptp(y), 1e-3, 1.0))
    # envelope: largest excursion in each half period
    edges = np.concatenate([[t[0]], zc, [t[-1]]])
    centres, peaks = [], []
    dev = np.abs(y - y.mean())
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (t >= lo) & (t <= hi)
        if sel.sum() >= 2:
            k = np.argmax(np.where(sel, dev, -1.0))
            centres.append(t[k])
            peaks.append(max(dev[k], 1e-12))
    tau = 10.0 * span
    if len(peaks) >= 3:
        slope = np.polyfit(centres, np.log(peaks), 1)[0]
        if slope < 0:
            tau = min(-1.0 / slope, 10.0 * span)
    return a, tau, float(omega)


def fit_damped_cosine(t, y, sigma=None, max_nfev: int = 2000) -> FitResult:
    """Weighted least-squares fit of ``(1-a) + a exp(-t/tau) cos(omega t)``.

    Trust-region damped Gauss-Newton with the analytic Jacobian (scipy's
    ``least_squares``), started at omega x {0.5, 1, 2} of the zero-crossing
    estimate. Omega is confined to [omega0/4, 4 omega0]. Among starts the
    lowest cost wins, ties going to the smaller omega.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise FitPreconditionError("t and y must be 1-D arrays of equal length")
    if len(t) < 8:
        raise FitPreconditionError(f"need >= 8 points, got {len(t)}")
    if sigma is not None:
        sigma = np.asarray(sigma, dtype=float)
        if sigma.shape != y.shape or not np.all(np.isfinite(sigma)) or np.any(sigma <= 0):
            raise FitPreconditionError("sigma must be positive and finite, one per point")
    w = np.ones_like(y) if sigma is None else 1.0 / sigma

    if np.ptp(y) <= 1e-12 * max(1.0, float(np.max(np.abs(y)))):
        # flat line: amplitude zero, frequency and decay unidentifiable
        rms = float(np.sqrt(np.mean((y - 1.0) ** 2)))
        return FitResult(0.0, math.nan, math.nan, math.nan, math.nan, math.nan, rms, False, True)

    a0, tau0, om0 = initial_guess(t, y)
    span = t[-1] - t[0]
    if span * om0 / (2 * math.pi) < 1.5:
        raise FitPreconditionError(
            f"data span {span * om0 / (2 * math.pi):.2f} periods; need >= 1.5"
        )
    # work in scaled units (time / span) for conditioning
    ts = span
    tt = t / ts
    lo = np.array([0.0, 1e-6, om0 * ts / 4])
    hi = np.array([1.0, np.inf, om0 * ts * 4])

    def resid(p):
        return (damped_cosine(tt, *p) - y) * w

    def jac(p):
        return damped_cosine_jacobian(tt, *p) * w[:, None]

    best = None
    g0 = None
    for k, mult in enumerate((0.5, 1.0, 2.0)):
        p0 = np.clip([a0, tau0 / ts, om0 * ts * mult], lo + 1e-12, hi - 1e-12)
        if k == 1:
            g0 = float(np.linalg.norm(jac(p0).T @ resid(p0)))
        res = optimize.least_squares(
            resid, p0, jac=jac, bounds=(lo, hi), method="trf", x_scale="jac",
            xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev,
        )
        key = (round(2 * res.cost, 14), res.x[2])
        if best is None or key < best[0]:
            best = (key, res)
    res = best[1]
    a, tau_s, om_s = res.x
    J = res.jac
    r = res.fun
    dof = max(1, len(y) - 3)
    scale = 1.0 if sigma is not None else float(r @ r) / dof
    with np.errstate(all="ignore"):
        try:
            cov = np.linalg.inv(J.T @ J) * scale
            errs = np.sqrt(np.abs(np.diag(cov)))
        except np.linalg.LinAlgError:
            errs = np.full(3, np.inf)
    degenerate = (not np.all(np.isfinite(errs))) or a < 2.0 * errs[0] or a < 1e-6
    rms = float(np.sqrt(np.mean((damped_cosine(tt, *res.x) - y) ** 2)))
    return FitResult(
        float(a),
        float(tau_s * ts),
        float(om_s / ts),
        float(errs[0]),
        float(errs[1] * ts),
        float(errs[2] / ts),
        rms,
        bool(res.success and res.status > 0),
        bool(degenerate),
        (float(lo[2] / ts), float(hi[2] / ts)),
        float(np.linalg.norm(J.T @ r)),
        float(g0),
        int(res.nfev),
    )


def _smooth(y, n_kernel: int):
    if n_kernel < 3:
        return y
    if n_kernel % 2 == 0:
        n_kernel += 1
    n_kernel = min(n_kernel, len(y) if len(y) % 2 else len(y) - 1)
    return signal.savgol_filter(y, n_kernel, min(4, n_kernel - 1), mode="interp")


def visibility(t, y, period: float | None = None, window: float = 1.0, t_start: float = 0.0) -> float:
    """(max - min)/(max + min) of the smoothed signal over ``window`` periods.

    The window starts at ``t_start``. Smoothing is a local-polynomial
    (Savitzky-Golay, order <= 4) kernel one eighth of a period wide, which
    leaves the extrema of a clean sinusoid intact. ``period`` defaults to
    the fitted oscillation period. Requires a uniform time grid.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if window < 1.0:
        raise ValueError("visibility window must cover at least one period")
    if period is None:
        fit = fit_damped_cosine(t, y)
        if fit.degenerate:
            raise DegenerateFitError("no oscillation period can be fitted; pass period")
        period = 2 * math.pi / fit.omega
    dt = np.diff(t)
    if len(t) < 3 or np.ptp(dt) > 1e-6 * dt.mean():
        raise ValueError("visibility needs a uniform time grid")
    t_end = t_start + window * period
    if t_start < t[0] - 1e-12 * period or t_end > t[-1] + 1e-9 * period:
        raise ValueError(
            f"window [{t_start:g}, {t_end:g}] s exceeds the data span [{t[0]:g}, {t[-1]:g}] s"
        )
    ys = _smooth(y, int(round(period / 8 / dt.mean())))
    sel = (t >= t_start - 1e-12 * period) & (t <= t_end + 1e-9 * period)
    hi, lo = ys[sel].max(), ys[sel].min()
    if hi + lo == 0:
        return 0.0
    return float((hi - lo) / (hi + lo))


def bootstrap_visibility(
    t, samples, period: float, window: float = 1.0, t_start: float = 0.0,
    n_boot: int = 200, seed: int = 0, normalize: bool = True,
) -> tuple[float, float]:
    """Visibility of the trial-mean trace and its bootstrap standard error.

    ``samples`` holds one row per trial. With ``normalize`` the mean trace
    is divided by its t = 0 value before the visibility is taken.
    """
    samples = np.asarray(samples, dtype=float)

    def vis(rows):
        m = rows.mean(axis=0)
        if normalize:
            m = m / m[0]
        return visibility(t, m, period, window, t_start)

    v0 = vis(samples)
    rng = np.random.default_rng(seed)
    n = samples.shape[0]
    boots = [vis(samples[rng.integers(0, n, n)]) for _ in range(n_boot)]
    return v0, float(np.std(boots, ddof=1))


def ramsey_probability(delta_gap: float, t_gap) -> np.ndarray:
    """Rydberg probability after two resonant pi/2 pulses around a detuned gap."""
    return 0.5 * (1.0 + np.cos(delta_gap * np.asarray(t_gap, dtype=float)))


def curve_rms(model_y, data_y) -> float:
    return float(np.sqrt(np.mean((np.asarray(model_y) - np.asarray(data_y)) ** 2)))
