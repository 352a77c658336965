"""Trap, detection and loss statistics for few-atom experiments.

Covers the Gaussian-beam FORT, Poisson photon-count histograms, nearest-mean
atom-number classification, the two-probe preselection experiment with
single-atom and light-assisted pair losses, and drop-and-recapture
thermometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .analysis import DegenerateFitError
from .constants import G, KB, rb87_mass_kg
from .mc import chunk_bounds, ordered_map, substream

__all__ = [
    "TrapModel",
    "DetectionModel",
    "LossModel",
    "PreselectionResult",
    "TemperatureEstimate",
    "histogram_counts",
    "count_thresholds",
    "classify_atom_number",
    "misclassification_probability",
    "probe_losses",
    "preselection_experiment",
    "sample_trapped",
    "drop_recapture",
    "drop_recapture_curve",
    "estimate_temperature",
]


@dataclass(frozen=True)
class TrapModel:
    """Gaussian-beam dipole trap; the beam propagates along z here.

    ``depth_k`` is U0 / k_B. ``power_w`` is recorded for provenance only;
    the depth is taken as given rather than derived from the polarizability.
    """

    depth_k: float = 10e-3
    waist_um: float = 2.7
    wavelength_nm: float = 1030.0
    power_w: float = 0.57
    mass_kg: float = field(default_factory=rb87_mass_kg)

    def __post_init__(self):
        if not (self.depth_k > 0 and self.waist_um > 0 and self.wavelength_nm > 0):
            raise ValueError("trap depth, waist and wavelength must be positive")

    @property
    def depth_j(self) -> float:
        return KB * self.depth_k

    @property
    def waist_m(self) -> float:
        return self.waist_um * 1e-6

    @property
    def rayleigh_m(self) -> float:
        return math.pi * self.waist_m**2 / (self.wavelength_nm * 1e-9)

    @property
    def rayleigh_um(self) -> float:
        return self.rayleigh_m * 1e6

    @property
    def omega_radial(self) -> float:
        return math.sqrt(4.0 * self.depth_j / (self.mass_kg * self.waist_m**2))

    @property
    def omega_axial(self) -> float:
        return math.sqrt(2.0 * self.depth_j / (self.mass_kg * self.rayleigh_m**2))

    @property
    def radial_frequency_hz(self) -> float:
        return self.omega_radial / (2 * math.pi)

    @property
    def axial_frequency_hz(self) -> float:
        return self.omega_axial / (2 * math.pi)

    def potential(self, x, y, z) -> np.ndarray:
        """U(r) in joules (negative inside the trap)."""
        zr = self.rayleigh_m
        wz2 = self.waist_m**2 * (1.0 + (z / zr) ** 2)
        return -self.depth_j * (self.waist_m**2 / wz2) * np.exp(-2.0 * (x * x + y * y) / wz2)


@dataclass(frozen=True)
class DetectionModel:
    rate_per_s: float = 1e4  # single-atom photoelectron rate during probing
    background_per_s: float = 0.0
    probe_time_s: float = 12e-3
    duty_factor: float = 2.5  # wall-clock / probing time, bookkeeping
    efficiency: float = 0.027  # already folded into rate_per_s

    def __post_init__(self):
        if min(self.rate_per_s, self.background_per_s, self.probe_time_s) < 0:
            raise ValueError("rates and probe time must be >= 0")

    @property
    def single_atom_mean(self) -> float:
        return self.rate_per_s * self.probe_time_s

    @property
    def background_mean(self) -> float:
        return self.background_per_s * self.probe_time_s

    @property
    def wall_time_s(self) -> float:
        return self.duty_factor * self.probe_time_s


@dataclass(frozen=True)
class LossModel:
    """Per-probe losses.

    ``probe_survival`` is the chance a lone atom survives one probe (light
    induced single-atom loss). ``pair_rate_per_s`` is the light-assisted
    ejection rate per pair, each event removing both atoms. The defaults are
    phenomenological: the pair rate empties a loaded pair within ~1 ms of a
    12 ms probe, and ``probe_survival`` gives a two-probe single-atom
    retention of about 0.85 at a mean loading of one atom.
    """

    lifetime_s: float = 3.0
    probe_survival: float = 0.88
    pair_rate_per_s: float = 1000.0

    def __post_init__(self):
        if not self.lifetime_s > 0:
            raise ValueError("lifetime must be > 0")
        if not 0.0 <= self.probe_survival <= 1.0:
            raise ValueError("probe survival must lie in [0, 1]")
        if self.pair_rate_per_s < 0:
            raise ValueError("pair loss rate must be >= 0")

    def single_rate(self, probe_time_s: float) -> float:
        """Per-atom loss rate while probing (s^-1), background included."""
        light = -math.log(self.probe_survival) / probe_time_s if self.probe_survival > 0 else math.inf
        return light + 1.0 / self.lifetime_s


def histogram_counts(n_atoms, det: DetectionModel, rng: np.random.Generator, size=None):
    """Photoelectron counts for ``n_atoms`` (scalar or array) during one probe."""
    n = np.asarray(n_atoms)
    if np.any(n < 0):
        raise ValueError("atom number must be >= 0")
    mean = n * det.single_atom_mean + det.background_mean
    return rng.poisson(mean, size=size)


def count_thresholds(det: DetectionModel, n_max: int = 20) -> np.ndarray:
    """Midpoints between consecutive mean counts: N is chosen if t[N-1] <= c < t[N]."""
    means = det.background_mean + det.single_atom_mean * np.arange(n_max + 1)
    return 0.5 * (means[:-1] + means[1:])


def classify_atom_number(count, det: DetectionModel, n_max: int = 20):
    """Nearest-mean atom-number estimate from a photoelectron count."""
    if det.single_atom_mean <= 0:
        raise ValueError("single-atom mean count must be positive to classify")
    th = count_thresholds(det, n_max)
    out = np.searchsorted(th, np.asarray(count, dtype=float), side="right")
    return out if np.ndim(out) else int(out)


def misclassification_probability(n: int, det: DetectionModel, n_max: int = 20) -> float:
    """Exact P(classify != n | n atoms) from Poisson tail sums."""
    from scipy import stats

    th = count_thresholds(det, n_max)
    mean = n * det.single_atom_mean + det.background_mean
    lo = th[n - 1] if n > 0 else -np.inf
    hi = th[n] if n < n_max else np.inf
    # counts c with lo <= c < hi are classified as n
    c_lo = math.ceil(lo) if np.isfinite(lo) else 0
    c_hi = math.ceil(hi) - 1 if np.isfinite(hi) else np.inf
    p_in = stats.poisson.cdf(c_hi, mean) - (stats.poisson.cdf(c_lo - 1, mean) if c_lo > 0 else 0.0)
    return float(1.0 - p_in)


def probe_losses(n0: np.ndarray, det: DetectionModel, loss: LossModel, rng: np.random.Generator):
    """Continuous-time loss chain during one probe for an array of trials.

    Returns ``(n_end, atom_time)`` where ``atom_time`` is the integral of
    N(t) dt over the probe, which sets the photoelectron mean.
    """
    T = det.probe_time_s
    n = np.array(n0, dtype=np.int64)
    g1 = loss.single_rate(T)
    b = loss.pair_rate_per_s
    if math.isinf(b):
        n = n % 2  # instant pair ejection leaves the odd atom out
        b = 0.0
    t = np.zeros(len(n))
    acc = np.zeros(len(n))
    active = n > 0
    while np.any(active):
        idx = np.nonzero(active)[0]
        nn = n[idx]
        r1 = nn * g1
        r2 = b * nn * (nn - 1) / 2.0
        rate = r1 + r2
        u = rng.random((len(idx), 2))
        with np.errstate(divide="ignore"):
            dt = -np.log(u[:, 0]) / rate
        end = t[idx] + dt >= T
        acc[idx] += nn * np.where(end, T - t[idx], dt)
        ev = ~end
        pair = ev & (u[:, 1] * rate < r2)
        n[idx[ev & ~pair]] -= 1
        n[idx[pair]] -= 2
        t[idx[ev]] += dt[ev]
        active[idx[end]] = False
        active[idx] &= n[idx] > 0
    return n, acc


@dataclass
class PreselectionResult:
    joint: np.ndarray  # joint[i, j] = trials with first class i, second class j
    n_max: int
    trials: int

    def conditional(self, first: int, second: int) -> float:
        row = self.joint[first]
        return float(row[second] / row.sum()) if row.sum() else math.nan

    @property
    def retention(self) -> float:
        """P(second = 1 | first = 1)."""
        return self.conditional(1, 1)

    def conditional_at_least(self, k: int) -> float:
        """P(second >= k | first >= k)."""
        sub = self.joint[k:]
        tot = sub.sum()
        return float(sub[:, k:].sum() / tot) if tot else math.nan


def preselection_experiment(
    nbar: float,
    det: DetectionModel,
    loss: LossModel,
    trials: int = 10000,
    seed: int = 0,
    n_max: int = 10,
    threads: int | None = None,
) -> PreselectionResult:
    """Load (Poisson), probe, probe again; tabulate the two classifications."""
    if trials < 1000:
        raise ValueError("need at least 1000 trials")

    def work(bounds):
        lo, hi = bounds
        rng = substream(seed, lo // 4096)
        n = rng.poisson(nbar, hi - lo)
        n1, at1 = probe_losses(n, det, loss, rng)
        c1 = rng.poisson(det.rate_per_s * at1 + det.background_mean)
        n2, at2 = probe_losses(n1, det, loss, rng)
        c2 = rng.poisson(det.rate_per_s * at2 + det.background_mean)
        k1 = np.minimum(classify_atom_number(c1, det, n_max + 1), n_max)
        k2 = np.minimum(classify_atom_number(c2, det, n_max + 1), n_max)
        joint = np.zeros((n_max + 1, n_max + 1), dtype=np.int64)
        np.add.at(joint, (k1, k2), 1)
        return joint

    parts = ordered_map(work, chunk_bounds(trials, 4096), threads)
    return PreselectionResult(np.sum(parts, axis=0), n_max, trials)


def sample_trapped(trap: TrapModel, temperature_k: float, n: int, rng: np.random.Generator):
    """Positions (m) and velocities (m/s) of trapped atoms at temperature T.

    Draws from the Boltzmann distribution of the harmonic approximation and
    keeps atoms whose energy in the full Gaussian potential is negative.
    Returns arrays of shape (k, 3) with k <= n.
    """
    pos, vel = _unit_samples(rng, n)
    return _scale_and_select(trap, temperature_k, pos, vel)


def _unit_samples(rng, n):
    return rng.standard_normal((n, 3)), rng.standard_normal((n, 3))


def _scale_and_select(trap, T, pos_u, vel_u):
    kT = KB * T
    m = trap.mass_kg
    sx = math.sqrt(kT / (m * trap.omega_radial**2))
    sz = math.sqrt(kT / (m * trap.omega_axial**2))
    pos = pos_u * np.array([sx, sx, sz])
    vel = vel_u * math.sqrt(kT / m)
    e = 0.5 * m * np.sum(vel * vel, axis=1) + trap.potential(pos[:, 0], pos[:, 1], pos[:, 2])
    keep = e < 0
    return pos[keep], vel[keep]


def _recaptured(trap, pos, vel, t_drop):
    # gravity along -y, transverse to the beam
    g = np.array([0.0, -G, 0.0])
    p = pos + vel * t_drop + 0.5 * g * t_drop**2
    v = vel + g * t_drop
    e = 0.5 * trap.mass_kg * np.sum(v * v, axis=1) + trap.potential(p[:, 0], p[:, 1], p[:, 2])
    return e < 0


def _recapture_fractions(trap, T, t_drops, pos_u, vel_u):
    pos, vel = _scale_and_select(trap, T, pos_u, vel_u)
    if len(pos) == 0:
        return np.zeros(len(t_drops)), 0
    return np.array([_recaptured(trap, pos, vel, td).mean() for td in t_drops]), len(pos)


def drop_recapture(
    trap: TrapModel,
    temperature_k: float,
    t_drop,
    trials: int = 100000,
    seed: int = 0,
    threads: int | None = None,
) -> np.ndarray:
    """Recapture probability after free flight for each ``t_drop`` (s).

    Atoms start trapped (Boltzmann at T, E < 0), fly ballistically under
    gravity with the trap off, and count as recaptured if their energy in
    the restored potential is negative. The same samples serve every drop
    time.
    """
    if temperature_k <= 0:
        raise ValueError("temperature must be > 0")
    t_drops = np.atleast_1d(np.asarray(t_drop, dtype=float))
    if np.any(t_drops < 0):
        raise ValueError("drop time must be >= 0")

    def work(bounds):
        lo, hi = bounds
        rng = substream(seed, lo // 65536)
        pos, vel = sample_trapped(trap, temperature_k, hi - lo, rng)
        return np.array([_recaptured(trap, pos, vel, td).sum() for td in t_drops]), len(pos)

    parts = ordered_map(work, chunk_bounds(trials, 65536), threads)
    hits = np.sum([p[0] for p in parts], axis=0)
    kept = sum(p[1] for p in parts)
    return hits / kept


drop_recapture_curve = drop_recapture


@dataclass(frozen=True)
class TemperatureEstimate:
    temperature_k: float
    ci_low_k: float
    ci_high_k: float
    sse: float


def estimate_temperature(
    t_drop,
    recapture,
    trap: TrapModel,
    n_sim: int = 20000,
    seed: int = 0,
    data_trials: int | None = None,
    n_boot: int = 50,
    t_grid_k=None,
) -> TemperatureEstimate:
    """Least-squares temperature from a measured recapture curve.

    Simulated curves share one set of unit-normal samples scaled with
    sqrt(T), which makes the objective smooth in T. A grid search is
    refined with a bounded scalar minimization. The interval comes from a
    parametric bootstrap: binomial resampling of the best-fit curve with
    ``data_trials`` atoms per point (default ``n_sim``), plus resampling of
    the simulated atoms, refitting on a local grid spanning a factor of two
    either side of the estimate.
    """
    t_drop = np.asarray(t_drop, dtype=float)
    y = np.asarray(recapture, dtype=float)
    if len(t_drop) < 4:
        raise ValueError("need at least 4 drop times")
    rng = substream(seed, 0)
    pos_u, vel_u = _unit_samples(rng, n_sim)
    if t_grid_k is None:
        t_grid_k = trap.depth_k * np.geomspace(0.005, 0.5, 60)
    t_grid_k = np.asarray(t_grid_k, dtype=float)

    n_data = data_trials or n_sim

    def fit(data, grid, pu=pos_u, vu=vel_u):
        def curve(T):
            return _recapture_fractions(trap, T, t_drop, pu, vu)[0]

        sse = np.array([np.sum((curve(T) - data) ** 2) for T in grid])
        # changes below one atom per point (hottest, smallest bound sample) are unresolvable
        kept = _scale_and_select(trap, float(np.max(grid)), pu, vu)[0].shape[0]
        floor = len(t_drop) / float(max(1, min(n_data, kept))) ** 2
        if np.ptp(sse) <= floor:
            raise DegenerateFitError(
                "recapture data do not constrain the temperature (flat objective); "
                "use longer drop times"
            )
        k = int(np.argmin(sse))
        lo = grid[max(k - 1, 0)]
        hi = grid[min(k + 1, len(grid) - 1)]
        res = optimize.minimize_scalar(
            lambda T: float(np.sum((curve(T) - data) ** 2)),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-3 * grid[k]},
        )
        best = (res.x, res.fun) if res.fun <= sse[k] else (grid[k], sse[k])
        return float(best[0]), float(best[1])

    T_hat, sse = fit(y, t_grid_k)
    model = _recapture_fractions(trap, T_hat, t_drop, pos_u, vel_u)[0]
    # bootstrap refits only scan the neighbourhood of the estimate
    local = T_hat * np.geomspace(0.5, 2.0, 13)
    brng = substream(seed, 1)
    boots = []
    for _ in range(n_boot):
        fake = brng.binomial(n_data, np.clip(model, 0, 1)) / n_data
        # resampling the simulated atoms carries the model's own Monte Carlo error
        idx = brng.integers(0, n_sim, n_sim)
        try:
            boots.append(fit(fake, local, pos_u[idx], vel_u[idx])[0])
        except DegenerateFitError:
            continue
    if boots:
        lo, hi = np.percentile(boots, [2.5, 97.5])
    else:
        lo = hi = math.nan
    return TemperatureEstimate(T_hat, float(lo), float(hi), sse)
