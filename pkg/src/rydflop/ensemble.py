"""Few-atom Monte Carlo of Rabi flopping with pairwise van der Waals shifts.

Each atom is a two-level system. A trial draws the atom number, positions
and Doppler shifts, gives every pair a shift ``V_ij = C6 D_ij / R_ij^6`` with
``D_ij`` sampled from the eigenmode weights |kappa|^2 for that pair's axis,
and evolves

    H = sum_i [(Omega_R/2) sigma_x^i - delta_i n_i] + sum_{i<j} 2 pi V_ij n_i n_j

(H in rad/s, V in Hz). Rydberg atoms are removed at the end of the pulse,
so the measured signal is the retained fraction ``(1/N) sum_i P_g,i``.

Configurations that put two atoms with ``|V_ij| > cutoff`` in the Rydberg
state are dropped from the basis. Their amplitudes are of order
``Omega_R / V``, but the missing second-order shift ``~Omega_R^2 / V``
dephases the rest, so the error grows as ``Omega_R t (Omega_R / V)``:
about 1e-4 to 1e-3 over 8 us at the default cutoff of 1000 Omega_R.
``cutoff=inf`` is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import TWO_PI
from .mc import TraceResult, ordered_map, substream
from .pulses import DopplerModel, PulseParams
from .vdw import ModeTableCache, VdwModel

__all__ = [
    "CloudGeometry",
    "InteractionRule",
    "EnsembleConfig",
    "EnsembleCapError",
    "NoAtomsError",
    "EvolutionResult",
    "sample_atom_number",
    "sample_atoms",
    "assign_pair_interactions",
    "evolve_ensemble",
    "retention_signal",
]

MIN_SEPARATION_UM = 0.05
HARD_CAP = 12


class EnsembleCapError(ValueError):
    pass


class NoAtomsError(RuntimeError):
    pass


@dataclass(frozen=True)
class CloudGeometry:
    """Position standard deviations in micrometres (x is the long FORT axis)."""

    sigma_x: float = 3.9
    sigma_y: float = 0.43
    sigma_z: float = 0.43

    def __post_init__(self):
        if min(self.sigma_x, self.sigma_y, self.sigma_z) < 0:
            raise ValueError("cloud widths must be >= 0")

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([self.sigma_x, self.sigma_y, self.sigma_z])

    def rms_pair_distance(self) -> float:
        """sqrt(E[R^2]) for two independent atoms."""
        return math.sqrt(2.0 * float(np.sum(self.sigmas**2)))


@dataclass
class InteractionRule:
    """How a pair's D is chosen.

    * ``"kappa"`` - draw from |kappa|^2 for the pair's actual axis.
    * ``"axis_x"`` - draw from |kappa|^2 as if every pair lay along x.
    * ``"fixed"`` - every pair gets ``forced_d``.
    """

    model: VdwModel
    mode: str = "kappa"
    forced_d: float = 0.0
    bin_deg: float = 1.0
    _cache: ModeTableCache | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.mode not in ("kappa", "axis_x", "fixed"):
            raise ValueError(f"unknown interaction rule {self.mode!r}")

    @property
    def c6_hz_um6(self) -> float:
        return self.model.c6_hz_um6

    @property
    def cache(self) -> ModeTableCache:
        if self._cache is None:
            self._cache = ModeTableCache(self.model, self.bin_deg)
        return self._cache

    def warm(self) -> None:
        """Fill the angle table up front so workers only read it."""
        if self.mode != "fixed":
            self.cache.warm()

    def draw(self, axis: np.ndarray, rng: np.random.Generator) -> float:
        if self.mode == "fixed":
            return self.forced_d
        theta = math.pi / 2 if self.mode == "axis_x" else math.acos(max(-1.0, min(1.0, axis[2])))
        d, w = self.cache.get(theta)
        # inverse-cdf draw keeps exactly one uniform per pair
        k = int(np.searchsorted(np.cumsum(w), rng.random() * w.sum(), side="right"))
        return float(d[min(k, len(d) - 1)])


@dataclass
class EnsembleConfig:
    nbar: float
    pulse: PulseParams
    interaction: InteractionRule
    geometry: CloudGeometry = field(default_factory=CloudGeometry)
    doppler: DopplerModel | None = None
    law: str = "poisson"
    trials: int = 2000
    seed: int = 0
    cap: int = HARD_CAP
    cutoff_factor: float = 1000.0  # blockade cutoff in units of Omega_R

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 1 <= self.cap <= HARD_CAP:
            raise EnsembleCapError(f"cap must be in [1, {HARD_CAP}] (state dimension 2^N)")
        if self.law not in ("poisson", "fixed"):
            raise ValueError(f"unknown atom-number law {self.law!r}")
        if self.nbar < 0:
            raise ValueError("mean atom number must be >= 0")

    @property
    def cutoff_rad_s(self) -> float:
        return self.cutoff_factor * self.pulse.omega_r


def sample_atom_number(config: EnsembleConfig, rng: np.random.Generator) -> tuple[int, bool]:
    """Atom number and whether it was clamped to the cap."""
    if config.law == "fixed":
        n = int(round(config.nbar))
    else:
        n = int(rng.poisson(config.nbar))
    if n > config.cap:
        return config.cap, True
    return n, False


def sample_atoms(config: EnsembleConfig, rng: np.random.Generator, n: int | None = None) -> dict:
    """Draw one trial's atoms.

    Returns ``{"n", "truncated", "positions" (um, shape (n, 3)),
    "detunings" (rad/s)}``. Positions are independent normals with the
    cloud widths; detunings are Doppler shifts ``k_eff v``.
    """
    truncated = False
    if n is None:
        n, truncated = sample_atom_number(config, rng)
    pos = rng.standard_normal((n, 3)) * config.geometry.sigmas
    det = (
        config.doppler.sample(rng, n)
        if config.doppler is not None and config.doppler.temperature_k > 0
        else np.zeros(n)
    )
    return {"n": n, "truncated": truncated, "positions": pos, "detunings": np.asarray(det, float)}


def assign_pair_interactions(
    positions: np.ndarray,
    rule: InteractionRule,
    rng: np.random.Generator,
    geometry: CloudGeometry | None = None,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Symmetric pair shift matrix V (Hz), the sampled D matrix and the resample count.

    A pair closer than 50 nm has its second atom redrawn from the cloud
    (``positions`` is updated in place); with no geometry the pair is
    rejected instead.
    """
    pos = positions
    n = len(pos)
    V = np.zeros((n, n))
    D = np.zeros((n, n))
    resampled = 0
    for i in range(n):
        for j in range(i + 1, n):
            d = pos[j] - pos[i]
            r = float(np.linalg.norm(d))
            while r < MIN_SEPARATION_UM:
                if geometry is None or not np.any(geometry.sigmas > 0):
                    raise ValueError("coincident atoms and no cloud to resample from")
                pos[j] = rng.standard_normal(3) * geometry.sigmas
                resampled += 1
                d = pos[j] - pos[i]
                r = float(np.linalg.norm(d))
            dij = rule.draw(d / r, rng)
            D[i, j] = D[j, i] = dij
            V[i, j] = V[j, i] = rule.c6_hz_um6 * dij / r**6
    return V, D, resampled


@dataclass
class EvolutionResult:
    t: np.ndarray
    p_ground: np.ndarray  # (n_atoms, n_t)
    p_count: np.ndarray  # (n_atoms + 1, n_t): P(k atoms Rydberg)
    dim: int

    @property
    def retained_fraction(self) -> np.ndarray:
        return self.p_ground.mean(axis=0)

    @property
    def norm(self) -> np.ndarray:
        return self.p_count.sum(axis=0)


def _components(V: np.ndarray) -> list[np.ndarray]:
    n = len(V)
    seen = np.zeros(n, bool)
    out = []
    for s in range(n):
        if seen[s]:
            continue
        stack, comp = [s], []
        seen[s] = True
        while stack:
            i = stack.pop()
            comp.append(i)
            for j in np.nonzero(V[i] != 0)[0]:
                if not seen[j]:
                    seen[j] = True
                    stack.append(j)
        out.append(np.array(sorted(comp)))
    return out


def _evolve_component(omega, det, V, t, cutoff):
    """Exact evolution of one interacting cluster in its allowed subspace."""
    n = len(det)
    nst = 1 << n
    states = np.arange(nst)
    bits = ((states[:, None] >> np.arange(n)[None, :]) & 1).astype(float)
    Vw = TWO_PI * V
    if math.isfinite(cutoff):
        blocked = np.triu(np.abs(Vw) > cutoff, 1).astype(float)
        allowed = np.einsum("si,ij,sj->s", bits, blocked, bits) == 0
    else:
        allowed = np.ones(nst, bool)
    keep = states[allowed]
    b = bits[allowed]
    dim = len(keep)
    index = -np.ones(nst, dtype=int)
    index[keep] = np.arange(dim)
    diag = -(b @ det) + 0.5 * np.einsum("si,ij,sj->s", b, Vw, b)
    H = np.diag(diag)
    for i in range(n):
        flipped = keep ^ (1 << i)
        tgt = index[flipped]
        ok = tgt >= 0
        H[np.arange(dim)[ok], tgt[ok]] = 0.5 * omega
    w, U = np.linalg.eigh(H)
    # ground state |00..0> is index 0
    amp = U @ (U[0, :, None] * np.exp(-1j * w[:, None] * t[None, :]))
    prob = np.abs(amp) ** 2
    p_ground = (1.0 - b).T @ prob
    counts = b.sum(axis=1).astype(int)
    p_count = np.zeros((n + 1, len(t)))
    np.add.at(p_count, counts, prob)
    return p_ground, p_count, dim


def evolve_ensemble(
    n: int,
    omega_r: float,
    detunings,
    shifts,
    t,
    cutoff: float = math.inf,
    cap: int = HARD_CAP,
) -> EvolutionResult:
    """Evolve N atoms from the all-ground state.

    ``omega_r`` and ``detunings`` in rad/s, ``shifts`` the symmetric pair
    matrix in Hz, ``t`` in s. Atoms that do not interact are evolved as
    independent clusters, and cluster count distributions are convolved.
    ``cutoff`` (rad/s) drops doubly excited pairs shifted beyond it.
    """
    if n > cap:
        raise EnsembleCapError(f"N = {n} exceeds the cap of {cap} atoms (2^N state dimension)")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    det = np.asarray(detunings, dtype=float).reshape(n)
    V = np.asarray(shifts, dtype=float).reshape(n, n)
    p_ground = np.zeros((n, len(t)))
    p_count = np.zeros((1, len(t)))
    p_count[0] = 1.0
    dim = 1
    for comp in _components(V):
        pg, pc, d = _evolve_component(omega_r, det[comp], V[np.ix_(comp, comp)], t, cutoff)
        p_ground[comp] = pg
        # convolve the Rydberg-count distributions of independent clusters
        new = np.zeros((p_count.shape[0] + pc.shape[0] - 1, len(t)))
        for k in range(pc.shape[0]):
            new[k : k + p_count.shape[0]] += pc[k] * p_count
        p_count = new
        dim *= d
    return EvolutionResult(t, p_ground, p_count, dim)


def _trial(config: EnsembleConfig, t: np.ndarray, index: int) -> dict:
    rng = substream(config.seed, index)
    atoms = sample_atoms(config, rng)
    n = atoms["n"]
    out = {"trial": index, "n": n, "truncated": atoms["truncated"], "resampled": 0}
    if n == 0:
        return out
    pos = atoms["positions"]
    if n > 1:
        V, D, res = assign_pair_interactions(pos, config.interaction, rng, config.geometry)
    else:
        V, D, res = np.zeros((1, 1)), np.zeros((1, 1)), 0
    det = atoms["detunings"] + config.pulse.effective_detuning
    ev = evolve_ensemble(n, config.pulse.omega_r, det, V, t, config.cutoff_rad_s, config.cap)
    out.update(
        resampled=res,
        retained=ev.retained_fraction,
        positions=pos,
        d_values=D[np.triu_indices(n, 1)],
        dim=ev.dim,
    )
    return out


def retention_signal(
    config: EnsembleConfig,
    t,
    threads: int | None = None,
    keep_samples: bool = False,
    dump: list | None = None,
) -> TraceResult:
    """Mean retained fraction over trials with N >= 1, normalized at t = 0.

    Trial ``k`` uses substream ``(seed, k)``. ``dump``, if given, receives a
    per-trial audit record (trial, N, positions, sampled D values).
    """
    t = np.asarray(t, dtype=float)
    config.interaction.warm()
    trials = ordered_map(lambda k: _trial(config, t, k), range(config.trials), threads)
    rows = [tr["retained"] for tr in trials if tr["n"] > 0]
    if not rows:
        raise NoAtomsError(
            "every trial had N = 0; increase the mean atom number or the trial count"
        )
    samples = np.vstack(rows)
    norm = samples[:, 0].mean()
    meta = {
        "nbar": config.nbar,
        "trials_total": config.trials,
        "trials_empty": sum(tr["n"] == 0 for tr in trials),
        "trials_truncated": sum(tr["truncated"] for tr in trials),
        "pairs_resampled": sum(tr["resampled"] for tr in trials),
        "max_dim": max(tr.get("dim", 1) for tr in trials),
        "seed": config.seed,
    }
    if dump is not None:
        for tr in trials:
            dump.append({k: tr.get(k) for k in ("trial", "n", "positions", "d_values")})
    res = TraceResult.from_samples(t, samples / norm, meta, keep=keep_samples)
    return res
