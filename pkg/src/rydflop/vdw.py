"""Second-order van der Waals operator for two Zeeman-degenerate Rydberg atoms.

The two-atom basis is ``|m1> (x) |m2>`` (numpy ``kron`` order, descending m)
with the quantization axis along the interatomic axis. Dipole-dipole coupling
to an intermediate pair channel is written with spherical components,

    V = (-2 d1_0 d2_0 - d1_+ d2_- - d1_- d2_+) / (4 pi eps0 R^3),

and the Foerster channels are eliminated in second order,
``H = -sum_c V_c V_c^dagger / (h delta_c) = (C6 / R^6) * D``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np

from . import angular
from .constants import A0, E_CHARGE, EPS0, H, load_constants
from .levels import (
    ForsterChannel,
    QuantumDefectModel,
    RydbergLevel,
    forster_defect,
    parse_level,
    radial_matrix_element,
)

__all__ = [
    "VdwChannel",
    "VdwModel",
    "PairEigenmode",
    "PairGeometry",
    "VdwModelError",
    "reduced_angular_factor",
    "single_atom_dipole",
    "dipole_dipole_block",
    "coupling_matrix",
    "effective_vdw_operator",
    "vdw_hamiltonian",
    "pair_projection_operator",
    "swap_operator",
    "excited_state_overlaps",
    "pair_interaction_strength",
    "mode_distribution",
    "ModeTableCache",
]

# weights of (q1, q2=-q1) in the dipole-dipole operator along the pair axis
_DD_WEIGHTS = {0: -2.0, 1: -1.0, -1: -1.0}


class VdwModelError(ValueError):
    pass


def reduced_angular_factor(a: RydbergLevel, b: RydbergLevel) -> float:
    """``<l_b j_b || C^1 || l_a j_a>`` (Edmonds convention, s = 1/2)."""
    la, lb, ja, jb = a.l, b.l, a.j, b.j
    l_part = (
        (-1) ** lb
        * math.sqrt((2 * la + 1) * (2 * lb + 1))
        * angular.wigner_3j(lb, 1, la, 0, 0, 0)
    )
    phase = -1 if int(round(lb + 0.5 + ja + 1)) % 2 else 1
    return (
        phase
        * math.sqrt((2 * ja + 1) * (2 * jb + 1))
        * angular.wigner_6j(lb, jb, 0.5, ja, la, 1)
        * l_part
    )


def single_atom_dipole(a: RydbergLevel, b: RydbergLevel, q: int) -> np.ndarray:
    """Angular part of ``<b m_b| r_q/r |a m_a>``, shape (2jb+1, 2ja+1)."""
    return (
        angular.dipole_component_matrix(a.j, b.j, q)
        * reduced_angular_factor(a, b)
        / math.sqrt(2 * b.j + 1)
    )


def _pair_block(init: RydbergLevel, fin1: RydbergLevel, fin2: RydbergLevel) -> np.ndarray:
    # rows: |fin1 m1', fin2 m2'>, cols: |init m1, init m2>
    out = 0.0
    for q, w in _DD_WEIGHTS.items():
        out = out + w * np.kron(single_atom_dipole(init, fin1, q), single_atom_dipole(init, fin2, -q))
    return out


def dipole_dipole_block(channel: ForsterChannel) -> np.ndarray:
    """Coupling ``<dd|V|c>`` from the initial pair into a Foerster channel.

    Shape ``(dim_initial, dim_channel)``; the channel columns hold both atom
    orderings (``|f1 f2>`` then ``|f2 f1>``) when the final levels differ.
    Units are ``R_1 R_2 e^2 / (4 pi eps0 R^3)`` (radial factors excluded).
    """
    i1, i2 = channel.initial
    if i1 != i2:
        raise VdwModelError("only identical initial levels are supported")
    f1, f2 = channel.final
    blocks = [_pair_block(i1, f1, f2)]
    if f1 != f2:
        blocks.append(_pair_block(i1, f2, f1))
    dim_i = int(round(2 * i1.j + 1)) ** 2
    out = np.vstack(blocks).T
    if out.shape[0] != dim_i:
        raise VdwModelError(f"inconsistent block dimension {out.shape} for {channel}")
    return out


def coupling_matrix(channel: ForsterChannel) -> np.ndarray:
    """Full dipole-dipole operator on ``initial (+) channel`` (Hermitian)."""
    b = dipole_dipole_block(channel)
    ni, nc = b.shape
    out = np.zeros((ni + nc, ni + nc))
    out[:ni, ni:] = b
    out[ni:, :ni] = b.T
    return out


@dataclass(frozen=True)
class VdwChannel:
    channel: ForsterChannel
    radial: tuple[float, float]  # |<i|r|f1>|, |<i|r|f2>| in a0
    defect_hz: float


@dataclass
class VdwModel:
    """Second-order model of one Zeeman-degenerate pair level.

    ``weighting`` selects how the channels combine:

    * ``"degenerate"`` - every channel uses the reference defect, i.e. the
      fine-structure partners of a channel are treated as one degenerate
      manifold. This is the convention behind the published D values.
    * ``"defect"`` - each channel is weighted by ``delta_ref / delta_c``.
    """

    level: RydbergLevel
    channels: list[VdwChannel]
    c6_hz_um6: float
    reference: int = 0
    weighting: str = "degenerate"
    c6_source: str = "radial"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not self.channels:
            raise VdwModelError("at least one channel is required")
        for ch in self.channels:
            if ch.defect_hz == 0.0:
                raise VdwModelError(
                    f"channel {ch.channel} is exactly resonant; the resonant 1/R^3 "
                    "regime is outside this second-order model"
                )
        if self.weighting not in ("degenerate", "defect"):
            raise VdwModelError(f"unknown weighting {self.weighting!r}")
        if not self.c6_hz_um6 > 0:
            raise VdwModelError("C6 must be positive (the sign lives in D)")

    @property
    def reference_defect_hz(self) -> float:
        return self.channels[self.reference].defect_hz

    @property
    def dim(self) -> int:
        return int(round(2 * self.level.j + 1)) ** 2

    @classmethod
    def build(
        cls,
        level: RydbergLevel | str = "43d5/2",
        finals=(("45p3/2", "41f5/2"), ("45p3/2", "41f7/2")),
        qd: QuantumDefectModel | None = None,
        c6_hz_um6: float | None = None,
        weighting: str = "degenerate",
    ) -> "VdwModel":
        """Model for ``level + level -> final pairs``; first channel is the reference.

        ``c6_hz_um6=None`` computes C6 from the semiclassical radial integrals
        and the reference defect.
        """
        if isinstance(level, str):
            level = parse_level(level)
        qd = qd or QuantumDefectModel.rubidium()
        chans = []
        for f1, f2 in finals:
            f1 = parse_level(f1) if isinstance(f1, str) else f1
            f2 = parse_level(f2) if isinstance(f2, str) else f2
            fc = ForsterChannel((level, level), (f1, f2))
            rad = (radial_matrix_element(level, f1, qd), radial_matrix_element(level, f2, qd))
            chans.append(VdwChannel(fc, rad, forster_defect(fc, qd)))
        source = "config"
        if c6_hz_um6 is None:
            c6_hz_um6 = c6_from_radials(chans[0].radial, chans[0].defect_hz)
            source = "radial"
        return cls(level, chans, float(c6_hz_um6), weighting=weighting, c6_source=source)

    @classmethod
    def rb43d(cls, weighting: str = "degenerate", consts: dict | None = None) -> "VdwModel":
        """43d5/2 model with the quoted C6 (450 GHz um^6) as a direct input."""
        consts = consts or load_constants()
        return cls.build(c6_hz_um6=consts["c6_43d52_ghz_um6"] * 1e9, weighting=weighting)


def c6_from_radials(radial: tuple[float, float], defect_hz: float) -> float:
    """``(e^2 R1 R2 / 4 pi eps0)^2 / (h |delta|)``, expressed in Hz um^6."""
    num = E_CHARGE**2 * radial[0] * A0 * radial[1] * A0 / (4 * math.pi * EPS0)  # J m^3
    return num**2 / (H * abs(defect_hz)) / H * 1e36


def effective_vdw_operator(model: VdwModel) -> np.ndarray:
    """Dimensionless operator D with ``H_vdw(R) = C6 * D / R^6``.

    Built as ``-sum_c w_c B_c B_c^T`` where ``B_c`` is the angular coupling
    block of channel c; the sign comes from the defects, so with negative
    defects D is positive semi-definite.
    """
    key = ("D",)
    if key in model._cache:
        return model._cache[key]
    ref = model.channels[model.reference]
    rref = ref.radial[0] * ref.radial[1]
    out = np.zeros((model.dim, model.dim))
    for ch in model.channels:
        b = dipole_dipole_block(ch.channel)
        radial_w = (ch.radial[0] * ch.radial[1] / rref) ** 2
        defect = ch.defect_hz if model.weighting == "defect" else ref.defect_hz
        w = -abs(ref.defect_hz) / defect * radial_w
        out += w * (b @ b.T)
    out = 0.5 * (out + out.T)
    model._cache[key] = out
    return out


def vdw_hamiltonian(model: VdwModel, r_um: float) -> np.ndarray:
    """``C6 * D / R^6`` in Hz for separation ``r_um`` (micrometres)."""
    if r_um <= 0:
        raise ValueError("R must be positive")
    return model.c6_hz_um6 / r_um**6 * effective_vdw_operator(model)


def _m_grid(j: float) -> np.ndarray:
    m = angular.m_values(j)
    return np.add.outer(m, m).ravel()


def pair_projection_operator(j: float) -> np.ndarray:
    """Diagonal of the two-atom axis projection M = m1 + m2."""
    return np.diag(_m_grid(j))


def swap_operator(j: float) -> np.ndarray:
    n = int(round(2 * j + 1))
    p = np.zeros((n * n, n * n))
    for a in range(n):
        for b in range(n):
            p[b * n + a, a * n + b] = 1.0
    return p


def _sector_bases(j: float):
    """Orthonormal bases for each (M, exchange-symmetric?) sector."""
    n = int(round(2 * j + 1))
    m = angular.m_values(j)
    sectors = {}
    for a in range(n):
        for b in range(a, n):
            M = m[a] + m[b]
            if a == b:
                v = np.zeros(n * n)
                v[a * n + a] = 1.0
                sectors.setdefault((M, True), []).append(v)
                continue
            for sym in (True, False):
                v = np.zeros(n * n)
                v[a * n + b] = 1.0 / math.sqrt(2)
                v[b * n + a] = (1.0 if sym else -1.0) / math.sqrt(2)
                sectors.setdefault((M, sym), []).append(v)
    return {k: np.array(v).T for k, v in sectors.items()}


@dataclass(frozen=True)
class PairEigenmode:
    index: int
    M: float
    D: float
    symmetric: bool
    eigenvector: np.ndarray = field(repr=False)
    kappa: complex

    @property
    def weight(self) -> float:
        return abs(self.kappa) ** 2


def excited_state(model: VdwModel, theta: float = math.pi / 2, m_j: float = 0.5) -> np.ndarray:
    """Laser-excited pair ``|m_j>|m_j>`` (z quantized) in the frame of the pair axis.

    ``theta`` is the polar angle of the interatomic axis from z; pi/2 puts the
    axis along x. Amplitudes are ``<j m'|R_y(theta)^dagger|j m_j>``.
    """
    j = model.level.j
    d = angular.wigner_d_matrix(angular.RotationSpec(theta, angular.AngularMomentum.of(j)))
    i = int(round(j - m_j))
    single = d[i, :]  # d^j_{m_j, m'}(theta)
    return np.kron(single, single)


def excited_state_overlaps(
    model: VdwModel, theta: float = math.pi / 2, m_j: float = 0.5
) -> list[PairEigenmode]:
    """All eigenmodes of D with overlaps kappa = <phi|excited pair>.

    Diagonalization is done per (M, exchange symmetry) sector so every mode
    carries a definite M and symmetry. Sorted by M, then |D|, symmetric first
    on ties.
    """
    D = effective_vdw_operator(model)
    psi = excited_state(model, theta, m_j)
    rows = []
    for (M, sym), basis in _sector_bases(model.level.j).items():
        vals, vecs = np.linalg.eigh(basis.T @ D @ basis)
        for k in range(len(vals)):
            v = basis @ vecs[:, k]
            # fix the global sign so output is reproducible
            piv = np.argmax(np.abs(v))
            if v[piv] < 0:
                v = -v
            rows.append((M, abs(vals[k]), not sym, vals[k], sym, v))
    rows.sort(key=lambda r: (r[0], round(r[1], 12), r[2]))
    modes = []
    for idx, (M, _, _, val, sym, v) in enumerate(rows):
        modes.append(PairEigenmode(idx, float(M), float(val), bool(sym), v, complex(v @ psi)))
    return modes


@dataclass(frozen=True)
class PairGeometry:
    r_um: float
    axis: tuple[float, float, float] = (1.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.r_um > 0:
            raise ValueError("R must be > 0")
        n = math.sqrt(sum(a * a for a in self.axis))
        object.__setattr__(self, "axis", tuple(a / n for a in self.axis))

    @property
    def polar_angle(self) -> float:
        return math.acos(max(-1.0, min(1.0, self.axis[2])))


def pair_interaction_strength(model_or_c6, D: float, geometry: PairGeometry | float) -> float:
    """Pair shift ``C6 * D / R^6`` in Hz (C6 in Hz um^6, R in um)."""
    c6 = model_or_c6.c6_hz_um6 if isinstance(model_or_c6, VdwModel) else float(model_or_c6)
    r = geometry.r_um if isinstance(geometry, PairGeometry) else float(geometry)
    if r <= 0:
        raise ValueError("R must be > 0")
    return c6 * D / r**6


def mode_distribution(model: VdwModel, theta: float) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues D and weights |kappa|^2 (summing to 1) for a pair axis at ``theta``."""
    modes = excited_state_overlaps(model, theta)
    d = np.array([m.D for m in modes])
    w = np.array([m.weight for m in modes])
    return d, w / w.sum()


class ModeTableCache:
    """Mode distributions keyed by the pair polar angle in 1 degree bins.

    Bins use ``min(theta, pi - theta)``; the distribution is symmetric under
    reversing the axis. Thread-safe; contents never change results because
    every bin is computed at its centre angle.
    """

    def __init__(self, model: VdwModel, bin_deg: float = 1.0):
        self.model = model
        self.bin_deg = bin_deg
        self._table: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._lock = threading.Lock()

    def bin_of(self, theta: float) -> int:
        # rounding keeps mirrored axes in the same bin at bin edges
        deg = round(math.degrees(min(theta, math.pi - theta)), 9)
        nbins = int(math.ceil(90.0 / self.bin_deg))
        return min(int(deg // self.bin_deg), nbins - 1)

    def centre(self, b: int) -> float:
        return math.radians((b + 0.5) * self.bin_deg)

    def get(self, theta: float) -> tuple[np.ndarray, np.ndarray]:
        b = self.bin_of(theta)
        table = self._table.get(b)
        if table is None:
            table = mode_distribution(self.model, self.centre(b))
            with self._lock:
                self._table.setdefault(b, table)
                table = self._table[b]
        return table

    def warm(self) -> None:
        for b in range(int(math.ceil(90 / self.bin_deg))):
            self.get(self.centre(b))
