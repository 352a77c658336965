"""Command-line entry point: ``rydflop <subcommand> [options]``.

Every run is fixed by the effective configuration (defaults, recipe,
``--config`` file, ``--set`` overrides, in that order) plus the seed. The
effective configuration is echoed next to each output file as
``<out>.config.ini``; feeding it back through ``--config`` reproduces the
output byte for byte.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import hashlib
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    DegenerateFitError,
    FitPreconditionError,
    fit_damped_cosine,
)
from .constants import TWO_PI, ConstantsError, load_constants
from .ensemble import (
    CloudGeometry,
    EnsembleCapError,
    EnsembleConfig,
    InteractionRule,
    NoAtomsError,
    retention_signal,
)
from .levels import (
    ForsterChannel,
    MissingSeriesError,
    QuantumDefectModel,
    SelectionRuleError,
    ZeemanStatePair,
    forster_defect,
    level_energy,
    parse_level,
    zeeman_resonance_shift,
)
from .mc import substream
from .pulses import (
    BeamParams,
    DopplerModel,
    PulseParams,
    default_dipoles,
    double_pulse_curve,
    doppler_averaged_flop,
    rabi_flop,
    rabi_from_beams,
)
from .trapstats import (
    DetectionModel,
    LossModel,
    TrapModel,
    classify_atom_number,
    drop_recapture,
    histogram_counts,
    preselection_experiment,
)
from .vdw import VdwModel, VdwModelError, excited_state_overlaps

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    pass


# section -> key -> (default, help)
DEFAULTS: dict[str, dict[str, tuple[str, str]]] = {
    "constants": {"path": ("", "species constants JSON (empty: $RYDFLOP_CONSTANTS or packaged file)")},
    "levels": {
        "level": ("43d5/2", "initial pair level"),
        "channels": ("45p3/2+41f5/2, 45p3/2+41f7/2", "comma-separated final pairs"),
        "b_field_t": ("1e-3", "bias field for the Zeeman shift (T)"),
        "format": ("text", "text or csv"),
    },
    "vdw": {
        "c6_ghz_um6": ("", "C6 (empty: constants file value; 'radial': computed)"),
        "weighting": ("degenerate", "channel weighting: degenerate or defect"),
        "theta_deg": ("90", "polar angle of the pair axis from z (deg)"),
        "m_j": ("0.5", "laser-excited m_j along z"),
    },
    "pulse": {
        "level": ("43d5/2", "Rydberg level"),
        "p780_uw": ("1.85", "780 nm power (uW)"),
        "p480_mw": ("10.7", "480 nm power (mW)"),
        "w780_um": ("10", "780 nm waist (um)"),
        "w480_um": ("10", "480 nm waist (um)"),
        "delta_ghz": ("-3.4", "intermediate detuning Delta/2pi (GHz)"),
        "omega_r_mhz": ("", "use this Omega_R/2pi (MHz) instead of the beams"),
        "detuning_mhz": ("0", "effective two-photon detuning/2pi (MHz)"),
        "gamma_5p_mhz": ("0", "5p decay rate/2pi for scattering damping (0: off)"),
    },
    "doppler": {
        "temperature_mk": ("1.0", "atom temperature (mK)"),
        "geometry": ("counter", "counter or co propagating beams"),
        "lambda780_nm": ("780", "lower-leg wavelength (nm)"),
        "lambda480_nm": ("480", "upper-leg wavelength (nm)"),
    },
    "grid": {"t_max_us": ("8", "pulse-length grid end (us)"), "n_t": ("161", "grid points")},
    "sequence": {
        "omega_r_mhz": ("0.7", "Omega_R/2pi during the pulses (MHz)"),
        "gap_us": ("2", "gap length (us)"),
        "gap_detuning_mhz": ("", "gap detuning/2pi (MHz; empty: ground light shift)"),
        "t_total_max_us": ("4", "total pulse time grid end (us)"),
        "n_t": ("161", "grid points"),
    },
    "cloud": {
        "nbar": ("1.7", "mean atom number"),
        "law": ("poisson", "poisson or fixed"),
        "sigma_x_um": ("3.9", "cloud rms width along x (um)"),
        "sigma_y_um": ("0.43", "cloud rms width along y (um)"),
        "sigma_z_um": ("0.43", "cloud rms width along z (um)"),
        "cap": ("12", "maximum atoms per trial"),
    },
    "interaction": {
        "rule": ("kappa", "kappa, axis_x or fixed"),
        "forced_d": ("0", "D used by the fixed rule"),
        "bin_deg": ("1", "angle bin of the mode table (deg)"),
        "cutoff_factor": ("1000", "drop doubly excited pairs shifted beyond this many Omega_R"),
    },
    "mc": {
        "seed": ("20070101", "master seed"),
        "trials": ("2000", "ensemble trials"),
        "samples": ("2000", "Doppler samples"),
        "dump": ("false", "write per-trial audit file next to ensemble output"),
    },
    "trap": {
        "depth_mk": ("10", "trap depth (mK)"),
        "waist_um": ("2.7", "trap waist (um)"),
        "wavelength_nm": ("1030", "trap wavelength (nm)"),
        "power_w": ("0.57", "trap power (W, provenance)"),
    },
    "detection": {
        "rate_per_s": ("1e4", "single-atom photoelectron rate (1/s)"),
        "background_per_s": ("0", "background rate (1/s)"),
        "probe_ms": ("12", "probe time (ms)"),
        "duty_factor": ("2.5", "wall time / probe time"),
        "efficiency": ("0.027", "collection efficiency (bookkeeping)"),
    },
    "loss": {
        "lifetime_s": ("3", "background 1/e lifetime (s)"),
        "probe_survival": ("0.88", "single-atom survival per probe"),
        "pair_rate_per_s": ("1000", "light-assisted pair ejection rate (1/s)"),
    },
    "histogram": {"nbar": ("1.0", "mean loaded atoms"), "trials": ("20000", "loads")},
    "preselect": {"nbar": ("1.0", "mean loaded atoms"), "trials": ("20000", "loads")},
    "recapture": {
        "temperature_mk": ("1.0", "temperature (mK)"),
        "drop_us": ("0, 5, 10, 15, 20, 30, 40, 50", "drop times (us)"),
        "trials": ("100000", "sampled atoms"),
    },
    "fit": {
        "input": ("", "trace CSV to fit (or positional argument)"),
        "column": ("", "value column (empty: second column)"),
        "output": ("text", "text or json"),
    },
    "reproduce": {"nbars": ("0.3, 1.7, 8", "mean atom numbers for fig6")},
}

RECIPES = {
    "fig2": {"preselect.nbar": "1.0"},
    "fig3": {"pulse.omega_r_mhz": "0.49", "doppler.temperature_mk": "1.0", "grid.t_max_us": "8"},
    "fig4": {
        "pulse.p780_uw": "3.3",
        "pulse.p480_mw": "9.0",
        "pulse.delta_ghz": "-3.8",
        "pulse.level": "28d5/2",
        "sequence.omega_r_mhz": "0.7",
        "sequence.gap_us": "2",
        "sequence.gap_detuning_mhz": "0.53",
    },
    "fig5": {"vdw.theta_deg": "90"},
    "fig6": {"pulse.omega_r_mhz": "0.49", "doppler.temperature_mk": "1.0", "grid.n_t": "321"},
}


# ---------------------------------------------------------------- config


def _valid_keys(section: str) -> str:
    return ", ".join(sorted(DEFAULTS[section]))


def _apply(cfg: dict, section: str, key: str, value: str, origin: str):
    if section not in DEFAULTS:
        raise ConfigError(
            f"{origin}: unknown section [{section}]; valid sections: {', '.join(sorted(DEFAULTS))}"
        )
    if key not in DEFAULTS[section]:
        raise ConfigError(
            f"{origin}: unknown key {key!r} in [{section}]; valid keys: {_valid_keys(section)}"
        )
    cfg[section][key] = value.strip()


def build_config(path: str | None, overrides: list[str], recipe: dict | None = None) -> dict:
    cfg = {s: {k: v[0] for k, v in keys.items()} for s, keys in DEFAULTS.items()}
    for dotted, val in (recipe or {}).items():
        s, k = dotted.split(".")
        _apply(cfg, s, k, val, "recipe")
    if path:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {p} not found")
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(p.read_text(), source=str(p))
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {p}: {exc}") from exc
        for s in parser.sections():
            for k, v in parser.items(s):
                _apply(cfg, s, k, v, str(p))
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        dotted, val = item.split("=", 1)
        s, k = dotted.split(".", 1)
        _apply(cfg, s.strip(), k.strip(), val, "--set")
    return cfg


def config_text(cfg: dict) -> str:
    out = io.StringIO()
    for s in sorted(cfg):
        out.write(f"[{s}]\n")
        for k in sorted(cfg[s]):
            out.write(f"{k} = {cfg[s][k]}\n")
        out.write("\n")
    return out.getvalue()


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(config_text(cfg).encode()).hexdigest()


class Section:
    """Typed access to one config section with error messages naming the key."""

    def __init__(self, cfg: dict, name: str):
        self.name = name
        self.raw = cfg[name]

    def _get(self, key, conv):
        val = self.raw[key]
        try:
            return conv(val)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{self.name}] {key} = {val!r}: {exc}") from exc

    def float(self, key) -> float:
        return self._get(key, float)

    def int(self, key) -> int:
        return self._get(key, lambda v: int(float(v)) if float(v).is_integer() else int(v))

    def str(self, key) -> str:
        return self.raw[key]

    def opt_float(self, key):
        return None if self.raw[key] == "" else self.float(key)

    def bool(self, key) -> bool:
        v = self.raw[key].lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"[{self.name}] {key} = {v!r} is not a boolean")

    def floats(self, key) -> list[float]:
        return self._get(key, lambda v: [float(x) for x in v.replace(";", ",").split(",") if x.strip()])

    def choice(self, key, options) -> str:
        v = self.raw[key]
        if v not in options:
            raise ConfigError(f"[{self.name}] {key} = {v!r}; choose one of {', '.join(options)}")
        return v


# ---------------------------------------------------------------- model builders


def _consts(cfg):
    return load_constants(Section(cfg, "constants").str("path") or None)


def _mass(consts):
    from .constants import AMU

    return consts["mass_u"] * AMU


def _seed(cfg) -> int:
    return Section(cfg, "mc").int("seed")


def build_pulse(cfg, consts) -> PulseParams:
    sec = Section(cfg, "pulse")
    gamma = TWO_PI * sec.float("gamma_5p_mhz") * 1e6
    detune = TWO_PI * sec.float("detuning_mhz") * 1e6
    delta = TWO_PI * sec.float("delta_ghz") * 1e9
    om = sec.opt_float("omega_r_mhz")
    if om is not None:
        return PulseParams.from_rabi(TWO_PI * om * 1e6, delta, delta2=detune, gamma_5p=gamma)
    level = parse_level(sec.str("level"))
    p = rabi_from_beams(
        BeamParams(sec.float("p780_uw") * 1e-6, sec.float("w780_um"), 780.0),
        BeamParams(sec.float("p480_mw") * 1e-3, sec.float("w480_um"), 480.0),
        delta,
        dipoles=default_dipoles(level, consts),
        level=level,
        gamma_5p=gamma,
    )
    return dataclasses.replace(p, delta2=p.resonance_shift + detune)


def build_doppler(cfg, consts) -> DopplerModel:
    sec = Section(cfg, "doppler")
    return DopplerModel(
        sec.float("temperature_mk") * 1e-3,
        _mass(consts),
        sec.float("lambda780_nm"),
        sec.float("lambda480_nm"),
        sec.choice("geometry", ("counter", "co")) == "counter",
    )


def build_vdw(cfg, consts) -> VdwModel:
    sec = Section(cfg, "vdw")
    qd = QuantumDefectModel.rubidium(consts)
    c6 = sec.str("c6_ghz_um6")
    weighting = sec.choice("weighting", ("degenerate", "defect"))
    if c6 == "radial":
        return VdwModel.build(qd=qd, weighting=weighting)
    c6v = consts["c6_43d52_ghz_um6"] if c6 == "" else sec.float("c6_ghz_um6")
    return VdwModel.build(qd=qd, c6_hz_um6=c6v * 1e9, weighting=weighting)


def time_grid(cfg, section="grid", key="t_max_us") -> np.ndarray:
    sec = Section(cfg, section)
    n = sec.int("n_t")
    if n < 2:
        raise ConfigError(f"[{section}] n_t must be >= 2")
    return np.linspace(0.0, sec.float(key) * 1e-6, n)


def build_trap(cfg, consts) -> TrapModel:
    sec = Section(cfg, "trap")
    return TrapModel(
        sec.float("depth_mk") * 1e-3,
        sec.float("waist_um"),
        sec.float("wavelength_nm"),
        sec.float("power_w"),
        _mass(consts),
    )


def build_detection(cfg) -> DetectionModel:
    sec = Section(cfg, "detection")
    return DetectionModel(
        sec.float("rate_per_s"),
        sec.float("background_per_s"),
        sec.float("probe_ms") * 1e-3,
        sec.float("duty_factor"),
        sec.float("efficiency"),
    )


def build_loss(cfg) -> LossModel:
    sec = Section(cfg, "loss")
    return LossModel(sec.float("lifetime_s"), sec.float("probe_survival"), sec.float("pair_rate_per_s"))


def build_ensemble(cfg, consts, nbar=None) -> EnsembleConfig:
    cl = Section(cfg, "cloud")
    it = Section(cfg, "interaction")
    mc = Section(cfg, "mc")
    rule = InteractionRule(
        build_vdw(cfg, consts),
        it.choice("rule", ("kappa", "axis_x", "fixed")),
        it.float("forced_d"),
        it.float("bin_deg"),
    )
    return EnsembleConfig(
        cl.float("nbar") if nbar is None else nbar,
        build_pulse(cfg, consts),
        rule,
        CloudGeometry(cl.float("sigma_x_um"), cl.float("sigma_y_um"), cl.float("sigma_z_um")),
        build_doppler(cfg, consts),
        cl.choice("law", ("poisson", "fixed")),
        mc.int("trials"),
        mc.int("seed"),
        cl.int("cap"),
        it.float("cutoff_factor"),
    )


# ---------------------------------------------------------------- output


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".12g")
    return str(x)


class Output:
    """CSV/text sink with provenance header and config echo."""

    def __init__(self, out: str | None, cfg: dict, command: str):
        self.path = Path(out) if out else None
        self.cfg = cfg
        self.command = command
        self.buf = io.StringIO()

    def meta(self, **items):
        for k, v in items.items():
            self.buf.write(f"# {k} = {fmt(v)}\n")

    def header(self):
        self.buf.write(f"# rydflop {__version__} {self.command}\n")
        self.buf.write(f"# config_sha256 = {config_hash(self.cfg)}\n")
        self.buf.write(f"# seed = {_seed(self.cfg)}\n")

    def rows(self, columns, rows):
        w = csv.writer(self.buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(x) for x in r])

    def text(self, s: str):
        self.buf.write(s)

    def close(self, extra: dict[str, str] | None = None):
        data = self.buf.getvalue()
        if self.path is None:
            sys.stdout.write(data)
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(data)
        Path(str(self.path) + ".config.ini").write_text(config_text(self.cfg))
        for suffix, content in (extra or {}).items():
            Path(str(self.path) + suffix).write_text(content)


# ---------------------------------------------------------------- subcommands


def cmd_levels(cfg, out: Output, args):
    consts = _consts(cfg)
    sec = Section(cfg, "levels")
    qd = QuantumDefectModel.rubidium(consts)
    init = parse_level(sec.str("level"))
    fmt_kind = sec.choice("format", ("text", "csv"))
    rows = []
    levels = [init]
    chans = []
    for spec in sec.str("channels").split(","):
        if not spec.strip():
            continue
        f1, f2 = (parse_level(x) for x in spec.split("+"))
        levels += [f1, f2]
        chans.append(ForsterChannel((init, init), (f1, f2)))
    seen = []
    for lv in levels:
        if lv not in seen:
            seen.append(lv)
            rows.append(("level", str(lv), qd.n_star(lv), level_energy(lv, qd), ""))
    for ch in chans:
        rows.append(("defect", str(ch), "", "", forster_defect(ch, qd)))
    if init.l > 0:
        pair = ZeemanStatePair(2, 2, consts["ground_g_f"]["f2"], init.l, init.j, 0.5, sec.float("b_field_t"))
        rows.append(("zeeman", f"f=2,m_f=2 -> {init} m_j=1/2", "", "", zeeman_resonance_shift(pair, consts["mu_b_over_h_hz_per_t"])))
    if fmt_kind == "csv":
        out.header()
        out.rows(["kind", "item", "n_star", "energy_hz", "shift_hz"], rows)
        return
    for kind, item, ns, u, sh in rows:
        if kind == "level":
            out.text(f"{item:<10s} n* = {ns:.10f}   U = {u / 1e9:+.6f} GHz\n")
        elif kind == "defect":
            out.text(f"{item:<28s} delta/2pi = {sh / 1e6:+.4f} MHz\n")
        else:
            out.text(f"Zeeman {item}: {sh / 1e6:+.4f} MHz\n")


def cmd_vdw(cfg, out: Output, args):
    consts = _consts(cfg)
    model = build_vdw(cfg, consts)
    sec = Section(cfg, "vdw")
    modes = excited_state_overlaps(model, math.radians(sec.float("theta_deg")), sec.float("m_j"))
    out.header()
    out.meta(c6_hz_um6=model.c6_hz_um6, weighting=model.weighting, sum_kappa_sq=sum(m.weight for m in modes))
    out.rows(
        ["mode", "M", "D_phi", "abs_kappa", "abs_kappa_sq", "symmetric"],
        [(m.index, int(m.M), m.D, abs(m.kappa), m.weight, m.symmetric) for m in modes],
    )


def _trace_rows(t, value, err, n=None):
    for i in range(len(t)):
        row = [t[i] * 1e6, value[i], err[i]]
        if n is not None:
            row.append(n)
        yield row


def cmd_rabi(cfg, out: Output, args, fit_meta=False):
    consts = _consts(cfg)
    p = build_pulse(cfg, consts)
    dop = build_doppler(cfg, consts)
    t = time_grid(cfg)
    mc = Section(cfg, "mc")
    if dop.temperature_k > 0:
        tr = doppler_averaged_flop(p, dop, t, mc.int("samples"), mc.int("seed"), args.threads)
        value, err = tr.value, tr.stderr
    else:
        value = rabi_flop(p, t)[0]
        err = np.zeros_like(t)
    out.header()
    out.meta(
        omega_r_hz=p.omega_r / TWO_PI,
        ground_light_shift_hz=p.ground_light_shift / TWO_PI,
        doppler_sigma_hz=dop.sigma_detuning / TWO_PI,
    )
    if fit_meta:
        fit = fit_damped_cosine(t, value)
        out.meta(fit_omega_hz=fit.omega_hz, fit_tau_us=fit.tau * 1e6, fit_a=fit.a)
    out.rows(["t_us", "P_ground_mean", "P_ground_stderr"], _trace_rows(t, value, err))


def cmd_double_pulse(cfg, out: Output, args):
    consts = _consts(cfg)
    p = build_pulse(cfg, consts)
    sq = Section(cfg, "sequence")
    t = time_grid(cfg, "sequence", "t_total_max_us")
    gd = sq.opt_float("gap_detuning_mhz")
    gap_det = p.ground_light_shift if gd is None else TWO_PI * gd * 1e6
    om = TWO_PI * sq.float("omega_r_mhz") * 1e6
    pr = double_pulse_curve(p, t, sq.float("gap_us") * 1e-6, gap_det, om)
    out.header()
    out.meta(omega_r_hz=om / TWO_PI, gap_detuning_hz=gap_det / TWO_PI, max_P_rydberg=pr.max())
    out.rows(["t_us", "P_rydberg", "stderr"], _trace_rows(t, pr, np.zeros_like(pr)))


def _ensemble_trace(cfg, consts, args, nbar=None, dump=None):
    ec = build_ensemble(cfg, consts, nbar)
    return retention_signal(ec, time_grid(cfg), threads=args.threads, dump=dump)


def _dump_text(dump) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trial", "N", "positions_um", "D_values"])
    for d in dump:
        pos = "" if d["positions"] is None else ";".join(
            " ".join(fmt(v) for v in p) for p in d["positions"]
        )
        dv = "" if d["d_values"] is None else ";".join(fmt(v) for v in d["d_values"])
        w.writerow([d["trial"], d["n"], pos, dv])
    return buf.getvalue()


def cmd_ensemble(cfg, out: Output, args):
    consts = _consts(cfg)
    want_dump = Section(cfg, "mc").bool("dump")
    dump = [] if want_dump else None
    tr = _ensemble_trace(cfg, consts, args, dump=dump)
    out.header()
    out.meta(**{k: v for k, v in tr.meta.items() if k != "seed"})
    out.rows(["t_us", "signal", "stderr", "n_trials"], _trace_rows(tr.t, tr.value, tr.stderr, tr.n_trials))
    return {".trials.csv": _dump_text(dump)} if want_dump else None


def cmd_histogram(cfg, out: Output, args):
    det = build_detection(cfg)
    sec = Section(cfg, "histogram")
    rng = substream(_seed(cfg), 0)
    n = rng.poisson(sec.float("nbar"), sec.int("trials"))
    counts = histogram_counts(n, det, rng)
    out.header()
    out.meta(single_atom_mean=det.single_atom_mean)
    top = int(counts.max()) if len(counts) else 0
    occ = np.bincount(counts, minlength=top + 1)
    cls = classify_atom_number(np.arange(top + 1), det)
    out.rows(["count", "occurrences", "class"], [(c, occ[c], cls[c]) for c in range(top + 1)])


def cmd_preselect(cfg, out: Output, args):
    det = build_detection(cfg)
    loss = build_loss(cfg)
    sec = Section(cfg, "preselect")
    res = preselection_experiment(sec.float("nbar"), det, loss, sec.int("trials"), _seed(cfg), threads=args.threads)
    out.header()
    out.meta(P_second1_given_first1=res.retention, P_second2plus_given_first2plus=res.conditional_at_least(2))
    rows = []
    for i in range(res.n_max + 1):
        for j in range(res.n_max + 1):
            if res.joint[i, j]:
                rows.append((i, j, res.joint[i, j]))
    out.rows(["first_class", "second_class", "trials"], rows)


def cmd_drop(cfg, out: Output, args):
    consts = _consts(cfg)
    trap = build_trap(cfg, consts)
    sec = Section(cfg, "recapture")
    td = np.array(sec.floats("drop_us")) * 1e-6
    n = sec.int("trials")
    rec = drop_recapture(trap, sec.float("temperature_mk") * 1e-3, td, n, _seed(cfg), args.threads)
    err = np.sqrt(rec * (1 - rec) / n)
    out.header()
    out.meta(radial_hz=trap.radial_frequency_hz, axial_hz=trap.axial_frequency_hz)
    out.rows(["t_drop_us", "recapture", "stderr"], _trace_rows(td, rec, err))


def read_trace(path: str, column: str = ""):
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"trace file {p} not found")
    lines = [ln for ln in p.read_text().splitlines() if ln and not ln.startswith("#")]
    rows = list(csv.reader(lines))
    head, data = rows[0], np.array(rows[1:], dtype=float)
    if "t_us" not in head:
        raise ConfigError(f"{p}: no t_us column (columns: {', '.join(head)})")
    it = head.index("t_us")
    iv = head.index(column) if column else (1 if it == 0 else 0)
    if column and column not in head:
        raise ConfigError(f"{p}: no column {column!r} (columns: {', '.join(head)})")
    sigma = None
    if iv + 1 < len(head) and "err" in head[iv + 1]:
        s = data[:, iv + 1]
        if np.all(s > 0):
            sigma = s
    return data[:, it] * 1e-6, data[:, iv], sigma


def cmd_fit(cfg, out: Output, args):
    sec = Section(cfg, "fit")
    path = args.input or sec.str("input")
    if not path:
        raise ConfigError("fit needs an input trace (positional argument or [fit] input)")
    t, y, sigma = read_trace(path, sec.str("column"))
    res = fit_damped_cosine(t, y, sigma)
    kind = sec.choice("output", ("text", "json"))
    if kind == "json":
        out.text(json.dumps(res.as_dict(), indent=2, sort_keys=True) + "\n")
    else:
        out.text(
            f"a       = {res.a:.6g} +/- {res.a_err:.2g}\n"
            f"tau     = {res.tau * 1e6:.6g} +/- {res.tau_err * 1e6:.2g} us\n"
            f"Omega   = 2pi x {res.omega_hz / 1e6:.6g} +/- {res.omega_err / TWO_PI / 1e6:.2g} MHz\n"
            f"rms     = {res.rms:.3g}\n"
            f"converged = {fmt(res.converged)}, degenerate = {fmt(res.degenerate)}\n"
        )
    if res.degenerate:
        out.close()
        raise DegenerateFitError("fit is degenerate: the oscillation amplitude is not resolved")


def cmd_reproduce(cfg, out: Output, args):
    fig = args.figure
    if fig == "fig2":
        return cmd_preselect(cfg, out, args)
    if fig == "fig3":
        return cmd_rabi(cfg, out, args, fit_meta=True)
    if fig == "fig4":
        return cmd_double_pulse(cfg, out, args)
    if fig == "fig5":
        return cmd_vdw(cfg, out, args)
    consts = _consts(cfg)
    out.header()
    rows = []
    for nbar in Section(cfg, "reproduce").floats("nbars"):
        tr = _ensemble_trace(cfg, consts, args, nbar)
        out.meta(**{f"nbar_{fmt(nbar)}_truncated": tr.meta["trials_truncated"]})
        rows += [(nbar, *r) for r in _trace_rows(tr.t, tr.value, tr.stderr, tr.n_trials)]
    out.rows(["nbar", "t_us", "signal", "stderr", "n_trials"], rows)


def cmd_angular(cfg, out: Output, args):
    from . import angular

    v = [float(x) for x in args.values]
    if len(v) == 6 and args.six_j:
        out.text(f"{angular.wigner_6j(*v)!r}\n")
    elif len(v) == 6:
        out.text(f"{angular.clebsch_gordan(*v)!r}\n")
    else:
        raise ConfigError("angular expects six numbers: j1 m1 j2 m2 J M (or six 6j arguments)")


COMMANDS = {
    "levels": (cmd_levels, "quantum-defect energies, Foerster defects, Zeeman shift"),
    "vdw-spectrum": (cmd_vdw, "van der Waals eigenvalues and overlaps (CSV)"),
    "rabi": (cmd_rabi, "single-atom (Doppler-averaged) Rabi flopping trace"),
    "double-pulse": (cmd_double_pulse, "double-pulse sequence versus total pulse time"),
    "ensemble": (cmd_ensemble, "multi-atom retention signal"),
    "histogram": (cmd_histogram, "photoelectron count histogram"),
    "preselect": (cmd_preselect, "two-probe preselection joint table"),
    "drop-recapture": (cmd_drop, "recapture probability versus drop time"),
    "fit": (cmd_fit, "damped-cosine fit of a trace CSV"),
    "reproduce": (cmd_reproduce, "figure recipes: fig2 fig3 fig4 fig5 fig6"),
}


def _defaults_help() -> str:
    lines = ["configuration sections (defaults):"]
    for s, keys in DEFAULTS.items():
        lines.append(f"  [{s}]")
        for k, (d, h) in keys.items():
            lines.append(f"    {k} = {d or '(empty)'}    # {h}")
    lines.append("")
    lines.append("exit codes: 0 success, 2 configuration error, 3 numerical or degenerate result")
    return "\n".join(lines)


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--seed", type=int, help="master seed (overrides [mc] seed)")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
    common.add_argument("--out", help="output file (default: stdout); a .config.ini echo is written beside it")
    common.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    parser = argparse.ArgumentParser(
        prog="rydflop",
        description="Rydberg Rabi flopping simulator",
        epilog=_defaults_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"rydflop {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (_, helptext) in COMMANDS.items():
        sp = sub.add_parser(name, parents=[common], help=helptext, description=helptext,
                            epilog=_defaults_help(), formatter_class=argparse.RawDescriptionHelpFormatter)
        if name == "reproduce":
            sp.add_argument("figure", choices=["fig2", "fig3", "fig4", "fig5", "fig6"])
        if name == "fit":
            sp.add_argument("input", nargs="?", help="trace CSV")
    ang = sub.add_parser("angular", parents=[common])
    ang.add_argument("values", nargs="+")
    ang.add_argument("--6j", dest="six_j", action="store_true")
    return parser


def run(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        recipe = RECIPES.get(getattr(args, "figure", None)) if args.command == "reproduce" else None
        overrides = list(args.set)
        if args.seed is not None:
            overrides.append(f"mc.seed={args.seed}")
        cfg = build_config(args.config, overrides, recipe)
        out = Output(args.out, cfg, args.command + (f" {args.figure}" if args.command == "reproduce" else ""))
        fn = cmd_angular if args.command == "angular" else COMMANDS[args.command][0]
        extra = fn(cfg, out, args)
        out.close(extra)
        return EXIT_OK
    except (ConfigError, ConstantsError, MissingSeriesError, SelectionRuleError) as exc:
        print(f"rydflop: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DegenerateFitError, FitPreconditionError, NoAtomsError, EnsembleCapError,
            VdwModelError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"rydflop: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"rydflop: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
