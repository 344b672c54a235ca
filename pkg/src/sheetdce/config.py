"""Key-value run configuration (INI syntax, read with configparser).

Example::

    [cavity]
    Lx = 0.05          ; m
    Ly = 0.05          ; m
    Lz = 0.10          ; m
    eta = 0.5          ; sheet position d / Lz
    mx = 1
    my = 1

    [pulse]
    vmax_lz = 5000     ; peak V * Lz (dimensionless); 100 per uJ/pulse
    period_ps = 105
    t_e_ps = 35
    t_c_ps = 7
    sigma1_ps = 4
    sigma2_ps = 8
    n_pulses = 11

    [evolve]
    polarization = TE
    ell_max = 51
    step_ps = 0.01
    sample_ps = 1.0
    single_mode = off  ; off | zero_coupling | truncate
    integrator = rk4   ; rk4 | adaptive
    propagation = floquet
    unitarity_abort = 1e-2
    report_modes = 5   ; N_1..N_k written to the trajectory CSV

    [spectrum]
    polarizations = TE, TM
    vmax_lz = 5000, 1
    ell_max = 5
    n_samples = 2000

    [sweep]
    polarizations = TE
    periods_ps = 98:122:0.5   ; start:stop:step (inclusive) or a comma list
    etas = 0.5
    vmax_lz = 5000
    modes = multi, single     ; for the period sweep
    refine = golden           ; golden | none (position sweep optimum T)
    refine_tol_ps = 0.05
    workers = 1

Every key is optional; omitted keys take the defaults above.
"""
from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .core import CavityGeometry, Polarization
from .evolution import EvolutionConfig
from .pulse import PulseProfile

_SINGLE_MODE = {"off": None, "none": None, "false": None, "no": None,
                "zero_coupling": "zero_coupling", "on": "zero_coupling", "true": "zero_coupling",
                "yes": "zero_coupling", "truncate": "truncate"}


class ConfigError(ValueError):
    pass


def parse_grid(text: str) -> list[float]:
    """``"a:b:s"`` (inclusive of b within rounding) or ``"x, y, z"``."""
    text = text.strip()
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
            raise ConfigError(f"bad range {text!r}; expected start:stop:step")
        n = int(np.floor((parts[1] - parts[0]) / parts[2] + 1e-9)) + 1
        return [round(parts[0] + i * parts[2], 10) for i in range(n)]
    vals = [float(p) for p in text.replace(";", ",").split(",") if p.strip()]
    if not vals:
        raise ConfigError("empty grid")
    return vals


def _list(text: str) -> list[str]:
    return [p.strip() for p in text.split(",") if p.strip()]


@dataclass(frozen=True)
class SweepGrid:
    polarizations: tuple = ("TE",)
    periods_ps: tuple = tuple(parse_grid("98:122:0.5"))
    etas: tuple = (0.5,)
    vmax_lz: tuple = (5000.0,)
    modes: tuple = ("multi", "single")
    refine: str = "golden"
    refine_tol_ps: float = 0.05
    workers: int = 1

    def __post_init__(self) -> None:
        for name in ("polarizations", "periods_ps", "etas", "vmax_lz", "modes"):
            if not getattr(self, name):
                raise ConfigError(f"sweep grid {name} is empty")
        if any(not 0 < e < 1 for e in self.etas):
            raise ConfigError("sweep etas must lie in (0, 1)")
        if any(T <= 0 for T in self.periods_ps):
            raise ConfigError("sweep periods must be positive")
        if any(v < 0 for v in self.vmax_lz):
            raise ConfigError("sweep vmax_lz must be non-negative")
        if set(self.modes) - {"multi", "single"}:
            raise ConfigError(f"unknown sweep modes {self.modes!r}")
        if self.refine not in ("golden", "none"):
            raise ConfigError(f"unknown refine {self.refine!r}")
        for p in self.polarizations:
            Polarization.parse(p)


@dataclass(frozen=True)
class SpectrumGrid:
    polarizations: tuple = ("TE", "TM")
    vmax_lz: tuple = (5000.0, 1.0)
    ell_max: int = 5
    n_samples: int = 2000


@dataclass(frozen=True)
class RunConfig:
    evolution: EvolutionConfig
    spectrum: SpectrumGrid = field(default_factory=SpectrumGrid)
    sweep: SweepGrid = field(default_factory=SweepGrid)
    report_modes: int = 5

    def as_dict(self) -> dict:
        ev = self.evolution
        return {
            "cavity": asdict(ev.geometry) | {"mx": ev.mx, "my": ev.my},
            "pulse": asdict(ev.profile),
            "evolve": {
                "polarization": ev.pol.value, "ell_max": ev.ell_max, "step_ps": ev.step_ps,
                "sample_ps": ev.sample_ps, "single_mode": ev.single_mode or "off",
                "integrator": ev.integrator, "propagation": ev.propagation,
                "unitarity_abort": ev.unitarity_abort, "rtol": ev.rtol, "atol": ev.atol,
                "report_modes": self.report_modes,
            },
            "spectrum": asdict(self.spectrum),
            "sweep": asdict(self.sweep),
        }

    def hash(self) -> str:
        """Short sha256 of the fully resolved configuration."""
        blob = json.dumps(self.as_dict(), sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _get(section, key, conv, default):
    if section is None or key not in section:
        return default
    raw = section[key].split(";")[0].split("#")[0].strip()
    try:
        return conv(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section.name}] {key} = {raw!r}: {exc}") from None


def _known(parser, allowed):
    for sec in parser.sections():
        if sec not in allowed:
            raise ConfigError(f"unknown section [{sec}]")
        extra = set(parser[sec]) - allowed[sec]
        if extra:
            raise ConfigError(f"unknown keys in [{sec}]: {', '.join(sorted(extra))}")


_ALLOWED = {
    "cavity": {"lx", "ly", "lz", "eta", "mx", "my"},
    "pulse": {"vmax_lz", "period_ps", "t_e_ps", "t_c_ps", "sigma1_ps", "sigma2_ps", "n_pulses"},
    "evolve": {"polarization", "ell_max", "step_ps", "sample_ps", "single_mode", "integrator",
               "propagation", "unitarity_abort", "rtol", "atol", "report_modes"},
    "spectrum": {"polarizations", "vmax_lz", "ell_max", "n_samples"},
    "sweep": {"polarizations", "periods_ps", "etas", "vmax_lz", "modes", "refine",
              "refine_tol_ps", "workers"},
}


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    _known(parser, _ALLOWED)
    sec = {name: (parser[name] if parser.has_section(name) else None) for name in _ALLOWED}

    g0, p0 = CavityGeometry(), PulseProfile(5000.0)
    c = sec["cavity"]
    p = sec["pulse"]
    e = sec["evolve"]
    try:
        geom = CavityGeometry(
            _get(c, "lx", float, g0.Lx), _get(c, "ly", float, g0.Ly),
            _get(c, "lz", float, g0.Lz), _get(c, "eta", float, g0.eta))
        profile = PulseProfile(
            vmax_lz=_get(p, "vmax_lz", float, p0.vmax_lz),
            period=_get(p, "period_ps", float, p0.period),
            t_e=_get(p, "t_e_ps", float, p0.t_e), t_c=_get(p, "t_c_ps", float, p0.t_c),
            sigma1=_get(p, "sigma1_ps", float, p0.sigma1),
            sigma2=_get(p, "sigma2_ps", float, p0.sigma2),
            n_pulses=_get(p, "n_pulses", int, p0.n_pulses))
        single = _get(e, "single_mode", str, "off").lower()
        if single not in _SINGLE_MODE:
            raise ConfigError(f"[evolve] single_mode = {single!r} not understood")
        d = {f.name: f.default for f in fields(EvolutionConfig) if f.name not in ("profile", "geometry")}
        evo = EvolutionConfig(
            profile=profile, geometry=geom,
            pol=_get(e, "polarization", Polarization.parse, Polarization.TE),
            mx=_get(c, "mx", int, 1), my=_get(c, "my", int, 1),
            ell_max=_get(e, "ell_max", int, d["ell_max"]),
            step_ps=_get(e, "step_ps", float, d["step_ps"]),
            sample_ps=_get(e, "sample_ps", float, d["sample_ps"]),
            single_mode=_SINGLE_MODE[single],
            integrator=_get(e, "integrator", str, d["integrator"]),
            propagation=_get(e, "propagation", str, d["propagation"]),
            unitarity_abort=_get(e, "unitarity_abort", float, d["unitarity_abort"]),
            rtol=_get(e, "rtol", float, d["rtol"]), atol=_get(e, "atol", float, d["atol"]))
        s = sec["spectrum"]
        s0 = SpectrumGrid()
        spectrum = SpectrumGrid(
            polarizations=tuple(_get(s, "polarizations", _list, list(s0.polarizations))),
            vmax_lz=tuple(_get(s, "vmax_lz", parse_grid, list(s0.vmax_lz))),
            ell_max=_get(s, "ell_max", int, s0.ell_max),
            n_samples=_get(s, "n_samples", int, s0.n_samples))
        w = sec["sweep"]
        w0 = SweepGrid()
        sweep = SweepGrid(
            polarizations=tuple(_get(w, "polarizations", _list, list(w0.polarizations))),
            periods_ps=tuple(_get(w, "periods_ps", parse_grid, list(w0.periods_ps))),
            etas=tuple(_get(w, "etas", parse_grid, list(w0.etas))),
            vmax_lz=tuple(_get(w, "vmax_lz", parse_grid, list(w0.vmax_lz))),
            modes=tuple(m.lower() for m in _get(w, "modes", _list, list(w0.modes))),
            refine=_get(w, "refine", str, w0.refine),
            refine_tol_ps=_get(w, "refine_tol_ps", float, w0.refine_tol_ps),
            workers=_get(w, "workers", int, w0.workers))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(evo, spectrum, sweep, _get(e, "report_modes", int, 5))


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def default_config() -> RunConfig:
    return parse_config("")
