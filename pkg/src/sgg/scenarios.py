"""Named scenario presets and the INI-style configuration format.

A configuration file has six sections::

    [scenario]   name, expected, S_init
    [model]      sensitivity, consumption, growth and their parameters, d, D,
                 optional D_A / alpha / beta for the attractant
    [grid]       x_min, x_max, n_cells (or dx), domain
    [boundary]   S_left, S_right  (``noflux`` or a positive Dirichlet value)
    [init]       kind and its parameters
    [run]        t_end, dt_max, cfl, clamp, output_every, breakdown_policy

``#`` starts a comment.  Unknown sections and keys are rejected with the
line number where they appear.
"""
from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, Optional, Union

import numpy as np

from . import analytic
from . import model as m
from . import solver as sv
from .errors import ConfigError, ConstructionError, DomainError
from .state import (
    CLAMP_AND_CONTINUE,
    HALF_LINE,
    HALT,
    TRUNCATED_LINE,
    BoundarySpec,
    FieldState,
    Grid1D,
    SimConfig,
)

__all__ = [
    "Outcome",
    "ProfileInit",
    "ScenarioPreset",
    "PRESET_NAMES",
    "preset",
    "parse_config",
    "serialize",
    "with_override",
    "analytic_speed",
    "initial_state",
    "run_preset",
    "outcome_matches",
]


class Outcome(str, Enum):
    BREAKDOWN = "Breakdown"
    RESCUED = "Rescued"
    STATIONARY_SPIKE = "StationarySpike"
    TRAVELING_WAVE = "TravelingWave"


@dataclass(frozen=True)
class ProfileInit:
    """Initial data sampled from a constructed wave.

    ``kind`` is ``"ks"`` (traveling wave, ``z = 0`` placed at ``shift``) or
    ``"halfline-spike"`` (stationary spike anchored at the left wall).
    """

    kind: str
    M: float
    shift: float = 0.0

    def __post_init__(self):
        if self.kind not in ("ks", "halfline-spike"):
            raise DomainError(f"unknown profile kind {self.kind!r}")
        if not self.M > 0:
            raise DomainError("profile mass M must be > 0")


Expected = Union[Outcome, analytic.SpeedResult]


@dataclass(frozen=True)
class ScenarioPreset:
    name: str
    spec: m.ModelSpec
    grid: Grid1D
    bc: BoundarySpec
    init: object
    config: SimConfig
    S_init: float = 1.0
    expected: Optional[Expected] = None

    @property
    def expects_breakdown(self) -> bool:
        return self.expected == Outcome.BREAKDOWN


# --- analytic expectations and initial data ---------------------------------

def analytic_speed(spec: m.ModelSpec, S_init: float, mass: Optional[float] = None) -> analytic.SpeedResult:
    """Speed predicted for ``spec`` by whichever construction covers it.

    Raises
    ------
    ConfigError
        If no construction applies (e.g. logarithmic go-or-grow with D > 0).
    """
    sens, cons, growth = spec.sensitivity, spec.consumption, spec.growth
    try:
        if isinstance(sens, m.LogGradient) and isinstance(cons, m.ConstantConsumption) \
                and isinstance(growth, m.NoGrowth):
            if not sens.chi > spec.d:
                raise ConfigError(f"no admissible Keller-Segel wave: the KS speed requires chi > d "
                                  f"(chi={sens.chi}, d={spec.d})")
            if mass is None:
                raise ConfigError("the KS speed needs the total cell mass")
            return analytic.ks_speed(cons.k, mass, S_init)
        if isinstance(sens, m.BinaryTwoSignal) and spec.attractant is not None:
            a = spec.attractant
            return analytic.two_signal_speed(sens.chi_S, sens.chi_A, a.alpha, a.D_A)
        if isinstance(sens, m.ThresholdedSign) and isinstance(growth, m.ThresholdGrowth):
            return analytic.gogrow_speed(sens.chi, growth.r, spec.d)
        if isinstance(sens, m.ThresholdedLogGradient) and isinstance(growth, m.ThresholdGrowth) \
                and isinstance(cons, m.LinearConsumption) and spec.D == 0:
            return analytic.logsens_speed(sens.chi, growth.r, spec.d, S_init, growth.S_0)
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError("no analytic speed is available for this model")


def _profile(init: ProfileInit, spec: m.ModelSpec, grid: Grid1D, bc: BoundarySpec, S_init: float):
    sens = spec.sensitivity
    if not isinstance(sens, m.LogGradient) or not isinstance(spec.consumption, m.ConstantConsumption):
        raise ConfigError(f"profile {init.kind!r} needs log-gradient sensitivity and constant consumption")
    try:
        if init.kind == "ks":
            return analytic.ks_profile(spec.d, sens.chi, spec.k, init.M, S_init, grid.centers - init.shift)
        if bc.S_left is None or grid.domain_kind != HALF_LINE:
            raise ConfigError("the half-line spike needs a half_line grid and a Dirichlet S_left")
        return analytic.ks_halfline_spike_profile(spec.d, sens.chi, spec.D, spec.k, init.M,
                                                  bc.S_left, grid.centers)
    except ConstructionError as exc:
        raise ConfigError(f"profile {init.kind!r}: {exc}") from None


def initial_state(p: ScenarioPreset) -> FieldState:
    with_a = p.spec.attractant is not None
    if isinstance(p.init, ProfileInit):
        prof = _profile(p.init, p.spec, p.grid, p.bc, p.S_init)
        shift = p.init.shift if p.init.kind == "ks" else 0.0
        return sv.initial_condition(sv.FromProfile(prof, shift), p.grid, p.S_init, with_a)
    return sv.initial_condition(p.init, p.grid, p.S_init, with_a)


def _expected_speed(spec, grid, bc, init, S_init) -> analytic.SpeedResult:
    mass = None
    if isinstance(spec.sensitivity, m.LogGradient):
        mass = init.M if isinstance(init, ProfileInit) else \
            sv.initial_condition(init, grid, S_init).mass(grid.dx)
    return analytic_speed(spec, S_init, mass)


def run_preset(p: ScenarioPreset):
    """Simulate a preset; returns ``(final_state, RunReport)``."""
    return sv.run(initial_state(p), p.spec, p.grid, p.bc, p.config)


def outcome_matches(p: ScenarioPreset, report) -> bool:
    """True when breakdown occurred exactly if the preset expects it."""
    return bool(report.breakdown.occurred) == p.expects_breakdown


# --- presets ----------------------------------------------------------------

PRESET_NAMES = ("ks-breakdown", "ks-aligned", "ks-rescued", "spike-stable", "spike-breakdown",
                "two-signal", "gogrow", "logsens", "logsens-D1")

_LINE = Grid1D(0.0, 200.0, 2000)
_HALF = Grid1D(0.0, 50.0, 500, HALF_LINE)


def _build(name, spec, grid, bc, init, config, S_init, expected) -> ScenarioPreset:
    if expected == "speed":
        expected = _expected_speed(spec, grid, bc, init, S_init)
    return ScenarioPreset(name, spec, grid, bc, init, config, S_init, expected)


def preset(name: str) -> ScenarioPreset:
    """Fully populated preset by name (see :data:`PRESET_NAMES`).

    Grids use dx = 0.1.  The two-signal numbers are repository defaults.
    """
    ks = m.ModelSpec(m.LogGradient(2.0), m.ConstantConsumption(1.0), d=1.0, D=0.0)
    noflux = BoundarySpec()
    if name == "ks-breakdown":
        return _build(name, ks, _LINE, noflux, sv.Plateau(10.0, 1.0), SimConfig(t_end=10.0),
                      1.0, Outcome.BREAKDOWN)
    if name == "ks-aligned":
        return _build(name, ks, _LINE, noflux, ProfileInit("ks", 2.0, 50.0), SimConfig(t_end=10.0),
                      1.0, Outcome.BREAKDOWN)
    if name == "ks-rescued":
        return _build(name, ks, _LINE, noflux, ProfileInit("ks", 2.0, 50.0),
                      SimConfig(t_end=50.0, clamp_epsilon=1e-12), 1.0, Outcome.RESCUED)
    if name in ("spike-stable", "spike-breakdown"):
        stable = name == "spike-stable"
        spec = replace(ks, D=1.0 if stable else 0.25)
        init = ProfileInit("halfline-spike", 1.0) if stable else sv.Plateau(5.0, 1.0)
        return _build(name, spec, _HALF, BoundarySpec(S_left=1.0), init, SimConfig(t_end=20.0), 1.0,
                      Outcome.STATIONARY_SPIKE if stable else Outcome.BREAKDOWN)
    if name == "two-signal":
        spec = m.ModelSpec(m.BinaryTwoSignal(2.0, 1.0), m.LinearConsumption(1.0), d=1.0, D=0.0,
                           attractant=m.Attractant(1.0, 1.0, 1.0))
        return _build(name, spec, _LINE, noflux, sv.HalfGaussian(20.0, 2.0, 1.0),
                      SimConfig(t_end=60.0), 1.0, "speed")
    if name == "gogrow":
        spec = m.ModelSpec(m.ThresholdedSign(2.0, 1.0), m.LinearConsumption(1.0),
                           m.ThresholdGrowth(1.0, 1.0), d=1.0, D=0.0)
        return _build(name, spec, _LINE, noflux, sv.Plateau(10.0, 1.0), SimConfig(t_end=60.0),
                      2.0, "speed")
    if name in ("logsens", "logsens-D1"):
        D = 0.0 if name == "logsens" else 1.0
        spec = m.ModelSpec(m.ThresholdedLogGradient(2.0, 2.0), m.LinearConsumption(1.0),
                           m.ThresholdGrowth(1.0, 2.0), d=1.0, D=D)
        # dt_max keeps the splitting error below the spatial error at every dx in use
        cfg = SimConfig(t_end=50.0, dt_max=0.001)
        return _build(name, spec, _LINE, noflux, sv.Plateau(10.0, 1.0), cfg, 8.0,
                      "speed" if D == 0 else Outcome.TRAVELING_WAVE)
    raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")


# --- serialization ----------------------------------------------------------

def _num(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


_SENS_NAMES = {m.LogGradient: "log-gradient", m.BinaryTwoSignal: "binary-two-signal",
               m.Tanh: "tanh", m.ThresholdedSign: "thresholded-sign",
               m.ThresholdedLogGradient: "thresholded-log-gradient"}
_CONS_NAMES = {m.ConstantConsumption: "constant", m.LinearConsumption: "linear",
               m.PowerConsumption: "power"}
_INIT_NAMES = {sv.Plateau: "plateau", sv.Gaussian: "gaussian", sv.HalfGaussian: "half-gaussian"}

# allowed keys per discriminator, in serialization order
_SENS_KEYS = {"log-gradient": ("chi",), "binary-two-signal": ("chi_S", "chi_A"),
              "tanh": ("chi", "f_scale"), "thresholded-sign": ("chi", "S_0"),
              "thresholded-log-gradient": ("chi", "S_0")}
_CONS_KEYS = {"constant": ("k",), "linear": ("k",), "power": ("k", "m")}
_GROWTH_KEYS = {"none": (), "threshold": ("r", "S_0")}
_INIT_KEYS = {"plateau": ("edge", "height"), "gaussian": ("center", "width", "mass"),
              "half-gaussian": ("center", "width", "mass"), "ks-profile": ("M", "shift"),
              "halfline-spike-profile": ("M",)}
_ATTRACTANT_KEYS = ("D_A", "alpha", "beta")
_SECTIONS = ("scenario", "model", "grid", "boundary", "init", "run")


def to_sections(p: ScenarioPreset) -> Dict[str, Dict[str, str]]:
    """Ordered ``section -> key -> text`` mapping of a preset."""
    spec = p.spec
    sens_name = _SENS_NAMES[type(spec.sensitivity)]
    cons_name = _CONS_NAMES[type(spec.consumption)]
    growth_name = "none" if isinstance(spec.growth, m.NoGrowth) else "threshold"
    if isinstance(p.expected, analytic.SpeedResult):
        expected = "analytic-speed"
    else:
        expected = "none" if p.expected is None else p.expected.value
    out = {"scenario": {"name": p.name, "expected": expected, "S_init": _num(p.S_init)}}

    mod = {"sensitivity": sens_name}
    for key in _SENS_KEYS[sens_name]:
        mod[key] = _num(getattr(spec.sensitivity, key))
    mod["consumption"] = cons_name
    for key in _CONS_KEYS[cons_name]:
        mod[key] = _num(getattr(spec.consumption, key))
    mod["growth"] = growth_name
    for key in _GROWTH_KEYS[growth_name]:
        if key not in mod:
            mod[key] = _num(getattr(spec.growth, key))
    mod["d"] = _num(spec.d)
    mod["D"] = _num(spec.D)
    if spec.attractant is not None:
        for key in _ATTRACTANT_KEYS:
            mod[key] = _num(getattr(spec.attractant, key))
    out["model"] = mod

    g = p.grid
    out["grid"] = {"x_min": _num(g.x_min), "x_max": _num(g.x_max), "n_cells": str(g.n_cells),
                   "domain": g.domain_kind}
    out["boundary"] = {"S_left": "noflux" if p.bc.S_left is None else _num(p.bc.S_left),
                       "S_right": "noflux" if p.bc.S_right is None else _num(p.bc.S_right)}

    init = p.init
    if isinstance(init, ProfileInit):
        kind = "ks-profile" if init.kind == "ks" else "halfline-spike-profile"
    else:
        kind = _INIT_NAMES[type(init)]
    ini = {"kind": kind}
    for key in _INIT_KEYS[kind]:
        ini[key] = _num(getattr(init, key))
    out["init"] = ini

    c = p.config
    out["run"] = {"t_end": _num(c.t_end), "dt_max": _num(c.dt_max), "cfl": _num(c.cfl),
                  "clamp": "off" if c.clamp_epsilon is None else _num(c.clamp_epsilon),
                  "output_every": _num(c.output_every), "breakdown_policy": c.breakdown_policy}
    return out


def serialize(p: ScenarioPreset) -> str:
    """Deterministic configuration text; ``parse_config`` inverts it."""
    lines = [f"# scenario {p.name}"]
    for section, items in to_sections(p).items():
        lines.append("")
        lines.append(f"[{section}]")
        lines.extend(f"{k} = {v}" for k, v in items.items())
    return "\n".join(lines) + "\n"


# --- parsing ----------------------------------------------------------------

_HEADER = re.compile(r"^\s*\[([^\]]*)\]")
_KEY = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")


def _key_lines(text: str) -> Dict[tuple, int]:
    """First line number of every section header and key."""
    where: Dict[tuple, int] = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped[0] in "#;":
            continue
        h = _HEADER.match(line)
        if h:
            section = h.group(1).strip()
            where.setdefault((section,), lineno)
            continue
        k = _KEY.match(line)
        if k and section is not None:
            where.setdefault((section, k.group(1)), lineno)
    return where


class _Reader:
    """Typed access to one section that remembers which keys were used."""

    def __init__(self, sections, lines, name):
        self.name = name
        self.items = sections.get(name, {})
        self.lines = lines

    def line(self, key=None) -> Optional[int]:
        return self.lines.get((self.name, key) if key else (self.name,))

    def text(self, key, default=None) -> str:
        if key not in self.items:
            if default is not None:
                return default
            raise ConfigError(f"[{self.name}] missing required key {key!r}", self.line())
        return self.items[key].strip()

    def num(self, key, default=None) -> float:
        raw = self.text(key, None if default is None else repr(default))
        try:
            val = float(raw)
        except ValueError:
            raise ConfigError(f"[{self.name}] {key} = {raw!r} is not a number", self.line(key)) from None
        if not np.isfinite(val):
            raise ConfigError(f"[{self.name}] {key} must be finite", self.line(key))
        return val

    def only(self, allowed) -> None:
        for key in self.items:
            if key not in allowed:
                raise ConfigError(f"unknown key {key!r} in [{self.name}]", self.line(key))


def _choice(r: _Reader, key: str, options) -> str:
    val = r.text(key)
    if val not in options:
        raise ConfigError(f"[{r.name}] {key} must be one of {', '.join(options)}, got {val!r}",
                          r.line(key))
    return val


def _parse_model(r: _Reader) -> m.ModelSpec:
    sens_name = _choice(r, "sensitivity", tuple(_SENS_KEYS))
    cons_name = _choice(r, "consumption", tuple(_CONS_KEYS))
    growth_name = _choice(r, "growth", tuple(_GROWTH_KEYS))
    has_a = any(k in r.items for k in _ATTRACTANT_KEYS)
    allowed = {"sensitivity", "consumption", "growth", "d", "D", *_SENS_KEYS[sens_name],
               *_CONS_KEYS[cons_name], *_GROWTH_KEYS[growth_name]}
    if has_a:
        allowed.update(_ATTRACTANT_KEYS)
    r.only(allowed)

    if sens_name == "log-gradient":
        sens = m.LogGradient(r.num("chi"))
    elif sens_name == "binary-two-signal":
        sens = m.BinaryTwoSignal(r.num("chi_S"), r.num("chi_A"))
    elif sens_name == "tanh":
        sens = m.Tanh(r.num("chi"), r.num("f_scale"))
    elif sens_name == "thresholded-sign":
        sens = m.ThresholdedSign(r.num("chi"), r.num("S_0"))
    else:
        sens = m.ThresholdedLogGradient(r.num("chi"), r.num("S_0"))

    if cons_name == "constant":
        cons = m.ConstantConsumption(r.num("k"))
    elif cons_name == "linear":
        cons = m.LinearConsumption(r.num("k"))
    else:
        cons = m.PowerConsumption(r.num("k"), r.num("m"))

    growth = m.NoGrowth() if growth_name == "none" else m.ThresholdGrowth(r.num("r"), r.num("S_0"))
    attractant = None
    if has_a:
        attractant = m.Attractant(r.num("D_A"), r.num("alpha"), r.num("beta"))
    return m.ModelSpec(sens, cons, growth, d=r.num("d"), D=r.num("D", 0.0), attractant=attractant)


def _parse_grid(r: _Reader) -> Grid1D:
    r.only({"x_min", "x_max", "n_cells", "dx", "domain"})
    domain = _choice(r, "domain", (TRUNCATED_LINE, HALF_LINE)) if "domain" in r.items else TRUNCATED_LINE
    x_min, x_max = r.num("x_min"), r.num("x_max")
    if ("n_cells" in r.items) == ("dx" in r.items):
        raise ConfigError("[grid] give exactly one of n_cells and dx", r.line())
    if "dx" in r.items:
        dx = r.num("dx")
        if not dx > 0:
            raise ConfigError("[grid] dx must be > 0", r.line("dx"))
        return Grid1D.from_dx(x_min, x_max, dx, domain)
    raw = r.text("n_cells")
    if not raw.isdigit():
        raise ConfigError(f"[grid] n_cells = {raw!r} is not a positive integer", r.line("n_cells"))
    return Grid1D(x_min, x_max, int(raw), domain)


def _parse_boundary(r: _Reader) -> BoundarySpec:
    r.only({"S_left", "S_right"})
    vals = []
    for key in ("S_left", "S_right"):
        raw = r.text(key, "noflux")
        vals.append(None if raw == "noflux" else r.num(key))
    return BoundarySpec(*vals)


def _parse_init(r: _Reader):
    kind = _choice(r, "kind", tuple(_INIT_KEYS))
    r.only({"kind", *_INIT_KEYS[kind]})
    if kind == "plateau":
        return sv.Plateau(r.num("edge"), r.num("height"))
    if kind == "gaussian":
        return sv.Gaussian(r.num("center"), r.num("width"), r.num("mass"))
    if kind == "half-gaussian":
        return sv.HalfGaussian(r.num("center"), r.num("width"), r.num("mass"))
    if kind == "ks-profile":
        return ProfileInit("ks", r.num("M"), r.num("shift", 0.0))
    return ProfileInit("halfline-spike", r.num("M"))


def _parse_run(r: _Reader) -> SimConfig:
    r.only({"t_end", "dt_max", "cfl", "clamp", "output_every", "breakdown_policy"})
    clamp = r.text("clamp", "off")
    policy = r.text("breakdown_policy", HALT)
    if policy not in (HALT, CLAMP_AND_CONTINUE):
        raise ConfigError(f"[run] breakdown_policy must be {HALT} or {CLAMP_AND_CONTINUE}",
                          r.line("breakdown_policy"))
    return SimConfig(t_end=r.num("t_end"), dt_max=r.num("dt_max", 0.05), cfl=r.num("cfl", 0.9),
                     clamp_epsilon=None if clamp == "off" else r.num("clamp"),
                     output_every=r.num("output_every", 0.5), breakdown_policy=policy)


def from_sections(sections: Dict[str, Dict[str, str]], lines: Optional[Dict[tuple, int]] = None) -> ScenarioPreset:
    """Build and validate a preset from a ``section -> key -> text`` mapping."""
    lines = lines or {}
    for name in sections:
        if name not in _SECTIONS:
            raise ConfigError(f"unknown section [{name}]", lines.get((name,)))
    readers = {name: _Reader(sections, lines, name) for name in _SECTIONS}
    for name in ("scenario", "model", "grid", "init", "run"):
        if name not in sections:
            raise ConfigError(f"missing section [{name}]")
    sc = readers["scenario"]
    sc.only({"name", "expected", "S_init"})
    try:
        spec = _parse_model(readers["model"])
        grid = _parse_grid(readers["grid"])
        bc = _parse_boundary(readers["boundary"])
        bc.check(grid)
        init = _parse_init(readers["init"])
        config = _parse_run(readers["run"])
        S_init = sc.num("S_init", 1.0)
        if not S_init > 0:
            raise ConfigError("[scenario] S_init must be > 0", sc.line("S_init"))
    except DomainError as exc:
        raise ConfigError(f"invalid parameters: {exc}") from None
    if isinstance(init, ProfileInit):
        sens = spec.sensitivity
        if isinstance(sens, m.LogGradient) and not sens.chi > spec.d:
            raise ConfigError(f"a {init.kind} profile requires chi > d (chi={sens.chi}, d={spec.d})")
        if init.kind == "halfline-spike" and not spec.D > 0:
            raise ConfigError("a halfline-spike profile requires D > 0")
        _profile(init, spec, grid, bc, S_init)

    tag = sc.text("expected", "none")
    if tag == "analytic-speed":
        expected = _expected_speed(spec, grid, bc, init, S_init)
    elif tag == "none":
        expected = None
    else:
        try:
            expected = Outcome(tag)
        except ValueError:
            options = ", ".join([o.value for o in Outcome] + ["analytic-speed", "none"])
            raise ConfigError(f"[scenario] expected must be one of {options}",
                              sc.line("expected")) from None
    return ScenarioPreset(sc.text("name", "custom"), spec, grid, bc, init, config, S_init, expected)


def parse_config(text: str) -> ScenarioPreset:
    """Parse configuration text into a validated preset.

    Raises
    ------
    ConfigError
        With ``lineno`` set for syntax problems and unknown keys.
    """
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=("#",), default_section="\x00")
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside of any section", exc.lineno) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", exc.lineno) from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(f"cannot parse {line.strip()}", lineno) from None
    sections = {s: dict(cp.items(s)) for s in cp.sections()}
    return from_sections(sections, _key_lines(text))


def with_override(p: ScenarioPreset, axis: str, value) -> ScenarioPreset:
    """Copy of ``p`` with one ``section.key`` replaced, revalidated from scratch."""
    section, _, key = axis.partition(".")
    sections = to_sections(p)
    if section not in sections or key not in sections[section]:
        raise ConfigError(f"axis {axis!r} does not name a field of preset {p.name!r}")
    sections[section][key] = value if isinstance(value, str) else _num(value)
    return from_sections(sections)
