"""INI-style scenario files: one section per module, every key declared below.

Unknown sections or keys are errors, reported with their line number.
"""
from __future__ import annotations

import configparser
import math
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..errors import ConfigError
from ..model import ControlSpec, Drive, Equilibrium, PhysicalParams, gain_threshold

KINDS = ("simulate", "steer", "steer_sequence", "hysteresis_sweep", "spectrum", "verify")

# section -> key -> (parser name, default); None default means required when the section matters
SCHEMA: Dict[str, Dict[str, Tuple[str, object]]] = {
    "scenario": {"kind": ("str", None), "name": ("str", "")},
    "physics": {"nu": ("float", 0.02), "L": ("float", 1.0)},
    "mesh": {"n_elements": ("int", 12)},
    "integrator": {
        "dt": ("float", 1e-3),
        "t_final": ("float", 10.0),
        "renormalize": ("auto_bool", None),
        "record_stride": ("opt_int", None),
        "allow_large_dt": ("bool", False),
    },
    "initial": {"ic": ("str", "sine_cosine")},
    "control": {
        "k": ("float", 0.0),
        "r": ("vec3", (1.0, 0.0, 0.0)),
        "drive_amplitude": ("float", 0.0),
        "drive_omega": ("float", 1.0),
        "drive_component": ("int", 1),
    },
    "sequence": {
        "settle_time": ("float", 20.0),
        "phase_time": ("float", 30.0),
        "targets": ("vec3_list", None),
    },
    "hysteresis": {
        "omegas": ("float_list", (1.0, 0.1, 0.01, 0.001)),
        "amplitude": ("float", 0.001),
        "component": ("int", 1),
        "observation_point": ("float", 0.6),
        "n_periods": ("int", 3),
        "controlled": ("bool", False),
        "model": ("str", "nonlinear"),
        "base": ("opt_vec3", None),
        "samples_per_period": ("int", 256),
        "threshold": ("float", 0.1),
        "n_jobs": ("int", 1),
    },
    "spectrum": {
        "base": ("vec3", (1.0, 0.0, 0.0)),
        "n_elements_list": ("int_list", (32, 64)),
        "n_modes": ("int", 5),
        "n_max": ("int", 10),
    },
    "verify": {
        "n_fields": ("int", 1000),
        "n_elements": ("int", 128),
        "n_equilibria": ("int", 100),
        "seed": ("int", 0),
    },
}


def _split(text):
    return [p.strip() for p in re.split(r"[,\s]+", text.strip()) if p.strip()]


def _float(text):
    v = float(text)
    if not math.isfinite(v):
        raise ValueError(f"{text!r} is not finite")
    return v


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"{text!r} is not a boolean")


PARSERS = {
    "str": lambda s: s.strip(),
    "float": _float,
    "int": lambda s: int(s.strip()),
    "opt_int": lambda s: None if s.strip().lower() in ("", "auto", "none") else int(s),
    "bool": _bool,
    "auto_bool": lambda s: None if s.strip().lower() in ("", "auto") else _bool(s),
    "vec3": lambda s: _vec3(s),
    "opt_vec3": lambda s: None if s.strip().lower() in ("", "none") else _vec3(s),
    "vec3_list": lambda s: tuple(_vec3(p) for p in s.split(";") if p.strip()),
    "float_list": lambda s: tuple(_float(p) for p in _split(s)),
    "int_list": lambda s: tuple(int(p) for p in _split(s)),
}


def _vec3(text):
    parts = [_float(p) for p in _split(text)]
    if len(parts) != 3:
        raise ValueError(f"expected three components, got {len(parts)}")
    return tuple(parts)


@dataclass(frozen=True)
class InitialCondition:
    """``uniform:a1,a2,a3`` | ``sine_cosine`` | ``cosine_mode:n,component``."""

    name: str
    args: tuple = ()

    @classmethod
    def parse(cls, text: str) -> "InitialCondition":
        name, _, rest = text.strip().partition(":")
        name = name.strip()
        if name == "uniform":
            a = _vec3(rest)
            if abs(math.sqrt(sum(c * c for c in a)) - 1.0) > 1e-12:
                raise ValueError(f"uniform initial condition must be unit norm, got {a}")
            return cls(name, a)
        if name == "sine_cosine":
            if rest.strip():
                raise ValueError("sine_cosine takes no arguments")
            return cls(name)
        if name == "cosine_mode":
            parts = _split(rest)
            if len(parts) != 2:
                raise ValueError("cosine_mode needs n,component")
            n, comp = int(parts[0]), int(parts[1])
            if n < 0 or comp not in (1, 2, 3):
                raise ValueError(f"cosine_mode needs n >= 0 and component in 1..3, got {n},{comp}")
            return cls(name, (n, comp))
        raise ValueError(f"unknown initial condition preset {name!r}")

    def values(self, mesh) -> np.ndarray:
        x = mesh.nodes / mesh.length
        if self.name == "uniform":
            return np.tile(np.array(self.args, dtype=float), (mesh.n_nodes, 1))
        if self.name == "sine_cosine":
            return np.column_stack((np.sin(2 * np.pi * x), np.cos(2 * np.pi * x), np.zeros_like(x)))
        n, comp = self.args
        out = np.zeros((mesh.n_nodes, 3))
        out[:, comp - 1] = np.cos(n * np.pi * x)
        return out


@dataclass
class ScenarioConfig:
    kind: str
    sections: Dict[str, Dict[str, object]]
    raw: Dict[str, Dict[str, str]]
    source: Optional[str] = None
    warnings: List[str] = field(default_factory=list)

    def get(self, section, key):
        return self.sections[section][key]

    @property
    def params(self) -> PhysicalParams:
        return PhysicalParams(self.get("physics", "nu"), self.get("physics", "L"))

    @property
    def n_elements(self) -> int:
        return self.get("mesh", "n_elements")

    @property
    def initial(self) -> InitialCondition:
        return self.get("initial", "ic")

    def control_spec(self, target=None) -> Optional[ControlSpec]:
        c = self.sections["control"]
        drive = None
        if c["drive_amplitude"] > 0:
            drive = Drive(c["drive_amplitude"], c["drive_omega"], c["drive_component"])
        if c["k"] == 0 and drive is None and target is None:
            return None
        return ControlSpec(c["k"], Equilibrium(np.array(target if target is not None else c["r"])), drive)


class _LineTracker:
    """Maps (section, key) to the line it was written on."""

    def __init__(self, text: str):
        self.lines: Dict[Tuple[str, Optional[str]], int] = {}
        section = None
        for i, line in enumerate(text.splitlines(), start=1):
            s = line.strip()
            if not s or s[0] in "#;":
                continue
            m = re.match(r"\[([^\]]+)\]", s)
            if m:
                section = m.group(1).strip()
                self.lines.setdefault((section, None), i)
                continue
            key = re.split(r"[=:]", s, maxsplit=1)[0].strip()
            if section is not None:
                self.lines.setdefault((section, key), i)

    def __call__(self, section, key=None):
        return self.lines.get((section, key)) or self.lines.get((section, None))


def parse_config(text: str, source: Optional[str] = None, overrides=(),
                 expected_kinds: Optional[Tuple[str, ...]] = None) -> ScenarioConfig:
    """Parse and validate scenario text. ``overrides`` are ``section.key=value`` strings."""
    cp = configparser.ConfigParser(interpolation=None, strict=True,
                                   inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source or "<config>")
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"key outside any section: {exc.line.strip()!r}", exc.lineno) from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        text_line = line.strip("'\"").replace("\\n", "").strip()
        raise ConfigError(f"cannot parse line {text_line!r} (expected key = value)", lineno) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError(str(exc).split(": ", 1)[-1], exc.lineno) from None
    lines = _LineTracker(text)

    raw: Dict[str, Dict[str, str]] = {s: dict(cp[s]) for s in cp.sections()}
    for item in overrides:
        target, eq, value = item.partition("=")
        section, dot, key = target.strip().partition(".")
        if not eq or not dot:
            raise ConfigError(f"override {item!r} must look like section.key=value", field=item)
        raw.setdefault(section, {})[key] = value.strip()

    for section, keys in raw.items():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", lines(section), section)
        for key in keys:
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]", lines(section, key),
                                  f"{section}.{key}")

    sections: Dict[str, Dict[str, object]] = {}
    for section, keys in SCHEMA.items():
        sections[section] = {}
        for key, (kind, default) in keys.items():
            if key in raw.get(section, {}):
                try:
                    value = PARSERS[kind](raw[section][key])
                except ValueError as exc:
                    raise ConfigError(f"{section}.{key}: {exc}", lines(section, key),
                                      f"{section}.{key}") from None
            else:
                value = default
            sections[section][key] = value

    kind = sections["scenario"]["kind"]
    if kind is None:
        if expected_kinds:
            kind = expected_kinds[0]
        else:
            raise ConfigError("scenario.kind is required", lines("scenario"), "scenario.kind")
    if kind not in KINDS:
        raise ConfigError(f"scenario.kind must be one of {', '.join(KINDS)}, got {kind!r}",
                          lines("scenario", "kind"), "scenario.kind")
    if expected_kinds and kind not in expected_kinds:
        raise ConfigError(f"scenario.kind {kind!r} does not match this subcommand "
                          f"(expected {' or '.join(expected_kinds)})",
                          lines("scenario", "kind"), "scenario.kind")
    sections["scenario"]["kind"] = kind
    cfg = ScenarioConfig(kind, sections, raw, source)
    _validate(cfg, lines)
    for msg in cfg.warnings:
        warnings.warn(msg, stacklevel=2)
    return cfg


def load_config(path, overrides=(), expected_kinds=None) -> ScenarioConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text(), str(path), overrides, expected_kinds)


def _validate(cfg: ScenarioConfig, lines):
    s = cfg.sections

    def fail(section, key, msg):
        # a key that is absent but required by the kind is reported at the kind line
        lineno = lines(section, key) or lines("scenario", "kind")
        raise ConfigError(f"{section}.{key}: {msg}", lineno, f"{section}.{key}")

    def need(section, key, ok, msg):
        if not ok:
            fail(section, key, msg)

    p, m, it, c = s["physics"], s["mesh"], s["integrator"], s["control"]
    need("physics", "nu", p["nu"] >= 0, f"must be >= 0, got {p['nu']}")
    need("physics", "L", p["L"] > 0, f"must be > 0, got {p['L']}")
    need("mesh", "n_elements", m["n_elements"] >= 2, f"mesh too coarse: {m['n_elements']} < 2")
    need("integrator", "dt", it["dt"] > 0, f"must be > 0, got {it['dt']}")
    need("integrator", "t_final", it["t_final"] > 0, f"must be > 0, got {it['t_final']}")
    need("integrator", "dt", it["dt"] <= it["t_final"], "must not exceed t_final")
    rs = it["record_stride"]
    need("integrator", "record_stride", rs is None or rs >= 1, f"must be >= 1, got {rs}")
    need("control", "k", c["k"] >= 0, f"must be >= 0, got {c['k']}")
    need("control", "drive_amplitude", c["drive_amplitude"] >= 0, "must be >= 0")
    need("control", "drive_omega", c["drive_omega"] > 0, "must be > 0")
    need("control", "drive_component", c["drive_component"] in (1, 2, 3), "must be 1, 2 or 3")
    try:
        Equilibrium(np.array(c["r"]))
    except ValueError as exc:
        fail("control", "r", str(exc))
    try:
        s["initial"]["ic"] = InitialCondition.parse(s["initial"]["ic"])
    except ValueError as exc:
        fail("initial", "ic", str(exc))

    if cfg.kind == "steer_sequence":
        q = s["sequence"]
        need("sequence", "targets", q["targets"], "steer_sequence needs at least one target")
        for r in q["targets"]:
            try:
                Equilibrium(np.array(r))
            except ValueError as exc:
                fail("sequence", "targets", str(exc))
        need("sequence", "settle_time", q["settle_time"] >= 0, "must be >= 0")
        need("sequence", "phase_time", q["phase_time"] > 0, "must be > 0")
    if cfg.kind in ("steer", "steer_sequence"):
        need("control", "k", c["k"] > 0, "steering needs a positive gain")
    if cfg.kind == "hysteresis_sweep":
        h = s["hysteresis"]
        need("hysteresis", "omegas", len(h["omegas"]) >= 2 and all(w > 0 for w in h["omegas"])
             and len(set(h["omegas"])) == len(h["omegas"]), "need >= 2 distinct positive frequencies")
        need("hysteresis", "amplitude", h["amplitude"] >= 0, "must be >= 0")
        need("hysteresis", "component", h["component"] in (1, 2, 3), "must be 1, 2 or 3")
        need("hysteresis", "observation_point", 0 <= h["observation_point"] <= p["L"],
             f"must lie in [0, {p['L']}]")
        need("hysteresis", "n_periods", h["n_periods"] >= 3, "must be >= 3")
        need("hysteresis", "samples_per_period", h["samples_per_period"] >= 64, "must be >= 64")
        need("hysteresis", "model", h["model"] in ("nonlinear", "linear"), "nonlinear or linear")
        need("hysteresis", "n_jobs", h["n_jobs"] >= 1, "must be >= 1")
        if h["controlled"]:
            need("control", "k", c["k"] > 0, "controlled sweep needs a positive gain")
    if cfg.kind == "spectrum":
        sp = s["spectrum"]
        need("spectrum", "n_elements_list", all(n >= 2 for n in sp["n_elements_list"]),
             "every mesh needs >= 2 elements")
        try:
            Equilibrium(np.array(sp["base"]))
        except ValueError as exc:
            fail("spectrum", "base", str(exc))

    gains = [c["k"]] if c["k"] > 0 else []
    threshold = gain_threshold(PhysicalParams(p["nu"], p["L"]))
    for k in gains:
        if k <= threshold:
            cfg.warnings.append(f"k ≤ 8νL⁴ = {threshold:.6g}; theorem bound not satisfied")
