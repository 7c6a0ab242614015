"""Experiment configuration: ``[section]`` headers with ``key = value`` lines.

Every key must appear in SCHEMA; values are kept as the strings read and
typed on access, so a config round-trips through text unchanged.
"""

from __future__ import annotations

import configparser
import io
from importlib import resources

ESTIMATORS = ("entropy", "pressure", "uentropy", "lyapunov", "decompose", "spec",
              "gapcheck", "equilibrium", "bset", "bowen", "nonexpansive", "sweep")

# section -> key -> (type, default)
SCHEMA = {
    "run": {
        "estimators": ("list", ""),
        "seed": ("int", "0"),
        "workers": ("int", "1"),
        "out": ("str", "results"),
        "figures": ("bool", "true"),
    },
    "map": {
        "kind": ("str", "linear"),
        "matrix": ("str", "2 1 0; 1 2 1; 0 1 1"),
        "theta": ("float", "0.0"),
        "r0": ("float", "0.2"),
        "q": ("str", "0 0 0"),
        "inverse": ("bool", "false"),
    },
    "potential": {
        "kind": ("str", "zero"),
        "c": ("float", "0.0"),
        "terms": ("str", "0.1 1 0 0 0.0"),
        "t": ("float", "1.0"),
    },
    "pressure": {
        "delta": ("float", "0.1"),
        "epsilon": ("float", "0.0"),
        "n_min": ("int", "4"),
        "n_max": ("int", "8"),
        "budget": ("int", "100000"),
    },
    "uentropy": {
        "n_min": ("int", "1"),
        "n_max": ("int", "10"),
        "delta": ("float", "1e-4"),
        "mesh": ("float", "1e-3"),
    },
    "lyapunov": {
        "n": ("int", "50"),
        "samples": ("int", "100"),
    },
    "decompose": {
        "r": ("float", "0.2"),
        "segments": ("int", "1000"),
        "n_min": ("int", "1"),
        "n_max": ("int", "40"),
        "restricted_pressure": ("bool", "false"),
    },
    "spec": {
        "map": ("str", "inverse"),
        "delta": ("float", "0.1"),
        "tuples": ("int", "100"),
        "blocks_min": ("int", "2"),
        "blocks_max": ("int", "5"),
        "n_min": ("int", "5"),
        "n_max": ("int", "20"),
        "r": ("float", "0.2"),
    },
    "gapcheck": {},
    "equilibrium": {
        "n": ("int", "8"),
        "delta": ("float", "0.1"),
        "budget": ("int", "100000"),
        "restrict": ("bool", "false"),
        "r": ("float", "0.2"),
        "nu_index": ("str", "n"),
    },
    "bset": {
        "x": ("str", "0.1 0.2 0.3"),
        "length": ("float", "5.0"),
        "mesh": ("float", "1e-3"),
    },
    "bowen": {
        "map": ("str", "inverse"),
        "epsilon": ("float", "0.05"),
        "probes": ("int", "64"),
        "segments": ("int", "50"),
        "n_values": ("list", "5, 10, 20, 40"),
        "r": ("float", "0.2"),
        "C": ("float", "2.0"),
    },
    "nonexpansive": {
        "epsilon": ("float", "0.05"),
        "horizon": ("int", "20"),
        "samples": ("int", "500"),
    },
    "sweep": {
        "thetas": ("list", "0.03, 0.0, -0.05, -0.1"),
    },
    "thresholds": {
        "h_top_min": ("float", "0.0"),
        "h_u_min": ("float", "0.0"),
        "h_s_min": ("float", "0.0"),
        "gap_min": ("float", "0.0"),
        "sandwich_min": ("float", "0.2"),
        "decomp_g_min": ("float", "0.5"),
        "spec_min": ("float", "0.95"),
        "nonexpansive_max": ("float", "0.0"),
        "bowen_ratio_max": ("float", "1.0"),
        "lyapunov_max": ("float", "0.0"),
        "bowen_slope_max": ("float", "0.005"),
        "discrepancy_max": ("float", "0.08"),
        "bset_max": ("float", "1.0"),
    },
}


class ConfigError(ValueError):
    pass


def _convert(kind, text, where):
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "bool":
            low = text.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind == "list":
            return [v.strip() for v in text.split(",") if v.strip()]
        return text
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot read {text!r} as {kind}") from exc


class ExperimentConfig:
    """Sections of string values validated against SCHEMA."""

    def __init__(self, values=None):
        self.values = {sec: {} for sec in SCHEMA}
        for sec, items in (values or {}).items():
            for key, val in items.items():
                self.set(sec, key, val)

    # --- construction -------------------------------------------------
    @classmethod
    def from_text(cls, text):
        parser = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                           comment_prefixes=("#", ";"),
                                           inline_comment_prefixes=("#",))
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from exc
        cfg = cls()
        for sec in parser.sections():
            for key, val in parser.items(sec):
                cfg.set(sec, key, val)
        return cfg

    @classmethod
    def load(cls, path):
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_text(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc

    @classmethod
    def bundled(cls, name):
        ref = resources.files("thermolab") / "configs" / f"{name}.cfg"
        if not ref.is_file():
            raise ConfigError(f"no bundled config named {name!r}")
        return cls.from_text(ref.read_text(encoding="utf-8"))

    # --- access -------------------------------------------------------
    def set(self, section, key, value):
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]")
        kind = SCHEMA[section][key][0]
        text = str(value).strip()
        _convert(kind, text, f"[{section}] {key}")
        self.values[section][key] = text

    def raw(self, section, key):
        if key not in SCHEMA.get(section, {}):
            raise ConfigError(f"unknown key {key!r} in [{section}]")
        return self.values[section].get(key, SCHEMA[section][key][1])

    def get(self, section, key):
        kind = SCHEMA[section][key][0]
        return _convert(kind, self.raw(section, key), f"[{section}] {key}")

    def section(self, section):
        """Typed dict of every key in a section, defaults filled in."""
        return {key: self.get(section, key) for key in SCHEMA[section]}

    def explicit(self, section):
        return dict(self.values[section])

    # --- serialization ------------------------------------------------
    def to_text(self):
        out = io.StringIO()
        for sec in SCHEMA:
            items = self.values[sec]
            if not items:
                continue
            out.write(f"[{sec}]\n")
            for key in SCHEMA[sec]:
                if key in items:
                    out.write(f"{key} = {items[key]}\n")
            out.write("\n")
        return out.getvalue()

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.values == other.values
