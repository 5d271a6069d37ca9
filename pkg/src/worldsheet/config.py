"""Run configuration: an INI file with a fixed schema.

Unknown sections or keys, malformed values and out-of-range choices raise
ConfigError naming ``section.key``.  Every key has a documented default;
``SCHEMA`` is the single source of truth and :func:`schema_text` renders it.
"""

import configparser
import copy
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

__all__ = ["SCHEMA", "RunConfig", "load_config", "parse_config", "schema_text",
           "OUTPUT_ENV", "DATA_SOURCES", "SUITE_NAMES"]

OUTPUT_ENV = "WORLDSHEET_OUTPUT_DIR"
DATA_SOURCES = ("epsilon-loop", "epsilon-line", "compact-patch", "straight-string",
                "standing-wave", "boosted-pulse", "h3-violating", "file")
SUITE_NAMES = ("spectrum", "identities", "degeneracy", "transport", "diffeomorphism",
               "flat", "cross-chart", "cross-solver", "estimates", "failure-modes")


def _float_list(text):
    return [float(x) for x in text.replace(",", " ").split()]


def _str_list(text):
    return [x.strip() for x in text.replace(",", " ").split() if x.strip()]


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text):
    return None if text.strip().lower() in ("", "none", "auto") else float(text)


# (type, default, choices or None, description)
SCHEMA = {
    "metric": {
        "kind": (str, "schwarzschild", ("schwarzschild", "minkowski"), "ambient metric"),
        "mass": (float, 1.0, None, "mass m (ignored for minkowski)"),
        "delta_hat": (_opt_float, None, None, "horizon margin; default 0.1 m"),
    },
    "data": {
        "source": (str, "compact-patch", DATA_SOURCES, "initial data generator or file"),
        "epsilon": (float, 1e-3, None, "small parameter of the data family"),
        "r0": (float, 10.0, None, "distance of the string from the origin"),
        "scale": (float, 1.0, None, "loop scale (radius epsilon * scale)"),
        "amplitude": (float, 0.5, None, "amplitude of wave, pulse or H3 counterexample"),
        "path": (str, "", None, "data table for source = file"),
    },
    "grid": {
        "nodes": (int, 1025, None, "grid nodes"),
        "cfl": (_opt_float, None, None, "CFL number; default 1 (characteristic), 0.4 (upwind)"),
        "interpolation": (str, "linear", ("linear", "cubic"), "off-grid shift interpolation"),
        "pad": (_opt_float, None, None, "extra parameter length on each side (open data)"),
    },
    "solver": {
        "method": (str, "characteristic", ("characteristic", "upwind", "both"), "solver"),
        "chart": (str, "cartesian", ("cartesian", "spherical"), "chart of the upwind solver"),
        "T": (float, 10.0, None, "final time"),
        "require_h3": (_bool, True, None, "refuse data violating H3"),
    },
    "output": {
        "directory": (str, "", None, f"output directory; default ${OUTPUT_ENV} or ./worldsheet-output"),
        "prefix": (str, "run", None, "file name prefix"),
        "snapshot_times": (_float_list, [], None, "extra snapshot times (T is always stored)"),
        "snapshot_stride": (int, 1, None, "node stride of the snapshot files"),
    },
    "verify": {
        "suites": (_str_list, list(SUITE_NAMES), None, "suites to run"),
        "seed": (int, 0, None, "base random seed"),
        "jets": (int, 10000, None, "random jets per (n, p, metric) in the spectrum suite"),
        "manufactured": (int, 1000, None, "manufactured jets per configuration"),
        "states": (int, 10000, None, "random admissible states per chart"),
        "spectrum_tol": (float, 1e-9, None, "eigenvalue tolerance"),
        "identity_tol": (float, 1e-7, None, "extremal identity tolerance"),
        "identity_h": (float, 1e-4, None, "differencing step of the identity"),
        "annihilation_tol": (float, 1e-10, None, "tangent annihilation tolerance"),
        "degeneracy_tol": (float, 1e-7, None, "linear degeneracy tolerance"),
        "roundtrip_factor": (float, 5.0, None, "round trip bound factor on h^2"),
        "order_min": (float, 1.8, None, "minimum observed order of convergence"),
        "exponent_tol": (float, 0.2, None, "tolerance of the Q_V exponent"),
    },
    "sweep": {
        "axis": (str, "epsilon", ("epsilon", "nodes", "T"), "swept parameter"),
        "values": (_float_list, [1e-2, 5e-3, 2.5e-3], None, "values of the axis"),
        "workers": (int, 1, None, "worker processes"),
    },
}

POSITIVE = {("metric", "mass"): 0.0, ("data", "epsilon"): 0.0, ("grid", "nodes"): 8,
            ("solver", "T"): 0.0, ("output", "snapshot_stride"): 1, ("sweep", "workers"): 1}


@dataclass
class RunConfig:
    """Validated configuration, ``values[section][key]``."""

    values: dict = field(default_factory=dict)
    source: str = "<defaults>"

    def __getitem__(self, section):
        return self.values[section]

    @property
    def mass(self):
        return 0.0 if self["metric"]["kind"] == "minkowski" else self["metric"]["mass"]

    @property
    def delta_hat(self):
        dh = self["metric"]["delta_hat"]
        return 0.1 * self.mass if dh is None else dh

    def output_dir(self):
        d = self["output"]["directory"] or os.environ.get(OUTPUT_ENV) or "worldsheet-output"
        return Path(d)

    def with_overrides(self, overrides):
        """New config with ``{"section.key": "text"}`` applied."""
        raw = {s: {k: _render(v) for k, v in kv.items()} for s, kv in self.values.items()}
        for dotted, text in overrides.items():
            sec, key = _split_key(dotted)
            raw.setdefault(sec, {})[key] = text
        return parse_config(raw, self.source)

    def as_dict(self):
        return copy.deepcopy(self.values)


def _render(value):
    if value is None:
        return "none"
    if isinstance(value, list):
        return ", ".join(str(v) for v in value)
    return str(value)


def _split_key(dotted):
    if "." not in dotted:
        raise ConfigError(dotted, "override keys have the form section.key")
    sec, key = dotted.split(".", 1)
    return sec, key


def parse_config(raw, source="<dict>"):
    """Validate ``{section: {key: text}}`` against :data:`SCHEMA`."""
    values = {}
    for sec, keys in raw.items():
        if sec not in SCHEMA:
            raise ConfigError(sec, f"unknown section; expected one of {sorted(SCHEMA)}")
        for key in keys:
            if key not in SCHEMA[sec]:
                raise ConfigError(f"{sec}.{key}",
                                  f"unknown key; expected one of {sorted(SCHEMA[sec])}")
    for sec, spec in SCHEMA.items():
        values[sec] = {}
        for key, (conv, default, choices, _) in spec.items():
            name = f"{sec}.{key}"
            if key in raw.get(sec, {}):
                text = raw[sec][key]
                try:
                    val = conv(text) if isinstance(text, str) else conv(str(text))
                except (TypeError, ValueError) as exc:
                    raise ConfigError(name, f"cannot parse {text!r}: {exc}") from None
            else:
                val = copy.deepcopy(default)
            if choices is not None and val not in choices:
                raise ConfigError(name, f"{val!r} is not one of {list(choices)}")
            lo = POSITIVE.get((sec, key))
            if lo is not None and val is not None:
                if isinstance(lo, int) and val < lo:
                    raise ConfigError(name, f"must be at least {lo}")
                if isinstance(lo, float) and not val > lo and not (
                        sec == "metric" and values["metric"].get("kind") == "minkowski"):
                    raise ConfigError(name, "must be positive")
            values[sec][key] = val
    bad = [s for s in values["verify"]["suites"] if s not in SUITE_NAMES]
    if bad:
        raise ConfigError("verify.suites", f"unknown suites {bad}; expected {list(SUITE_NAMES)}")
    if values["data"]["source"] == "file" and not values["data"]["path"]:
        raise ConfigError("data.path", "required when data.source = file")
    if values["metric"]["delta_hat"] is not None and values["metric"]["delta_hat"] <= 0:
        raise ConfigError("metric.delta_hat", "must be positive")
    return RunConfig(values, source)


def load_config(path=None, overrides=None):
    """Read an INI file (or defaults if ``path`` is None) and apply overrides."""
    raw = {}
    source = "<defaults>"
    if path is not None:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        try:
            with open(path) as fh:
                cp.read_file(fh)
        except configparser.Error as exc:
            raise ConfigError(str(path), f"malformed file: {exc}") from None
        raw = {s: dict(cp[s]) for s in cp.sections()}
        source = str(path)
    for dotted, text in (overrides or {}).items():
        sec, key = _split_key(dotted)
        raw.setdefault(sec, {})[key] = text
    return parse_config(raw, source)


def schema_text():
    """Human-readable listing of every key, its default and meaning."""
    lines = []
    for sec, spec in SCHEMA.items():
        lines.append(f"[{sec}]")
        for key, (_, default, choices, doc) in spec.items():
            ch = f" (one of: {', '.join(choices)})" if choices else ""
            lines.append(f"{key} = {_render(default)}    # {doc}{ch}")
        lines.append("")
    return "\n".join(lines)
