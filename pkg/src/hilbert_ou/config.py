"""Experiment configuration: an INI file with one section per suite.

Parsing uses :mod:`configparser`; a separate scan of the text records the line
of every section and key so validation errors can point at the offending line.
Keys left out take the values of the bundled reference configuration.

Catalog selections are written ``name key=value ...``: vectors as ``1,0.5``,
matrices as ``1,0.3;0.2,1``, and an optional ``profile=`` time profile.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .commutator import ExponentTriple
from .cylinder import FIELD_CATALOG, FUNCTION_CATALOG, PROFILES, make_field, make_function
from .errors import ConfigError
from .spectral import build_spectrum

REFERENCE = "reference.ini"

# section -> key -> (type, default); defaults mirror data/reference.ini
SCHEMA = {
    "run": {
        "seed": ("int", 20240917),
        "horizon": ("float", 1.0),
        "time_nodes": ("int", 17),
        "out": ("str", "reports"),
    },
    "spectrum": {
        "family": ("str", "power-law"),
        "gamma": ("float", 2.0),
        "n": ("int", 64),
        "values": ("floats", None),
    },
    "exponents": {"p": ("float", 4.0), "r": ("float", 4.0), "s": ("float", 2.0)},
    "semigroup": {
        "samples": ("int", 200_000),
        "eps": ("floats", [1.0, 0.1, 0.01]),
        "functions": ("names", ["sine", "tanh", "gauss", "bump", "sign", "linear"]),
        "rotation_samples": ("int", 100_000),
        "rotation_eps": ("floats", [0.05, 0.5]),
        "smoothing_eps": ("floats", list(np.logspace(-3, 0, 7))),
        "smoothing_samples": ("int", 20_000),
        "gradient_probes": ("int", 64),
    },
    "commutator": {
        "eps": ("floats", [0.4, 0.2, 0.1, 0.05, 0.01]),
        "xi_nodes": ("int", 33),
        "draws": ("int", 20),
        "draw_eps": ("floats", [0.05, 0.2, 1.0]),
        "outer_samples": ("int", 2000),
        "gh_levels": ("int", 12),
        "function": ("catalog_u", "sine w=1,0.5"),
        "field": ("catalog_F", "sine amp=1,0.5 W=1,0.3;0.2,1"),
    },
    "identities": {
        "samples": ("int", 1_000_000),
        "random_forms": ("int", 10),
        "nonsymmetric_forms": ("int", 3),
        "form_dim": ("int", 6),
        "eps": ("floats", [0.1, 0.3]),
        "divq_samples": ("int", 200_000),
        "divq_p": ("floats", [1.5, 2.0, 3.0]),
    },
    "transport": {
        "particles": ("int", 20_000),
        "time_nodes": ("int", 65),
        "rtol": ("float", 1e-8),
        "probes": ("int", 64),
        "zeta_shift": ("floats", None),
    },
    "range": {
        "source": ("catalog_u", "sine w=1,0.5 profile=vanish"),
        "field": ("catalog_F", "sine amp=1,0.5 W=1,0.3;0.2,1"),
        "approx_dim": ("int", 2),
        "eps": ("floats", [0.4, 0.2, 0.1, 0.05, 0.01]),
        "outer_samples": ("int", 256),
        "gh_levels": ("int", 10),
        "time_nodes": ("int", 9),
    },
}


@dataclass
class CatalogChoice:
    name: str
    profile: str
    params: dict
    text: str

    def build_function(self, horizon):
        return make_function(self.name, profile=self.profile, horizon=horizon, **self.params)

    def build_field(self, horizon):
        return make_field(self.name, profile=self.profile, horizon=horizon, **self.params)


@dataclass
class ExperimentConfig:
    values: dict
    lines: dict = field(default_factory=dict)
    source: str = "<reference>"

    def __getitem__(self, key):
        section, name = key.split(".", 1)
        return self.values[section][name]

    @property
    def seed(self):
        return self["run.seed"]

    @property
    def horizon(self):
        return self["run.horizon"]

    @property
    def exponents(self):
        return ExponentTriple(self["exponents.p"], self["exponents.r"], self["exponents.s"])

    def spectrum(self):
        if self["spectrum.family"] == "explicit":
            return build_spectrum("explicit", values=self["spectrum.values"])
        return build_spectrum("power-law", self["spectrum.n"], gamma=self["spectrum.gamma"])

    def time_grid(self, nodes=None):
        return np.linspace(0.0, self.horizon, nodes or self["run.time_nodes"])

    def canonical(self):
        """Sorted ``section.key = value`` lines (written next to the reports)."""
        out = []
        for sec in SCHEMA:
            for key in SCHEMA[sec]:
                v = self.values[sec][key]
                if isinstance(v, CatalogChoice):
                    v = v.text
                elif isinstance(v, list):
                    v = ", ".join(repr(x) if isinstance(x, float) else str(x) for x in v)
                out.append(f"{sec}.{key} = {v}")
        return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# value parsing


def _number(tok):
    return float(tok)


def _param_value(text):
    if ";" in text:
        return [[_number(x) for x in row.split(",")] for row in text.split(";")]
    if "," in text:
        return [_number(x) for x in text.split(",")]
    try:
        return _number(text)
    except ValueError:
        return text


def parse_catalog(text, kind):
    toks = text.split()
    if not toks:
        raise ValueError("empty catalog selection")
    name = toks[0]
    table = FUNCTION_CATALOG if kind == "u" else FIELD_CATALOG
    if name not in table:
        raise ValueError(f"unknown {'function' if kind == 'u' else 'field'} catalog entry {name!r}; choose from {sorted(table)}")
    profile, params = "one", {}
    for tok in toks[1:]:
        if "=" not in tok:
            raise ValueError(f"catalog parameter {tok!r} is not key=value")
        k, v = tok.split("=", 1)
        if k == "profile":
            if v not in PROFILES:
                raise ValueError(f"unknown time profile {v!r}")
            profile = v
        else:
            params[k] = _param_value(v)
    choice = CatalogChoice(name, profile, params, " ".join(toks))
    try:
        (choice.build_function if kind == "u" else choice.build_field)(1.0)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"cannot build {name!r}: {exc}") from None
    return choice


def _convert(kind, raw):
    raw = raw.strip()
    if kind == "int":
        v = int(raw)
        return v
    if kind == "float":
        return float(raw)
    if kind == "str":
        return raw
    if kind == "floats":
        if raw.lower() in ("", "none"):
            return None
        return [float(x) for x in raw.replace(";", ",").split(",") if x.strip()]
    if kind == "names":
        return [x.strip() for x in raw.split(",") if x.strip()]
    if kind == "catalog_u":
        return parse_catalog(raw, "u")
    if kind == "catalog_F":
        return parse_catalog(raw, "F")
    raise AssertionError(kind)


_SECTION = re.compile(r"^\s*\[([^\]]+)\]")
_KEY = re.compile(r"^\s*([^\s=:#;\[][^=:]*?)\s*[=:]")


def _line_map(text):
    lines, section = {}, None
    for i, line in enumerate(text.splitlines(), start=1):
        m = _SECTION.match(line)
        if m:
            section = m.group(1).strip()
            lines.setdefault(section, i)
            continue
        m = _KEY.match(line)
        if m and section is not None and not line[:1].isspace():
            lines[f"{section}.{m.group(1).strip()}"] = i
    return lines


# ---------------------------------------------------------------------------
# loading


def reference_text():
    return resources.files("hilbert_ou").joinpath("data", REFERENCE).read_text()


def parse_config(text, source="<string>", overrides=()):
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if getattr(exc, "errors", None) else None
        raise ConfigError(f"cannot parse {source}: malformed line", line) from None
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {source}: {exc.message}", getattr(exc, "lineno", None)) from None
    lines = _line_map(text)
    values = {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in SCHEMA.items()}
    for sec in parser.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]", lines.get(sec))
        for key, raw in parser.items(sec):
            _assign(values, sec, key, raw, lines.get(f"{sec}.{key}"))
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        k, raw = item.split("=", 1)
        sec, key = k.strip().split(".", 1)
        if sec not in SCHEMA:
            raise ConfigError(f"override {item!r}: unknown section [{sec}]")
        _assign(values, sec, key, raw, None, origin=f"override {item!r}")
        lines[f"{sec}.{key}"] = "override"
    cfg = ExperimentConfig(values, lines, source)
    validate(cfg)
    return cfg


def _assign(values, sec, key, raw, line, origin=None):
    if key not in SCHEMA[sec]:
        msg = f"unknown key {key!r} in [{sec}]"
        raise ConfigError(f"{origin}: {msg}" if origin else msg, line)
    kind = SCHEMA[sec][key][0]
    try:
        values[sec][key] = _convert(kind, raw)
    except ValueError as exc:
        msg = f"{sec}.{key}: {exc}"
        raise ConfigError(f"{origin}: {msg}" if origin else msg, line) from None


def load_config(path=None, overrides=()):
    """Read ``path`` (the bundled reference when ``None``) and apply ``section.key=value`` overrides."""
    if path is None:
        return parse_config(reference_text(), "<reference>", overrides)
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(p), overrides)


def validate(cfg):
    def fail(msg, *keys):
        where = [cfg.lines.get(k) for k in keys if cfg.lines.get(k)]
        if "override" in where:
            raise ConfigError(f"{msg} (after --override)")
        raise ConfigError(msg, where[0] if where else None)

    v = cfg.values
    if v["spectrum"]["family"] not in ("power-law", "explicit"):
        fail("spectrum.family must be power-law or explicit", "spectrum.family")
    try:
        spec = cfg.spectrum()
    except (ValueError, TypeError) as exc:
        fail(f"invalid spectrum: {exc}", "spectrum.values", "spectrum.n", "spectrum.gamma", "spectrum.family")
    if not cfg.horizon > 0:
        fail("run.horizon must be positive", "run.horizon")
    p, r, s = v["exponents"]["p"], v["exponents"]["r"], v["exponents"]["s"]
    if p > 1 and r > 0 and s > 0:
        pd = p / (p - 1.0)
        if abs(1.0 / pd - (1.0 / r + 1.0 / s)) > 1e-12:
            fail(
                f"exponents violate 1/p' = 1/r + 1/s: 1/p' = {1 / pd:.6g} but 1/r + 1/s = {1 / r + 1 / s:.6g}",
                "exponents.s", "exponents.r", "exponents.p", "exponents",
            )
    try:
        cfg.exponents
    except ValueError as exc:
        fail(str(exc), "exponents.p", "exponents")
    for sec, keys in SCHEMA.items():
        for key, (kind, _) in keys.items():
            val = v[sec][key]
            where = f"{sec}.{key}"
            if kind == "int" and key != "seed" and val < 1:
                fail(f"{where} must be a positive count", where)
            if kind == "floats" and val is not None and key.endswith("eps"):
                arr = np.asarray(val)
                if arr.size == 0 or np.any(arr <= 0):
                    fail(f"{where} must be a nonempty list of positive values", where)
                d = np.diff(arr)
                if arr.size > 1 and not (np.all(d > 0) or np.all(d < 0)):
                    fail(f"{where} must be sorted", where)
    if v["run"]["seed"] < 0:
        fail("run.seed must be nonnegative", "run.seed")
    if v["commutator"]["xi_nodes"] % 4 != 1:
        fail("commutator.xi_nodes must be of the form 4k+1", "commutator.xi_nodes")
    if v["range"]["approx_dim"] > spec.n:
        fail("range.approx_dim exceeds the truncation dimension", "range.approx_dim")
    unknown = [n for n in v["semigroup"]["functions"] if n not in FUNCTION_CATALOG]
    if unknown:
        fail(f"unknown function catalog entries {unknown}", "semigroup.functions")
