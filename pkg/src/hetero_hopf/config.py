"""Run configuration: a TOML document with dotted keys, plus ``--set`` overrides.

Example::

    m = "1+x"
    alpha = 0.0
    r = 1.0
    l = 5.5
    lambda = 0.01

    [grid]
    n = 128

    [pde]
    t_end = 4000.0

Every recognised key is listed in :data:`SCHEMA`. Unknown keys are rejected
with the line they appear on.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .reduced import ModelParams

_NONE = object()

# key -> (kind, default). kind is one of "float", "int", "str", "bool",
# "range" (start, stop, count) or "floats" (a list of floats).
SCHEMA: dict[str, tuple[str, object]] = {
    "m": ("str", _NONE),
    "allow_constant": ("bool", False),
    "alpha": ("float", 0.0),
    "theta": ("float", 1.0),
    "lambda": ("float", 0.01),
    "r": ("float", 1.0),
    "l": ("float", 2.0),
    "alpha_range": ("range", None),
    "l_range": ("range", None),
    "grid.n": ("int", 128),
    "quad.panels": ("int", 256),
    "quad.points_per_panel": ("int", 4),
    "ode.t_end": ("float", 4000.0),
    "ode.dt": ("float", None),
    "ode.u0": ("float", None),
    "ode.v0": ("float", None),
    "pde.t_end": ("float", 4000.0),
    "pde.dt": ("float", None),
    "pde.method": ("str", "imex"),
    "pde.u0": ("float", None),
    "pde.v0": ("float", None),
    "pde.perturbation": ("float", 0.01),
    "hopf.eps": ("float", 0.05),
    "hopf.l_min": ("float", None),
    "hopf.l_max": ("float", None),
    "hopf.lambdas": ("floats", None),
    "output.dir": ("str", "out"),
}


def _flatten(doc, prefix=""):
    out = {}
    for key, value in doc.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, dotted + "."))
        else:
            out[dotted] = value
    return out


_HEADER_RE = re.compile(r"^\s*\[\s*([A-Za-z0-9_.\s\"]+?)\s*\]\s*(#.*)?$")
_KEY_RE = re.compile(r"^\s*([A-Za-z0-9_.\s\"-]+?)\s*=")


def _normalise(key: str) -> str:
    return ".".join(part.strip().strip('"') for part in key.split("."))


def locate_key(text: str, dotted: str) -> int | None:
    """1-based line on which ``dotted`` is assigned, if it can be found."""
    table = ""
    for number, line in enumerate(text.splitlines(), start=1):
        header = _HEADER_RE.match(line)
        if header:
            table = _normalise(header.group(1))
            continue
        match = _KEY_RE.match(line)
        if match:
            key = _normalise(match.group(1))
            full = f"{table}.{key}" if table else key
            if full == dotted:
                return number
    return None


def _coerce(kind, value, key, line):
    def fail(expected):
        raise ConfigError(f"expected {expected}, got {value!r}", key=key, line=line)

    if value is None:
        return None
    if kind == "str":
        return value if isinstance(value, str) else fail("a string")
    if kind == "bool":
        return value if isinstance(value, bool) else fail("true or false")
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            fail("an integer")
        return int(value)
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            fail("a number")
        if not math.isfinite(value):
            fail("a finite number")
        return float(value)
    if kind == "floats":
        if not isinstance(value, list) or not value:
            fail("a non-empty list of numbers")
        return tuple(_coerce("float", v, key, line) for v in value)
    if kind == "range":
        if not isinstance(value, list) or len(value) != 3:
            fail("[start, stop, count]")
        start = _coerce("float", value[0], key, line)
        stop = _coerce("float", value[1], key, line)
        count = _coerce("int", value[2], key, line)
        if count < 1:
            fail("a positive count")
        if count == 1 and start != stop:
            fail("start == stop when count is 1")
        return (start, stop, count)
    raise AssertionError(kind)


def parse_override(item: str) -> tuple[str, object]:
    """``key=value`` with a TOML value; bare text is taken as a string."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    key = _normalise(key.strip())
    raw = raw.strip()
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw
    return key, value


@dataclass(frozen=True)
class RunConfig:
    values: dict = field(repr=False)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        value = self.values.get(key)
        return default if value is None else value

    @property
    def params(self) -> ModelParams:
        return ModelParams(
            alpha=self["alpha"], theta=self["theta"], lam=self["lambda"], r=self["r"], l=self["l"]
        )

    def canonical_json(self) -> str:
        """Resolved values minus the output location, as compact sorted JSON."""
        payload = {k: v for k, v in self.values.items() if k != "output.dir"}
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    def digest(self, length: int = 12) -> str:
        """Stable hash of the resolved configuration (defaults included)."""
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:length]


def range_values(bounds) -> list[float]:
    start, stop, count = bounds
    if count == 1:
        return [start]
    return [start + (stop - start) * i / (count - 1) for i in range(count)]


def build_config(text: str = "", overrides=()) -> RunConfig:
    """Parse ``text`` (TOML), apply ``overrides`` and fill defaults."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        if line is None:
            found = re.search(r"line (\d+)", str(exc))
            line = int(found.group(1)) if found else None
        raise ConfigError(f"malformed document: {exc}", line=line) from None

    raw = {}
    for key, value in _flatten(doc).items():
        line = locate_key(text, key)
        if key not in SCHEMA:
            raise ConfigError("unknown key", key=key, line=line)
        raw[key] = (value, line)
    for item in overrides:
        key, value = parse_override(item)
        if key not in SCHEMA:
            raise ConfigError("unknown key in --set", key=key)
        raw[key] = (value, None)

    values = {}
    for key, (kind, default) in SCHEMA.items():
        if key in raw:
            value, line = raw[key]
            values[key] = _coerce(kind, value, key, line)
        elif default is _NONE:
            raise ConfigError("required key is missing", key=key)
        else:
            values[key] = default

    if values["grid.n"] < 16:
        raise ConfigError("grid needs at least 16 cells", key="grid.n", line=raw.get("grid.n", (0, None))[1])
    if values["quad.panels"] < 1 or values["quad.points_per_panel"] < 1:
        raise ConfigError("quadrature sizes must be positive", key="quad.panels")
    if values["pde.method"] not in ("imex", "rk4"):
        raise ConfigError("expected 'imex' or 'rk4'", key="pde.method",
                          line=raw.get("pde.method", (0, None))[1])
    for key in ("ode.t_end", "pde.t_end", "ode.dt", "pde.dt", "hopf.eps"):
        if values[key] is not None and values[key] <= 0:
            raise ConfigError("must be positive", key=key, line=raw.get(key, (0, None))[1])

    config = RunConfig(values)
    try:
        config.params
    except ConfigError as exc:
        key = exc.key
        raise ConfigError(str(exc).split("] ", 1)[-1], key=key,
                          line=raw.get(key, (0, None))[1]) from None
    return config


def load_config(path, overrides=()) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return build_config(text, overrides)
