"""Per-class task hyperparameters and their INI representation.

A config file looks like::

    [task]
    name = bottle
    n_max = 3
    gradient_mode = source

    [patch]
    h_min = 0.06
    ...

    [background]          # omit the whole section to disable the constraints
    b = 200
    t_brightness = 60
    t_object = 0.7
    t_overlap = 0.25

Fractions such as ``k = 1/12`` are accepted wherever a number is expected.
"""

from __future__ import annotations

import configparser
import dataclasses
import re
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

GRADIENT_MODES = ("source", "mixed")
SHAPE_MODES = ("rect", "ellipse_union")
SELECTION_MODES = ("nsa", "cutpaste_style", "fpi_style")
PREPROCESS_MODES = ("object", "texture", "cxr", "none")

MVTEC_CLASSES = (
    "bottle", "cable", "capsule", "hazelnut", "metal_nut", "pill", "screw",
    "toothbrush", "transistor", "zipper", "carpet", "grid", "leather", "tile", "wood",
)
CXR_CLASSES = ("rcxr_male", "rcxr_female")


class ConfigError(ValueError):
    """Invalid config; ``diagnostics`` holds ``path:line: message`` strings."""

    def __init__(self, diagnostics: list[str]):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(self.diagnostics))


@dataclass(frozen=True)
class ClassConfig:
    name: str = "custom"
    n_max: int = 3
    h_min: float = 0.06
    h_max: float = 0.8
    w_min: float = 0.06
    w_max: float = 0.8
    background_b: float | None = None
    t_brightness: float | None = None
    t_object: float | None = None
    t_overlap: float | None = None
    s_min: float = 0.7
    s_max: float = 1.3
    logistic_y0: float = 24.0
    logistic_k: float = 1 / 12
    gradient_mode: str = "source"
    shape_mode: str = "rect"
    selection_mode: str = "nsa"
    preprocess_mode: str = "object"
    rotate_max: float = 0.0

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ConfigError([f"{self.name}: {p}" for _, p in problems])

    @property
    def constrained(self) -> bool:
        return self.background_b is not None

    def problems(self) -> list[tuple[str, str]]:
        """``(field, message)`` for every violated invariant."""
        out = []
        if self.n_max < 1:
            out.append(("n_max", f"n_max must be >= 1, got {self.n_max}"))
        for lo, hi in (("w_min", "w_max"), ("h_min", "h_max")):
            a, b = getattr(self, lo), getattr(self, hi)
            if not 0 < a <= 1:
                out.append((lo, f"{lo} must be in (0, 1], got {a}"))
            if not 0 < b <= 1:
                out.append((hi, f"{hi} must be in (0, 1], got {b}"))
            if a > b:
                out.append((lo, f"{lo} = {a} exceeds {hi} = {b}"))
        if not self.s_min <= 1 <= self.s_max:
            out.append(("s_min", f"scale bounds must satisfy s_min <= 1 <= s_max, got [{self.s_min}, {self.s_max}]"))
        if self.s_min <= 0:
            out.append(("s_min", "s_min must be positive"))
        if self.logistic_k <= 0:
            out.append(("logistic_k", f"logistic k must be positive, got {self.logistic_k}"))
        bg = (self.background_b, self.t_brightness, self.t_object, self.t_overlap)
        if any(v is None for v in bg) and not all(v is None for v in bg):
            out.append(("background_b", "background constraints must be given all together or not at all"))
        if self.background_b is not None:
            for name in ("background_b", "t_brightness"):
                v = getattr(self, name)
                if v is not None and not 0 <= v <= 255:
                    out.append((name, f"{name} must be in [0, 255], got {v}"))
            for name in ("t_object", "t_overlap"):
                v = getattr(self, name)
                if v is not None and not 0 <= v <= 1:
                    out.append((name, f"{name} must be in [0, 1], got {v}"))
        for name, allowed in (
            ("gradient_mode", GRADIENT_MODES),
            ("shape_mode", SHAPE_MODES),
            ("selection_mode", SELECTION_MODES),
            ("preprocess_mode", PREPROCESS_MODES),
        ):
            if getattr(self, name) not in allowed:
                out.append((name, f"{name} must be one of {', '.join(allowed)}, got {getattr(self, name)!r}"))
        if self.rotate_max < 0:
            out.append(("rotate_max", "rotate_max must be non-negative"))
        return out

    def replace(self, **changes) -> "ClassConfig":
        return dataclasses.replace(self, **changes)

    def without_constraints(self) -> "ClassConfig":
        return self.replace(background_b=None, t_brightness=None, t_object=None, t_overlap=None)


# (section, key) -> field name, in serialization order
_LAYOUT = [
    ("task", "name", "name"),
    ("task", "n_max", "n_max"),
    ("task", "gradient_mode", "gradient_mode"),
    ("task", "shape_mode", "shape_mode"),
    ("task", "selection_mode", "selection_mode"),
    ("patch", "h_min", "h_min"),
    ("patch", "h_max", "h_max"),
    ("patch", "w_min", "w_min"),
    ("patch", "w_max", "w_max"),
    ("background", "b", "background_b"),
    ("background", "t_brightness", "t_brightness"),
    ("background", "t_object", "t_object"),
    ("background", "t_overlap", "t_overlap"),
    ("scale", "s_min", "s_min"),
    ("scale", "s_max", "s_max"),
    ("logistic", "y0", "logistic_y0"),
    ("logistic", "k", "logistic_k"),
    ("preprocess", "mode", "preprocess_mode"),
    ("preprocess", "rotate_max", "rotate_max"),
]
_FIELD_OF = {(s, k): f for s, k, f in _LAYOUT}
_KEY_OF = {f: (s, k) for s, k, f in _LAYOUT}
_STRING_FIELDS = {"name", "gradient_mode", "shape_mode", "selection_mode", "preprocess_mode"}


def _number(text: str) -> float:
    return float(Fraction(text.strip()))


def _format_number(value: float) -> str:
    if float(value).is_integer():
        return str(int(value))
    frac = Fraction(value).limit_denominator(1000)
    if float(frac) == value and frac.denominator != 1 and frac.numerator == 1:
        return f"{frac.numerator}/{frac.denominator}"
    return repr(float(value))


def _line_index(text: str) -> dict[tuple[str | None, str | None], int]:
    """Map ``(section, key)`` and ``(section, None)`` to 1-based line numbers."""
    lines = {}
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            lines.setdefault((section, None), no)
            continue
        m = re.match(r"([^=:#;\s]+)\s*[=:]", line)
        if m:
            lines.setdefault((section, m.group(1).strip().lower()), no)
    return lines


def parse_config(text: str, source: str = "<string>") -> ClassConfig:
    """Parse INI text into a :class:`ClassConfig`; raise :class:`ConfigError` with line anchors."""
    lines = _line_index(text)
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError([f"{source}: {exc}"]) from exc

    diagnostics = []
    values = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            anchor = f"{source}:{lines.get((section, key), lines.get((section, None), 0))}"
            name = _FIELD_OF.get((section, key))
            if name is None:
                diagnostics.append(f"{anchor}: unknown key '{key}' in section [{section}]")
                continue
            if name in _STRING_FIELDS:
                values[name] = raw.strip()
                continue
            try:
                num = _number(raw)
            except (ValueError, ZeroDivisionError):
                diagnostics.append(f"{anchor}: '{key}' expects a number, got {raw!r}")
                continue
            if name == "n_max":
                if not num.is_integer():
                    diagnostics.append(f"{anchor}: n_max must be an integer, got {raw!r}")
                    continue
                num = int(num)
            values[name] = num
    if diagnostics:
        raise ConfigError(diagnostics)

    probe = object.__new__(ClassConfig)
    for f in dataclasses.fields(ClassConfig):
        object.__setattr__(probe, f.name, values.get(f.name, f.default))
    problems = probe.problems()
    if problems:
        out = []
        for fname, message in problems:
            section, key = _KEY_OF[fname]
            line = lines.get((section, key), lines.get((section, None), 0))
            out.append(f"{source}:{line}: {message}")
        raise ConfigError(out)
    return ClassConfig(**values)


def serialize_config(cfg: ClassConfig) -> str:
    out = []
    current = None
    for section, key, name in _LAYOUT:
        value = getattr(cfg, name)
        if section == "background" and not cfg.constrained:
            continue
        if section != current:
            if current is not None:
                out.append("")
            out.append(f"[{section}]")
            current = section
        text = value if name in _STRING_FIELDS else _format_number(value)
        out.append(f"{key} = {text}")
    return "\n".join(out) + "\n"


def validate_config(path) -> ClassConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"{path}: cannot read config: {exc.strerror}"]) from exc
    return parse_config(text, source=str(path))


def shipped_config_names() -> list[str]:
    return list(MVTEC_CLASSES + CXR_CLASSES)


def shipped_config_path(name: str) -> Path:
    ref = resources.files("nsa_forge") / "configs" / f"{name}.ini"
    return Path(str(ref))


def load_config(name_or_path) -> ClassConfig:
    """Load a config from a path, or by shipped class name (``bottle``, ``rcxr_male``, ...)."""
    path = Path(name_or_path)
    if not path.exists() and str(name_or_path) in shipped_config_names():
        path = shipped_config_path(str(name_or_path))
    return validate_config(path)
