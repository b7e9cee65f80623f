"""Experiment configuration: INI-style text with a strict schema.

Example::

    [experiment]
    kind = spectrum
    seed = 7

    [cocycle]
    preset = constant
    zeros = 0.5

    [spectrum]
    K = 30
    steps = 2000

Every section and key is optional; unknown sections or keys are rejected.
Keys under ``[cocycle]`` depend on the preset (see ``PRESET_KEYS``).
Lists are comma separated, complex numbers use Python syntax (``0.4-0.1j``).
"""

from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

from .errors import ParseError, ValidationError

EXPERIMENTS = ("spectrum", "stability", "prevalence", "perturb", "verify")

PRESET_KEYS = {
    "constant": ("zeros", "alpha", "rho"),
    "rotating": ("radius", "alpha"),
    "cosine": ("center", "amplitude", "alpha"),
    "quarter_zero": ("height", "alpha"),
    "two_block": ("first", "second", "split", "alpha"),
    "disk_identity": ("radius",),
    "table": ("omegas", "values", "alpha"),
}


def _complex(s: str) -> complex:
    return complex(s.replace(" ", "").replace("i", "j"))


def _list(conv):
    def parse(s: str):
        items = [x.strip() for x in s.split(",") if x.strip()]
        if not items:
            raise ValueError("empty list")
        return tuple(conv(x) for x in items)
    return parse


def _seed(s: str) -> int:
    v = int(s)
    if not 0 <= v < 2**64:
        raise ValueError("seed must fit in an unsigned 64-bit integer")
    return v


# key -> (parser, check or None, description of the valid range)
_Check = Callable[[Any], bool]
_SCHEMA: dict[str, dict[str, tuple[Callable, _Check | None, str]]] = {
    "experiment": {
        "kind": (str, lambda v: v in EXPERIMENTS, f"one of {', '.join(EXPERIMENTS)}"),
        "seed": (_seed, None, "0 <= seed < 2^64"),
    },
    "cocycle": {
        "preset": (str, lambda v: v in PRESET_KEYS, f"one of {', '.join(PRESET_KEYS)}"),
        "zeros": (_list(_complex), lambda v: all(abs(z) < 1 for z in v), "moduli < 1"),
        "first": (_list(_complex), lambda v: all(abs(z) < 1 for z in v), "moduli < 1"),
        "second": (_list(_complex), lambda v: all(abs(z) < 1 for z in v), "moduli < 1"),
        "values": (_list(_complex), lambda v: all(abs(z) < 1 for z in v), "moduli < 1"),
        "omegas": (_list(float), lambda v: all(0 <= w < 1 for w in v), "values in [0, 1)"),
        "alpha": (float, lambda v: 0 < v < 1, "0 < alpha < 1"),
        "rho": (_complex, lambda v: abs(abs(v) - 1) < 1e-12, "|rho| = 1"),
        "radius": (float, lambda v: 0 <= v < 1, "0 <= radius < 1"),
        "center": (float, lambda v: abs(v) < 1, "|center| < 1"),
        "amplitude": (float, lambda v: v >= 0, "amplitude >= 0"),
        "height": (float, lambda v: 0 <= v < 1, "0 <= height < 1"),
        "split": (float, lambda v: 0 < v < 1, "0 < split < 1"),
    },
    "spectrum": {
        "K": (int, lambda v: 8 <= v <= 512, "8 <= K <= 512"),
        "steps": (int, lambda v: 1 <= v <= 10**7, "1 <= steps <= 10^7"),
        "burnin": (int, lambda v: 0 <= v <= 10**6, "0 <= burnin <= 10^6"),
        "m": (int, lambda v: v >= 1, "m >= 1"),
        "omega0": (float, lambda v: math.isfinite(v), "finite"),
    },
    "stability": {
        "grid": (int, lambda v: v == 0 or v >= 16, "0 (automatic) or >= 16"),
        "tolerance": (float, lambda v: v > 0, "tolerance > 0"),
        "R": (float, lambda v: 0 < v < 1, "0 < R < 1"),
    },
    "prevalence": {
        "epsilons": (_list(float), lambda v: all(e > 0 for e in v), "positive values"),
        "samples": (int, lambda v: 10**4 <= v <= 10**8, "10^4 <= samples <= 10^8"),
        "resolution": (int, lambda v: 8 <= v <= 4096, "8 <= resolution <= 4096"),
        "grid": (int, lambda v: v == 0 or v >= 16, "0 (automatic) or >= 16"),
    },
    "perturb": {
        "lambda": (_complex, lambda v: abs(v) < 1, "|lambda| < 1"),
        "omega0": (float, lambda v: math.isfinite(v), "finite"),
    },
    "output": {
        "dir": (str, lambda v: bool(v.strip()), "non-empty path"),
    },
}


@dataclass
class ExperimentConfig:
    experiment: str | None = None
    seed: int = 0
    preset: str = "constant"
    preset_params: dict[str, Any] = field(default_factory=dict)
    K: int = 30
    steps: int = 2000
    burnin: int = 50
    m: int = 5
    omega0: float = 0.0
    stability_grid: int = 0
    tolerance: float = 1e-9
    R: float = 0.5
    epsilons: tuple[float, ...] = (0.04, 0.02, 0.01, 0.005)
    samples: int = 100_000
    resolution: int = 512
    omega_grid: int = 0
    lam: complex | None = None
    lam_omega: float | None = None
    out_dir: str | None = None

    def to_dict(self) -> dict[str, Any]:
        """JSON-friendly echo (complex numbers as [re, im])."""
        def enc(v):
            if isinstance(v, complex):
                return [v.real, v.imag]
            if isinstance(v, (tuple, list)):
                return [enc(x) for x in v]
            if isinstance(v, dict):
                return {k: enc(x) for k, x in sorted(v.items())}
            return v
        return {k: enc(v) for k, v in asdict(self).items()}


_TARGET = {
    ("experiment", "kind"): "experiment", ("experiment", "seed"): "seed",
    ("spectrum", "K"): "K", ("spectrum", "steps"): "steps", ("spectrum", "burnin"): "burnin",
    ("spectrum", "m"): "m", ("spectrum", "omega0"): "omega0",
    ("stability", "grid"): "stability_grid", ("stability", "tolerance"): "tolerance",
    ("stability", "R"): "R",
    ("prevalence", "epsilons"): "epsilons", ("prevalence", "samples"): "samples",
    ("prevalence", "resolution"): "resolution", ("prevalence", "grid"): "omega_grid",
    ("perturb", "lambda"): "lam", ("perturb", "omega0"): "lam_omega",
    ("output", "dir"): "out_dir",
}


def _line_numbers(text: str) -> dict[tuple[str, str], int]:
    where: dict[tuple[str, str], int] = {}
    section = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            where[(section, "")] = n
        elif section is not None and ("=" in line or ":" in line):
            key = line.split("=", 1)[0] if "=" in line else line.split(":", 1)[0]
            where[(section, key.strip())] = n
    return where


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate configuration text.

    Raises ``ParseError`` for malformed text and ``ValidationError`` listing
    every offending key with its line number.
    """
    cp = configparser.ConfigParser(interpolation=None, default_section="\x00defaults")
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        msg = exc.message.splitlines()[0] if hasattr(exc, "message") else str(exc)
        raise ParseError(f"line {line}: {msg}" if line else msg, module="cli-runner",
                         operation="parse_config") from None
    lines = _line_numbers(text)
    problems: list[str] = []

    def at(section, key=""):
        n = lines.get((section, key))
        return f"line {n}: " if n else ""

    cfg = ExperimentConfig()
    for section in cp.sections():
        if section not in _SCHEMA:
            problems.append(f"{at(section)}unknown section [{section}]")
            continue
        allowed = _SCHEMA[section]
        for key, raw in cp.items(section):
            if key not in allowed:
                problems.append(f"{at(section, key)}unknown key '{key}' in [{section}]")
                continue
            conv, check, desc = allowed[key]
            try:
                value = conv(raw.strip())
            except (ValueError, TypeError):
                problems.append(f"{at(section, key)}[{section}] {key} = {raw!r} is not valid ({desc})")
                continue
            if check is not None and not check(value):
                problems.append(f"{at(section, key)}[{section}] {key} = {raw.strip()} out of range ({desc})")
                continue
            if section == "cocycle":
                if key == "preset":
                    cfg.preset = value
                else:
                    cfg.preset_params[key] = value
            else:
                setattr(cfg, _TARGET[(section, key)], value)

    allowed_params = PRESET_KEYS.get(cfg.preset, ())
    for key in sorted(cfg.preset_params):
        if key not in allowed_params:
            problems.append(f"{at('cocycle', key)}key '{key}' does not apply to preset '{cfg.preset}'")
    p = cfg.preset_params
    if cfg.preset == "cosine" and abs(p.get("center", 0.5)) + p.get("amplitude", 0.4) >= 1:
        problems.append(f"{at('cocycle', 'amplitude')}|center| + amplitude must stay below 1")
    if cfg.preset == "table":
        if "omegas" not in p or "values" not in p:
            problems.append(f"{at('cocycle')}preset 'table' needs both 'omegas' and 'values'")
        elif len(p["omegas"]) != len(p["values"]) or len(set(p["omegas"])) != len(p["omegas"]):
            problems.append(f"{at('cocycle', 'values')}'omegas' and 'values' need equal length "
                            "and distinct nodes")
    if cfg.m > 2 * cfg.K + 1:
        problems.append(f"{at('spectrum', 'm')}m = {cfg.m} exceeds the truncation dimension {2 * cfg.K + 1}")
    if cfg.lam is not None and cfg.lam_omega is not None:
        problems.append(f"{at('perturb', 'omega0')}give either 'lambda' or 'omega0', not both")
    if len(cfg.epsilons) < 2:
        problems.append(f"{at('prevalence', 'epsilons')}need at least two epsilons for a fit")
    if problems:
        raise ValidationError("; ".join(problems), problems, module="cli-runner", operation="parse_config")
    return cfg


def build_cocycle(cfg: ExperimentConfig):
    """Instantiate the configured preset."""
    from .presets import PRESETS

    params = dict(cfg.preset_params)
    if cfg.preset == "constant" and "rho" in params:
        params["rho"] = params["rho"] / abs(params["rho"])
    if cfg.preset == "table":
        params["omegas"], params["values"] = list(params["omegas"]), list(params["values"])
    try:
        return PRESETS[cfg.preset](**params)
    except ValueError as exc:
        raise ValidationError(f"preset '{cfg.preset}': {exc}", module="cli-runner",
                              operation="build_cocycle") from None
