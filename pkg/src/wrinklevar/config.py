"""Strict ``key = value`` run configuration.

Blank lines and ``#`` comments are ignored.  Every key is optional; unknown
keys, malformed values and violated invariants raise :class:`ConfigError`
naming the key and line.
"""
from dataclasses import dataclass, field, fields, replace

from .constitutive import MaterialParams
from .discretization import SIDES, BoundarySpec, GridSpec, LoadSpec
from .minimizer import MinimizerConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SweepConfig:
    lambda_from: float = 1.0
    lambda_to: float = 1.3
    steps: int = 6

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not (self.lambda_from > 0 and self.lambda_to > 0):
            raise ValueError("stretches must be > 0")


@dataclass(frozen=True)
class VerifyConfig:
    samples_h1: int = 100_000
    samples_h2: int = 1_000_000
    workers: int = 1

    def __post_init__(self):
        if self.samples_h1 < 1 or self.samples_h2 < 1 or self.workers < 1:
            raise ValueError("sample counts and workers must be >= 1")


@dataclass(frozen=True)
class AnalysisConfig:
    n: float = 1e12
    test_functions: int = 20

    def __post_init__(self):
        if not self.n >= 1:
            raise ValueError("n must be >= 1")
        if self.test_functions < 1:
            raise ValueError("test_functions must be >= 1")


@dataclass(frozen=True)
class Boundary:
    stretch: float = 1.0
    clamped: tuple = ("left", "right")

    def __post_init__(self):
        BoundarySpec(self.clamped, self.stretch)

    def spec(self):
        return BoundarySpec(self.clamped, self.stretch)


@dataclass(frozen=True)
class Loads:
    m1: float = 0.0
    m2: float = 0.0
    b1: float = 0.0
    b2: float = 0.0
    b3: float = 0.0

    def spec(self):
        return LoadSpec(m=(self.m1, self.m2), b=(self.b1, self.b2, self.b3))


@dataclass(frozen=True)
class RunConfig:
    grid: GridSpec = field(default_factory=lambda: GridSpec(64, 32, 2.0, 1.0))
    material: MaterialParams = field(default_factory=MaterialParams)
    boundary: Boundary = field(default_factory=Boundary)
    loads: Loads = field(default_factory=Loads)
    minimizer: MinimizerConfig = field(default_factory=MinimizerConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    seed: int = 0
    out: str = "out"


SECTIONS = ("grid", "material", "boundary", "loads", "minimizer", "sweep",
            "verify", "analysis")
TOP_LEVEL = {"seed": int, "out": str}


def _optional(conv):
    def parse(text):
        return None if text.lower() in ("auto", "none") else conv(text)

    return parse


def _sides(text):
    parts = tuple(p.strip() for p in text.split(",") if p.strip())
    bad = [p for p in parts if p not in SIDES]
    if bad:
        raise ValueError(f"unknown side(s) {bad}")
    return parts


# key -> parser for each section field
PARSERS = {
    "grid": {"nx": int, "ny": int, "Lx": float, "Ly": float},
    "material": {"c1": float, "c2": float, "D": float, "nu": float},
    "boundary": {"stretch": float, "clamped": _sides},
    "loads": {k: float for k in ("m1", "m2", "b1", "b2", "b3")},
    "minimizer": {
        "gtol_rel": float, "gtol_abs": float, "max_iter": int, "memory": int,
        "backtrack": float, "armijo": float, "jmin": float,
        "delta": _optional(float), "mode": int, "backend": _optional(str),
    },
    "sweep": {"lambda_from": float, "lambda_to": float, "steps": int},
    "verify": {"samples_h1": int, "samples_h2": int, "workers": int},
    "analysis": {"n": float, "test_functions": int},
}


def _format(value):
    if value is None:
        return "auto"
    if isinstance(value, tuple):
        return ",".join(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config(text):
    cfg = RunConfig()
    overrides = {s: {} for s in SECTIONS}
    lines = {}
    top = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if key in lines:
            raise ConfigError(f"line {lineno}: {key}: duplicate key")
        lines[key] = lineno
        if key in TOP_LEVEL:
            conv, target = TOP_LEVEL[key], top
            name = key
        else:
            section, _, name = key.partition(".")
            if section not in PARSERS or name not in PARSERS[section]:
                raise ConfigError(f"line {lineno}: {key}: unknown key")
            conv, target = PARSERS[section][name], overrides[section]
        try:
            target[name] = conv(value)
        except ValueError as exc:
            raise ConfigError(
                f"line {lineno}: {key}: malformed value {value!r} ({exc})"
            ) from None
    if "seed" in top and top["seed"] < 0:
        raise ConfigError(f"line {lines['seed']}: seed: must be >= 0")

    built = {}
    for section in SECTIONS:
        base = getattr(cfg, section)
        try:
            built[section] = replace(base, **overrides[section])
        except ValueError as exc:
            culprit = _culprit(base, section, overrides[section])
            where = ", ".join(f"{section}.{k} (line {lines[f'{section}.{k}']})"
                              for k in culprit)
            raise ConfigError(f"{where}: invariant violated: {exc}") from None
    return replace(cfg, **built, **top)


def _culprit(base, section, overrides):
    """Keys that violate an invariant on their own, else all overridden keys."""
    single = []
    for k, v in overrides.items():
        try:
            replace(base, **{k: v})
        except ValueError:
            single.append(k)
    return single or list(overrides)


def serialize(cfg):
    out = []
    for section in SECTIONS:
        obj = getattr(cfg, section)
        for f in fields(obj):
            if f.name in PARSERS[section]:
                out.append(f"{section}.{f.name} = {_format(getattr(obj, f.name))}")
    out.append(f"seed = {cfg.seed}")
    out.append(f"out = {cfg.out}")
    return "\n".join(out) + "\n"


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())
