"""Plain-text experiment configs: `key = value` lines under [section] headers.

Deliberately not INI-compatible-by-library: the hand parser keeps line
numbers for every key so config errors can cite them, and values get the
numeric conveniences the experiment files want (2^-3, 2/3, inf).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .grid import GridSpec

SCENARIOS = (
    "E1-moment-decay",
    "E2-grand-maximal-constant",
    "E3-atom-image",
    "E4-cancellation",
    "E5-duality",
)


def parse_number(text: str) -> float:
    """Float with the config conveniences: 2^-3, 2/3, inf."""
    s = text.strip()
    try:
        if s in ("inf", "Inf", "INF"):
            return math.inf
        if "^" in s:
            base, exp = s.split("^", 1)
            return float(base) ** float(parse_number(exp))
        if "/" in s:
            num, den = s.split("/", 1)
            return float(num) / float(den)
        return float(s)
    except (ValueError, ZeroDivisionError) as e:
        raise ConfigError(f"cannot parse number {text!r}") from e


def parse_number_list(text: str) -> list[float]:
    items = [t for t in text.replace(";", ",").split(",") if t.strip()]
    return [parse_number(t) for t in items]


def parse_alpha_list(text: str) -> list[tuple[int, ...]]:
    """Multi-indices: '0, 1' (dim 1) or '(1,0); (0,1)' (dim 2)."""
    out = []
    s = text.strip()
    if "(" in s:
        chunks = [c for c in s.replace(")", ")|").split("|") if c.strip()]
        for c in chunks:
            c = c.strip().strip(";,").strip()
            inner = c.strip("()")
            out.append(tuple(int(v) for v in inner.split(",")))
    else:
        for c in s.replace(";", ",").split(","):
            if c.strip():
                out.append((int(c),))
    return out


@dataclass
class ConfigFile:
    path: str
    sections: dict[str, dict[str, tuple[str, int]]] = field(default_factory=dict)
    section_lines: dict[str, int] = field(default_factory=dict)

    def has(self, section: str, key: str) -> bool:
        return key in self.sections.get(section, {})

    def get(self, section: str, key: str, default=None, required: bool = False) -> str | None:
        try:
            return self.sections[section][key][0]
        except KeyError:
            if required:
                line = self.section_lines.get(section)
                where = f"{self.path}:{line}" if line else self.path
                raise ConfigError(
                    f"{where}: section [{section}] is missing required key {key!r}"
                ) from None
            return default

    def get_number(self, section: str, key: str, default=None, required: bool = False):
        raw = self.get(section, key, required=required)
        if raw is None:
            return default
        try:
            return parse_number(raw)
        except ConfigError:
            line = self.sections[section][key][1]
            raise ConfigError(f"{self.path}:{line}: bad number for {key!r}: {raw!r}") from None

    def get_int(self, section: str, key: str, default=None, required: bool = False):
        val = self.get_number(section, key, default=default, required=required)
        return None if val is None else int(val)

    def get_bool(self, section: str, key: str, default: bool = False) -> bool:
        raw = self.get(section, key)
        if raw is None:
            return default
        if raw.lower() in ("1", "yes", "true", "on"):
            return True
        if raw.lower() in ("0", "no", "false", "off"):
            return False
        line = self.sections[section][key][1]
        raise ConfigError(f"{self.path}:{line}: bad boolean for {key!r}: {raw!r}")


def load_config(path) -> ConfigFile:
    cfg = ConfigFile(str(path))
    section = None
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if not section:
                raise ConfigError(f"{path}:{lineno}: empty section header")
            cfg.sections.setdefault(section, {})
            cfg.section_lines.setdefault(section, lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        if section is None:
            raise ConfigError(f"{path}:{lineno}: key outside any [section]")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        cfg.sections[section][key] = (value, lineno)
    return cfg


@dataclass
class ExperimentConfig:
    """Validated scenario description driving the harness."""

    scenario: str
    grid: GridSpec
    seed: int
    out_dir: Path
    quiet: bool
    source: ConfigFile

    @classmethod
    def from_file(cls, path, out_dir=None, seed=None, grid_m=None, dim=None,
                  quiet: bool = False) -> "ExperimentConfig":
        cfg = load_config(path)
        if "experiment" not in cfg.sections:
            raise ConfigError(f"{path}: missing [experiment] section")
        scenario = cfg.get("experiment", "scenario", required=True)
        if scenario not in SCENARIOS:
            line = cfg.sections["experiment"]["scenario"][1]
            raise ConfigError(
                f"{path}:{line}: unknown scenario {scenario!r}; "
                f"choose one of {', '.join(SCENARIOS)}"
            )
        gdim = dim if dim is not None else cfg.get_int("grid", "dim", default=1)
        gm = grid_m if grid_m is not None else cfg.get_int("grid", "m", default=2048)
        gL = cfg.get_number("grid", "L", default=4.0)
        try:
            grid = GridSpec(gdim, gL, gm)
        except ValueError as e:
            raise ConfigError(f"{path}: bad [grid] section: {e}") from None
        the_seed = seed if seed is not None else cfg.get_int("experiment", "seed", default=0)
        out = out_dir or cfg.get("experiment", "out_dir", default=".")
        return cls(scenario=scenario, grid=grid, seed=the_seed,
                   out_dir=Path(out), quiet=quiet, source=cfg)

    def ladder(self, key: str = "r_ladder", require_small: bool = True,
               default: str | None = None) -> list[float]:
        raw = self.source.get("scenario", key, default=default,
                              required=default is None)
        vals = parse_number_list(raw)
        if any(b >= a for a, b in zip(vals, vals[1:])):
            raise ConfigError(f"{self.source.path}: {key} must be strictly decreasing")
        if require_small and any(v >= 1 for v in vals):
            raise ConfigError(f"{self.source.path}: {key} requires every r < 1")
        if not vals:
            raise ConfigError(f"{self.source.path}: {key} is empty")
        return vals
