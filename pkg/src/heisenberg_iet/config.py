"""Experiment configuration files.

Grammar: INI sections of ``key = value`` lines, ``#`` or ``;`` comments.
Values are strings, numbers, rationals ``p/q`` or arrays of those separated by
whitespace or commas.  No includes, no nesting.

    [surface]
    alphabet = A B C
    pi0 = A B C            # symbols left to right before the exchange
    pi1 = B C A            # ... and after it
    lambda = 2/5 3/10 3/10

    [suspension]
    tau = 2 -1 -1          # or: h = 2 2 2

    [bundle]
    b = 7/10 2/5 0         # or: b = sample
    seed = 0

    [run]                  # command parameters, see RUN_DEFAULTS
    n_max = 100

    [output]
    directory = out
    formats = json csv
"""

from __future__ import annotations

import configparser
import hashlib
import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .errors import ParseError, ValidationError
from .iet import IetSpec, parse_number, validate_iet

SECTIONS = ("surface", "suspension", "bundle", "run", "output")

# Parameters of every subcommand with their defaults; types follow the defaults.
RUN_DEFAULTS: dict[str, object] = {
    "x0": 0.1,
    "rho0": 0.0,
    "steps": 100,
    "starts": 1,
    "N": 100_000,
    "modes": [1, 2, 3, 4],
    "mode_f": 1,
    "mode_g": 1,
    "n_max": 100,
    "method": "grid",
    "samples": 100_000,
    "window": 0,
    "taper": "blackman",
    "lam_grid": 256,
    "lam": [0.1, 0.3, 0.7],
    "tower_heights": [100, 1000],
    "mode": 1,
    "basis_sizes": [8, 16, 32, 64],
    "orbit_length": 4096,
    "t_values": [0.001, 0.01, 0.1],
    "s": -1.0,
}

_SPLIT = re.compile(r"[\s,]+")


def _tokens(text: str) -> list[str]:
    return [t for t in _SPLIT.split(text.strip()) if t]


def _number(tok: str, where: str, line: int | None):
    try:
        return parse_number(tok)
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"not a number: {tok!r}", line=line, field=where) from None


def _coerce(default, raw: str, where: str, line: int | None):
    if isinstance(default, list):
        return [_coerce(default[0] if default else 0.0, t, where, line) for t in _tokens(raw)]
    if isinstance(default, bool):
        if raw.strip().lower() not in ("true", "false", "1", "0", "yes", "no"):
            raise ParseError(f"not a boolean: {raw!r}", line=line, field=where)
        return raw.strip().lower() in ("true", "1", "yes")
    if isinstance(default, int):
        try:
            return int(raw.strip())
        except ValueError:
            raise ParseError(f"not an integer: {raw!r}", line=line, field=where) from None
    if isinstance(default, float):
        v = _number(raw.strip(), where, line)
        return float(v)
    return raw.strip()


def _encode(v):
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return [_encode(x) for x in v]
    return v


@dataclass(frozen=True)
class ExperimentConfig:
    spec: IetSpec
    tau: tuple | None
    h: tuple | None
    b: tuple | str
    seed: int
    run: dict = field(default_factory=dict)
    output_dir: str = "out"
    formats: tuple[str, ...] = ("json", "csv")
    source: str | None = None

    def resolved(self) -> dict:
        """Semantic content of the configuration with every default filled in."""
        return {
            "surface": {
                "alphabet": list(self.spec.top),
                "pi0": list(self.spec.top),
                "pi1": list(self.spec.bottom),
                "lambda": _encode(list(self.spec.lengths)),
                "exact": self.spec.exact,
            },
            "suspension": {"tau": _encode(list(self.tau))} if self.tau is not None else {"h": _encode(list(self.h))},
            "bundle": {"b": self.b if isinstance(self.b, str) else _encode(list(self.b)), "seed": self.seed},
            "run": {k: _encode(v) for k, v in sorted(self.run.items())},
        }

    def echo(self) -> dict:
        out = self.resolved()
        out["output"] = {"directory": self.output_dir, "formats": list(self.formats)}
        return out

    def spec_hash(self) -> str:
        blob = json.dumps(self.resolved(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return ExperimentConfig(self.spec, self.tau, self.h, self.b, int(seed), self.run, self.output_dir, self.formats, self.source)


def _line_of(text: str, section: str, key: str) -> int | None:
    sec = None
    for i, ln in enumerate(text.splitlines(), 1):
        s = ln.strip()
        if s.startswith("[") and s.endswith("]"):
            sec = s[1:-1].strip().lower()
        elif sec == section and re.match(rf"{re.escape(key)}\s*[=:]", s, flags=re.IGNORECASE):
            return i
    return None


def parse_config_text(text: str, source: str | None = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source or "<config>")
    except configparser.Error as exc:
        raise ParseError(str(exc).splitlines()[0], line=getattr(exc, "lineno", None)) from None
    for sec in cp.sections():
        if sec.lower() not in SECTIONS:
            raise ParseError(f"unknown section [{sec}]", line=_line_of(text, sec.lower(), ""), field=sec)
    sections = {s.lower(): cp[s] for s in cp.sections()}
    if "surface" not in sections:
        raise ParseError("missing [surface] section", field="surface")
    surf = sections["surface"]
    for key in ("alphabet", "pi0", "pi1", "lambda"):
        if key not in surf:
            raise ParseError(f"missing surface.{key}", field=f"surface.{key}")
    alphabet = _tokens(surf["alphabet"])
    lam_tokens = _tokens(surf["lambda"])
    line = _line_of(text, "surface", "lambda")
    lengths = [_number(t, "surface.lambda", line) for t in lam_tokens]
    spec = validate_iet(alphabet, _tokens(surf["pi0"]), _tokens(surf["pi1"]), lengths)
    d = spec.d

    susp = sections.get("suspension")
    tau = h = None
    if susp is None or (("tau" in susp) == ("h" in susp)):
        raise ValidationError("exactly one of suspension.tau and suspension.h must be given")
    key = "tau" if "tau" in susp else "h"
    line = _line_of(text, "suspension", key)
    vec = tuple(_number(t, f"suspension.{key}", line) for t in _tokens(susp[key]))
    if len(vec) != d:
        raise ValidationError(f"suspension.{key} has {len(vec)} entries, expected {d}")
    if not all(isinstance(v, Fraction) for v in vec):
        vec = tuple(float(v) for v in vec)
    if key == "tau":
        tau = vec
    else:
        h = vec

    bund = sections.get("bundle", {})
    b_raw = bund.get("b", "sample").strip()
    try:
        seed = int(bund.get("seed", "0"))
    except ValueError:
        raise ParseError("bundle.seed must be an integer", line=_line_of(text, "bundle", "seed"), field="bundle.seed") from None
    if b_raw.lower() == "sample":
        b: tuple | str = "sample"
    else:
        line = _line_of(text, "bundle", "b")
        b = tuple(_number(t, "bundle.b", line) for t in _tokens(b_raw))
        if len(b) != d:
            raise ValidationError(f"bundle.b has {len(b)} entries, expected {d}")

    run = dict(RUN_DEFAULTS)
    for k, v in sections.get("run", {}).items():
        if k not in RUN_DEFAULTS:
            raise ParseError(f"unknown run parameter {k!r}", line=_line_of(text, "run", k), field=f"run.{k}")
        run[k] = _coerce(RUN_DEFAULTS[k], v, f"run.{k}", _line_of(text, "run", k))

    out = sections.get("output", {})
    formats = tuple(_tokens(out.get("formats", "json csv")))
    bad = [f for f in formats if f not in ("json", "csv")]
    if bad or not formats:
        raise ParseError(f"unknown output formats {bad}", line=_line_of(text, "output", "formats"), field="output.formats")
    return ExperimentConfig(spec, tau, h, b, seed, run, out.get("directory", "out").strip(), formats, source)


def parse_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ParseError(f"config file not found: {path}")
    return parse_config_text(p.read_text(), source=str(p))
