"""Experiment configuration: TOML parsing, validation, observable building.

Complex scalars are written as a bare real or as a two-element [re, im]
list.  Observables are named specs under [observables.<name>]:

    kind = "bump"         center = [re_z, im_z, re_w, im_w], radius, height
    kind = "coord"        which = re_z|im_z|re_w|im_w, cutoff_radius
    kind = "holder_cusp"  center, gamma
    kind = "sum"          terms = [{name, weight, shift?}, ...]
    kind = "product"      factors = [name, name]

A sum term's optional integer ``shift`` composes the named observable with
f^shift at evaluation time (shift = 1 with weight -1 builds coboundaries).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib  # py >= 3.11
except ImportError:  # pragma: no cover
    import tomli as tomllib

from . import observables as obs
from .henon import ElementaryFactor, HenonMap, Point


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


@dataclass
class ExperimentConfig:
    raw: dict
    map: HenonMap
    observables: dict = field(default_factory=dict)

    @property
    def sampler(self) -> dict:
        return self.raw.get("sampler", {})

    @property
    def mixing(self) -> dict:
        return self.raw.get("mixing", {})

    @property
    def clt(self) -> dict:
        return self.raw.get("clt", {})

    @property
    def green(self) -> dict:
        return self.raw.get("green", {})

    def fingerprint(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _as_complex(value, key: str) -> complex:
    if isinstance(value, (int, float)):
        return complex(value)
    if (
        isinstance(value, list)
        and len(value) == 2
        and all(isinstance(v, (int, float)) for v in value)
    ):
        return complex(value[0], value[1])
    raise ConfigError(f"{key}: expected a real number or [re, im], got {value!r}")


def _require(table: dict, key: str, path: str):
    if key not in table:
        raise ConfigError(f"{path}.{key}: missing required key")
    return table[key]


def _check_range(value, key: str, lo=None, hi=None, integer=False):
    if integer and not isinstance(value, int):
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    if not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if lo is not None and value < lo:
        raise ConfigError(f"{key}: must be >= {lo}, got {value}")
    if hi is not None and value > hi:
        raise ConfigError(f"{key}: must be <= {hi}, got {value}")
    return value


def parse_map(table: dict) -> HenonMap:
    factors_spec = _require(table, "factors", "map")
    if not isinstance(factors_spec, list) or not factors_spec:
        raise ConfigError("map.factors: expected a nonempty list of factor tables")
    factors = []
    for i, spec in enumerate(factors_spec):
        path = f"map.factors[{i}]"
        a = _as_complex(_require(spec, "a", path), f"{path}.a")
        p = _require(spec, "p", path)
        if not isinstance(p, list) or len(p) < 3:
            raise ConfigError(
                f"{path}.p: a factor polynomial needs degree >= 2 "
                "(elementary automorphisms preserve a line fibration and are "
                "outside this tool's scope)"
            )
        coeffs = tuple(_as_complex(c, f"{path}.p[{j}]") for j, c in enumerate(p))
        if a == 0:
            raise ConfigError(
                f"{path}.a: must be nonzero (a = 0 degenerates to an "
                "elementary, non-invertible map)"
            )
        if coeffs[-1] != 1:
            raise ConfigError(
                f"{path}.p: leading coefficient must be exactly 1, got {coeffs[-1]}"
            )
        factors.append(ElementaryFactor(coeffs, a))
    return HenonMap(tuple(factors))


def _point4(value, key: str) -> Point:
    if not (isinstance(value, list) and len(value) == 4):
        raise ConfigError(f"{key}: expected [re_z, im_z, re_w, im_w]")
    return Point(complex(value[0], value[1]), complex(value[2], value[3]))


def build_observables(table: dict, fmap: HenonMap) -> dict:
    built: dict = {}

    def build(name: str, stack=()):
        if name in built:
            return built[name]
        if name in stack:
            raise ConfigError(f"observables.{name}: circular reference")
        if name not in table:
            raise ConfigError(f"observables.{name}: referenced but not defined")
        spec = table[name]
        path = f"observables.{name}"
        kind = _require(spec, "kind", path)
        if kind == "bump":
            g = obs.make_bump(
                _point4(_require(spec, "center", path), f"{path}.center"),
                _check_range(_require(spec, "radius", path), f"{path}.radius", lo=1e-12),
                float(spec.get("height", 1.0)),
            )
        elif kind == "coord":
            which = _require(spec, "which", path)
            if which not in ("re_z", "im_z", "re_w", "im_w"):
                raise ConfigError(f"{path}.which: unknown coordinate {which!r}")
            g = obs.coordinate(
                which,
                _check_range(
                    _require(spec, "cutoff_radius", path),
                    f"{path}.cutoff_radius",
                    lo=1e-12,
                ),
            )
        elif kind == "holder_cusp":
            g = obs.holder_cusp(
                _point4(_require(spec, "center", path), f"{path}.center"),
                _check_range(_require(spec, "gamma", path), f"{path}.gamma",
                             lo=1e-9, hi=2.0),
            )
        elif kind == "sum":
            terms = _require(spec, "terms", path)
            parts, weights = [], []
            for j, term in enumerate(terms):
                base = build(_require(term, "name", f"{path}.terms[{j}]"),
                             stack + (name,))
                shift = term.get("shift", 0)
                if shift:
                    base = obs.pullback(base, fmap, int(shift))
                parts.append(base)
                weights.append(float(term.get("weight", 1.0)))
            g = obs.combine(parts, weights)
        elif kind == "product":
            names = _require(spec, "factors", path)
            if not isinstance(names, list) or len(names) < 2:
                raise ConfigError(f"{path}.factors: need at least two names")
            g = build(names[0], stack + (name,))
            for other in names[1:]:
                g = obs.product(g, build(other, stack + (name,)))
        else:
            raise ConfigError(f"{path}.kind: unknown kind {kind!r}")
        g.name = name
        built[name] = g
        return g

    for name in table:
        build(name)
    return built


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: not valid TOML: {exc}") from exc
    return parse_config(raw)


def parse_config(raw: dict) -> ExperimentConfig:
    if "map" not in raw:
        raise ConfigError("map: missing section")
    fmap = parse_map(raw["map"])
    cfg = ExperimentConfig(raw=raw, map=fmap)
    cfg.observables = build_observables(raw.get("observables", {}), fmap)
    sampler = raw.get("sampler", {})
    if sampler:
        _check_range(sampler.get("period", 1), "sampler.period", lo=1, integer=True)
        _check_range(sampler.get("budget", 1), "sampler.budget", lo=1, integer=True)
        _check_range(sampler.get("box", 1.0), "sampler.box", lo=1e-9)
        _check_range(sampler.get("tol", 1e-11), "sampler.tol", lo=1e-15, hi=1e-3)
        _check_range(sampler.get("rng_seed", 0), "sampler.rng_seed", lo=0, integer=True)
    mixing = raw.get("mixing", {})
    if mixing:
        _check_range(_require(mixing, "kappa", "mixing"), "mixing.kappa",
                     lo=1, integer=True)
        _check_range(mixing.get("gamma", 2.0), "mixing.gamma", lo=1e-9, hi=2.0)
        gaps = _require(mixing, "gaps", "mixing")
        if not isinstance(gaps, list) or not gaps or any(
            not isinstance(g, int) or g < 1 for g in gaps
        ):
            raise ConfigError("mixing.gaps: expected a list of positive integers")
        names = _require(mixing, "observables", "mixing")
        if len(names) != mixing["kappa"] + 1:
            raise ConfigError(
                f"mixing.observables: kappa={mixing['kappa']} needs exactly "
                f"{mixing['kappa'] + 1} names, got {len(names)}"
            )
        for nm in names:
            if nm not in cfg.observables:
                raise ConfigError(f"mixing.observables: {nm!r} is not defined")
    cltsec = raw.get("clt", {})
    if cltsec:
        _check_range(cltsec.get("window", 8), "clt.window", lo=8, integer=True)
        _check_range(cltsec.get("truncation", 0), "clt.truncation", lo=0, integer=True)
        nm = _require(cltsec, "observable", "clt")
        if nm not in cfg.observables:
            raise ConfigError(f"clt.observable: {nm!r} is not defined")
    green = raw.get("green", {})
    if green:
        window = green.get("window", [-3.0, 3.0, -3.0, 3.0])
        if not (isinstance(window, list) and len(window) == 4):
            raise ConfigError("green.window: expected [re_z_min, re_z_max, re_w_min, re_w_max]")
        if window[0] >= window[1] or window[2] >= window[3]:
            raise ConfigError("green.window: min must be below max on both axes")
        res = green.get("resolution", [64, 64])
        if not (isinstance(res, list) and len(res) == 2 and all(
            isinstance(r, int) and r >= 2 for r in res
        )):
            raise ConfigError("green.resolution: expected two integers >= 2")
        _check_range(green.get("max_iter", 100), "green.max_iter", lo=1, integer=True)
    return cfg


# -- echo (round-trippable TOML emission) -----------------------------------


def _toml_scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int,)):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, list):
        return "[" + ", ".join(_toml_scalar(x) for x in v) + "]"
    if isinstance(v, dict):
        inner = ", ".join(f"{k} = {_toml_scalar(x)}" for k, x in v.items())
        return "{" + inner + "}"
    raise TypeError(f"cannot emit {type(v)} as TOML")


def dump_toml(raw: dict) -> str:
    """Emit the parsed config subset back as TOML; parse(dump(x)) == x."""
    lines: list[str] = []

    def emit_table(table: dict, prefix: str):
        scalars = {
            k: v for k, v in table.items() if not isinstance(v, dict)
        }
        subtables = {k: v for k, v in table.items() if isinstance(v, dict)}
        if prefix and (scalars or not subtables):
            lines.append(f"[{prefix}]")
        for k, v in scalars.items():
            lines.append(f"{k} = {_toml_scalar(v)}")
        if scalars:
            lines.append("")
        for k, v in subtables.items():
            emit_table(v, f"{prefix}.{k}" if prefix else k)

    emit_table(raw, "")
    return "\n".join(lines).strip() + "\n"
