"""Experiment configuration: JSON schema, validation, and construction helpers."""

import json
from dataclasses import dataclass, field as dc_field

from .fields import make_field
from .grid import AugmentedGrid, BoxPartition, CollocationTime, UlamTime

__all__ = ["ConfigError", "ExperimentConfig", "load_config"]


class ConfigError(ValueError):
    """Invalid experiment configuration; the message carries the JSON path."""


def _req(mapping, key, path, types=None):
    if key not in mapping:
        raise ConfigError(f"{path}.{key}: required key missing")
    val = mapping[key]
    if types is not None and not isinstance(val, types):
        raise ConfigError(f"{path}.{key}: expected {types}, got {type(val).__name__}")
    return val


def _opt(mapping, key, default, path, types=None):
    if key not in mapping:
        return default
    return _req(mapping, key, path, types)


@dataclass
class ExperimentConfig:
    """Validated experiment description (one config file = one experiment)."""

    raw: dict
    field_name: str
    field_params: dict
    eps: float
    counts: tuple
    scheme: str          # "ulam" | "hybrid"
    time_size: int       # slices (ulam) or modes (hybrid)
    quadrature: int
    time_rule: str
    eigs: dict = dc_field(default_factory=dict)
    extract: dict = dc_field(default_factory=dict)
    escape: dict = dc_field(default_factory=dict)
    flux: dict = dc_field(default_factory=dict)
    ulam_compare: dict = dc_field(default_factory=dict)
    threads: int = 1
    seed: int = 0
    output: str = "out"

    def make_field(self):
        return make_field(self.field_name, self.field_params)

    def make_grid(self, field):
        part = BoxPartition.for_field(field, self.counts)
        time = UlamTime(self.time_size) if self.scheme == "ulam" else CollocationTime(self.time_size)
        return AugmentedGrid(part, time, field.period)

    def grid_header(self):
        return {
            "field": self.field_name,
            "counts": "x".join(str(c) for c in self.counts),
            "scheme": self.scheme,
            "time_size": self.time_size,
            "eps": self.eps,
            "quadrature": self.quadrature,
            "seed": self.seed,
        }


def parse_config(doc):
    """Validate a parsed JSON document into an :class:`ExperimentConfig`."""
    if not isinstance(doc, dict):
        raise ConfigError("config: top level must be a JSON object")
    fld = _req(doc, "field", "config", dict)
    name = _req(fld, "name", "config.field", str)
    params = _opt(fld, "params", {}, "config.field", dict)
    try:
        field = make_field(name, params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config.field: {exc}") from exc

    eps = float(_req(doc, "eps", "config", (int, float)))
    if eps < 0:
        raise ConfigError("config.eps: must be >= 0")

    grid = _req(doc, "grid", "config", dict)
    counts = _req(grid, "counts", "config.grid", list)
    if len(counts) != field.dim or any(not isinstance(c, int) or c < 1 for c in counts):
        raise ConfigError(
            f"config.grid.counts: need {field.dim} positive integers for field {name!r}"
        )
    tspec = _req(grid, "time", "config.grid", dict)
    scheme = _req(tspec, "scheme", "config.grid.time", str)
    if scheme == "ulam":
        size = _req(tspec, "slices", "config.grid.time", int)
    elif scheme == "hybrid":
        size = _req(tspec, "modes", "config.grid.time", int)
        if size % 2 == 0:
            raise ConfigError("config.grid.time.modes: hybrid mode count must be odd")
    else:
        raise ConfigError(f"config.grid.time.scheme: unknown scheme {scheme!r}")
    if size < 1:
        raise ConfigError("config.grid.time: time resolution must be >= 1")

    quad = _opt(doc, "quadrature", 4, "config", int)
    time_rule = _opt(doc, "time_rule", "left", "config", str)
    if time_rule not in ("left", "midpoint", "average"):
        raise ConfigError(f"config.time_rule: unknown rule {time_rule!r}")

    eigs = _opt(doc, "eigs", {}, "config", dict)
    if eigs:
        k = _req(eigs, "k", "config.eigs", int)
        if k < 1:
            raise ConfigError("config.eigs.k: must be >= 1")
        mode = _opt(eigs, "mode", "smallest-magnitude", "config.eigs", str)
        if mode not in ("smallest-magnitude", "largest-real-part", "largest-magnitude"):
            raise ConfigError(f"config.eigs.mode: unknown mode {mode!r}")
        shifts = _opt(eigs, "shifts", [], "config.eigs", list)
        for i, s in enumerate(shifts):
            if not (isinstance(s, (int, float)) or (
                    isinstance(s, list) and len(s) == 2
                    and all(isinstance(v, (int, float)) for v in s))):
                raise ConfigError(f"config.eigs.shifts[{i}]: number or [re, im] pair expected")

    extract = _opt(doc, "extract", {}, "config", dict)
    if extract:
        idxs = _req(extract, "indices", "config.extract", list)
        if eigs and any(not isinstance(i, int) or i < 0 or i >= eigs["k"] for i in idxs):
            raise ConfigError("config.extract.indices: indices must lie in [0, eigs.k)")

    escape = _opt(doc, "escape", {}, "config", dict)
    if escape:
        for key in ("n", "end"):
            _req(escape, key, "config.escape", (int, float))
        if eigs and "index" in escape and not (0 <= escape["index"] < eigs["k"]):
            raise ConfigError("config.escape.index: must lie in [0, eigs.k)")

    flux = _opt(doc, "flux", {}, "config", dict)
    ulam_compare = _opt(doc, "ulam_compare", {}, "config", dict)

    threads = _opt(doc, "threads", 1, "config", int)
    if threads < 0:
        raise ConfigError("config.threads: must be >= 0 (0 = all cores)")
    seed = _opt(doc, "seed", 0, "config", int)
    output = _opt(doc, "output", "out", "config", str)

    return ExperimentConfig(
        raw=doc, field_name=name, field_params=params, eps=eps,
        counts=tuple(counts), scheme=scheme, time_size=size, quadrature=quad,
        time_rule=time_rule, eigs=eigs, extract=extract, escape=escape,
        flux=flux, ulam_compare=ulam_compare, threads=threads, seed=seed,
        output=output,
    )


def load_config(path):
    """Parse and validate a JSON experiment config file."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return parse_config(doc)
