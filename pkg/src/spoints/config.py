"""
Run configuration.

A run is described by one INI file (read with :mod:`configparser`)::

    [run]
    n = 24
    m = 1, 2
    scan_resolution = 32
    l_max = 2
    n_k = 256
    alpha_range = 0.2:0.8:0.2
    out = results

    [potential]
    shape = gaussian
    depth = -8
    width = 1

Several ``[potential ...]`` sections add components; ``potential_file`` under
``[run]`` points to a potential definition file instead. Command-line flags of
the same names override the file.
"""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import MalformedInputError
from .potentials import PotentialField, component_from_mapping, load_potential

__all__ = ["RunConfig", "load_config", "parse_alpha_range", "parse_m_list"]

N_MIN, N_MAX = 4, 48


def parse_m_list(text):
    try:
        ms = [int(t) for t in str(text).replace(",", " ").split()]
    except ValueError as exc:
        raise MalformedInputError(f"bad order list {text!r}") from exc
    if not ms or any(m < 1 or m > 3 for m in ms):
        raise MalformedInputError("orders m must lie in 1..3")
    return tuple(sorted(set(ms)))


def parse_alpha_range(text):
    """``'A:B:STEP'`` -> tuple of couplings from A to B inclusive."""
    try:
        a, b, step = (float(t) for t in str(text).split(":"))
    except ValueError as exc:
        raise MalformedInputError(f"alpha range must look like A:B:STEP, got {text!r}") from exc
    if step <= 0 or b < a or a < 0:
        raise MalformedInputError("alpha range needs 0 <= A <= B and STEP > 0")
    count = int(np.floor((b - a) / step + 1e-9)) + 1
    return tuple(round(a + i * step, 12) for i in range(count))


@dataclass(frozen=True)
class RunConfig:
    """Everything a batch run needs; immutable once validated."""

    potential: PotentialField
    potential_source: str = "inline"
    n: int = 24
    m: tuple = (1, 2)
    scan_resolution: int = 32
    scan_box: tuple | None = None
    l_max: int = 2
    k_max: float | None = None
    n_k: int = 256
    tau_conv: float = 1e-3
    tau_rel: float = 1e-3
    alpha_range: tuple = ()
    alpha_units: str = "critical"
    allow_critical: bool = False
    out: str = "results"
    self_term: str = "lattice"

    def __post_init__(self):
        if not N_MIN <= self.n <= N_MAX:
            raise MalformedInputError(f"grid resolution n must lie in [{N_MIN}, {N_MAX}]")
        if self.tau_conv <= 0 or self.tau_rel <= 0:
            raise MalformedInputError("thresholds must be positive")
        if self.scan_resolution < 2:
            raise MalformedInputError("scan resolution must be at least 2")
        if not 0 <= self.l_max <= 4:
            raise MalformedInputError("l_max must lie in 0..4")
        if self.n_k < 64:
            raise MalformedInputError("n_k must be at least 64")
        if self.k_max is not None and self.k_max <= 0:
            raise MalformedInputError("k_max must be positive")
        if self.alpha_units not in ("critical", "absolute"):
            raise MalformedInputError("alpha_units must be 'critical' or 'absolute'")

    def with_overrides(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)

    def as_dict(self):
        d = asdict(self)
        d["potential"] = self.potential.describe()
        d["m"] = list(self.m)
        d["alpha_range"] = list(self.alpha_range)
        d["scan_box"] = None if self.scan_box is None else [list(c) for c in self.scan_box]
        d.pop("out")   # output location does not change results
        return d


def _parse_box(text):
    vals = [float(t) for t in str(text).replace(",", " ").split()]
    if len(vals) != 6:
        raise MalformedInputError("scan_box needs six numbers: xmin ymin zmin xmax ymax zmax")
    return (tuple(vals[:3]), tuple(vals[3:]))


_FIELDS = {
    "n": int, "scan_resolution": int, "l_max": int, "n_k": int,
    "k_max": float, "tau_conv": float, "tau_rel": float,
    "m": parse_m_list, "alpha_range": parse_alpha_range, "scan_box": _parse_box,
    "alpha_units": str, "out": str, "self_term": str,
}


def load_config(path) -> RunConfig:
    """Read and validate a run configuration file."""
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise MalformedInputError(f"cannot read config {path}: {exc}") from exc
    run = parser["run"] if parser.has_section("run") else {}
    kw = {}
    try:
        for key, conv in _FIELDS.items():
            if key in run:
                kw[key] = conv(run[key].strip())
        if "allow_critical" in run:
            kw["allow_critical"] = parser.getboolean("run", "allow_critical")
    except ValueError as exc:
        if isinstance(exc, MalformedInputError):
            raise
        raise MalformedInputError(f"bad value in [run]: {exc}") from exc
    sections = [s for s in parser.sections() if s == "potential" or s.startswith("potential ")]
    if "potential_file" in run:
        pfile = Path(run["potential_file"].strip())
        if not pfile.is_absolute():
            pfile = path.parent / pfile
        potential = load_potential(pfile)
        source = str(pfile.name)
    elif sections:
        comps = [component_from_mapping(dict(parser[s]), base_dir=path.parent) for s in sections]
        potential = PotentialField(tuple(comps))
        source = "inline"
    else:
        raise MalformedInputError("config defines no potential")
    return RunConfig(potential=potential, potential_source=source, **kw)
