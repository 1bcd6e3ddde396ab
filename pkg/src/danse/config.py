"""Run manifests: YAML parsing with located errors, sweep cells, figure
presets and desk-scale reduction."""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from .ensemble import EnsembleSpec
from .errors import ConfigError, InvalidParameterError
from .model import INTEGRATORS, AbsorberSpec, SimulationConfig

log = logging.getLogger(__name__)

SWEEP_AXES = ("W", "g", "gamma", "L0")
FORMATS = ("csv", "json")
FLOAT_KEYS = ("W", "g", "gamma", "t_max", "dt_max", "t_min")
INT_KEYS = ("L", "L0", "samples_per_decade", "n_realizations", "seed")
TOP_KEYS = (
    "name", "L", "L0", "W", "g", "gamma", "t_max", "dt_max", "integrator", "absorber",
    "seed", "snapshot_times", "samples_per_decade", "t_min", "n_realizations", "freeze",
    "sweep", "zip", "out", "format", "scale",
)
ABSORBER_KEYS = ("n_abs", "amplitude", "shape")
PRESETS = ("fig1", "fig2", "fig3", "fig4", "fig5")
FULL_T_MAX = 1.0e5
FULL_REALIZATIONS = 500
DEFAULT_PRESET_SCALE = 0.1


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to execute a run: base config, ensemble size,
    sweep axes (cartesian, except axes listed in ``zip_axes`` which advance
    together) and output settings."""

    config: SimulationConfig = field(default_factory=SimulationConfig)
    n_realizations: int = 50
    freeze: tuple = ()
    sweep: dict = field(default_factory=dict)
    zip_axes: tuple = ()
    out: str = "out"
    format: str = "csv"
    name: str = "run"

    @property
    def master_seed(self) -> int:
        return int(self.config.seed)

    @property
    def ensemble(self) -> EnsembleSpec:
        return EnsembleSpec(self.config, self.n_realizations, self.master_seed, self.freeze)

    def axis_groups(self):
        """Sweep axes as groups: one tuple per independent (cartesian) factor."""
        groups = []
        zipped_done = False
        for axis in self.sweep:
            if axis in self.zip_axes:
                if not zipped_done:
                    groups.append(tuple(a for a in self.sweep if a in self.zip_axes))
                    zipped_done = True
            else:
                groups.append((axis,))
        return groups

    def cells(self):
        """List of (coords, SimulationConfig, seed) for every sweep cell."""
        groups = self.axis_groups()
        factors = []
        for grp in groups:
            factors.append([dict(zip(grp, vals)) for vals in zip(*(self.sweep[a] for a in grp))])
        out = []
        for combo in itertools.product(*factors) if factors else [()]:
            coords = {}
            for part in combo:
                coords.update(part)
            cfg = replace(self.config, **coords) if coords else self.config
            out.append((coords, cfg, cell_seed(self.master_seed, coords)))
        return out

    @property
    def n_cells(self) -> int:
        n = 1
        for grp in self.axis_groups():
            n *= len(self.sweep[grp[0]])
        return n

    def to_dict(self) -> dict:
        c = self.config
        d = {
            "name": self.name,
            "L": int(c.L), "L0": int(c.L0), "W": float(c.W), "g": float(c.g),
            "gamma": float(c.gamma), "t_max": float(c.t_max), "dt_max": float(c.dt_max),
            "integrator": c.integrator,
            "absorber": None if c.absorber is None else {
                "n_abs": int(c.absorber.n_abs), "amplitude": float(c.absorber.amplitude),
                "shape": c.absorber.shape},
            "seed": int(c.seed),
            "snapshot_times": [float(t) for t in c.snapshot_times],
            "samples_per_decade": int(c.samples_per_decade), "t_min": float(c.t_min),
            "n_realizations": int(self.n_realizations),
            "freeze": list(self.freeze),
            "sweep": {k: [_plain(v) for v in vals] for k, vals in self.sweep.items()},
            "zip": list(self.zip_axes),
            "out": str(self.out),
            "format": self.format,
        }
        return d

    def echo(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)


def _plain(v):
    return int(v) if isinstance(v, (int, np.integer)) else float(v)


def cell_seed(master_seed: int, coords: dict) -> int:
    """64-bit seed for one sweep cell, keyed by the master seed and the cell
    coordinates (not by its position in the grid)."""
    if not coords:
        return int(master_seed)
    blob = json.dumps({k: _plain(v) for k, v in sorted(coords.items())}, sort_keys=True)
    words = np.frombuffer(hashlib.sha256(blob.encode()).digest()[:16], dtype=np.uint32)
    seq = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFF, int(master_seed) >> 32, *map(int, words)])
    lo, hi = seq.generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)


# ---------------------------------------------------------------- parsing

def _key_lines(node, prefix=""):
    lines = {}
    if isinstance(node, yaml.MappingNode):
        for knode, vnode in node.value:
            key = prefix + str(knode.value)
            lines[key] = knode.start_mark.line + 1
            lines.update(_key_lines(vnode, key + "."))
    return lines


def _load(text: str, source: str):
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"malformed YAML: {getattr(exc, 'problem', exc)}",
                          line=mark.line + 1 if mark else None, source=source) from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", source=source)
    return data, _key_lines(node)


def _number(value, kind, key, where):
    if isinstance(value, bool):
        raise ConfigError(f"expected a number, got {value!r}", key, *where)
    if isinstance(value, str):
        try:
            value = float(value)
        except ValueError:
            raise ConfigError(f"expected a number, got {value!r}", key, *where) from None
    if not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", key, *where)
    if kind is int:
        if isinstance(value, int):
            return value
        if not float(value).is_integer():
            raise ConfigError(f"expected an integer, got {value!r}", key, *where)
        return int(value)
    return float(value)


def _validate(data: dict, lines: dict, source, base: dict | None = None) -> RunManifest:
    def where(key):
        return (lines.get(key), source)

    unknown = [k for k in data if k not in TOP_KEYS]
    if unknown:
        k = unknown[0]
        raise ConfigError(f"unknown key (allowed: {', '.join(TOP_KEYS)})", k, *where(k))

    vals = dict(base or {})
    vals.update(data)
    out = {}
    for key in INT_KEYS:
        if key in vals:
            out[key] = _number(vals[key], int, key, where(key))
    for key in FLOAT_KEYS:
        if key in vals:
            out[key] = _number(vals[key], float, key, where(key))
    for key in ("L", "L0"):
        if key in out and (out[key] < 1 or out[key] % 2 == 0):
            raise ConfigError(f"{key} must be odd and positive", key, *where(key))
    for key in ("W", "g", "gamma"):
        if key in out and out[key] < 0:
            raise ConfigError(f"{key} must be >= 0", key, *where(key))
    for key in ("t_max", "dt_max", "t_min"):
        if key in out and not out[key] > 0:
            raise ConfigError(f"{key} must be > 0", key, *where(key))
    if "seed" in out and not 0 <= out["seed"] < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer", "seed", *where("seed"))
    if "n_realizations" in out and out["n_realizations"] < 1:
        raise ConfigError("n_realizations must be >= 1", "n_realizations", *where("n_realizations"))

    integrator = vals.get("integrator", "split6")
    if integrator not in INTEGRATORS:
        raise ConfigError(f"integrator must be one of {INTEGRATORS}", "integrator", *where("integrator"))

    absorber = AbsorberSpec()
    if "absorber" in vals:
        raw = vals["absorber"]
        if raw in (None, False, "off", "none"):
            absorber = None
        elif isinstance(raw, dict):
            bad = [k for k in raw if k not in ABSORBER_KEYS]
            if bad:
                k = "absorber." + bad[0]
                raise ConfigError(f"unknown key (allowed: {', '.join(ABSORBER_KEYS)})", k, *where(k))
            try:
                absorber = AbsorberSpec(
                    n_abs=_number(raw.get("n_abs", 10), int, "absorber.n_abs", where("absorber.n_abs")),
                    amplitude=_number(raw.get("amplitude", 1.0), float, "absorber.amplitude",
                                      where("absorber.amplitude")),
                    shape=raw.get("shape", "quadratic"))
            except InvalidParameterError as exc:
                raise ConfigError(str(exc), "absorber", *where("absorber")) from None
        else:
            raise ConfigError("expected a mapping or null", "absorber", *where("absorber"))

    snaps = vals.get("snapshot_times", [])
    if not isinstance(snaps, (list, tuple)):
        snaps = [snaps]
    t_max = out.get("t_max", SimulationConfig.t_max)
    snap_list = []
    for s in snaps:
        if s == "t_max":
            snap_list.append(t_max)
        else:
            snap_list.append(_number(s, float, "snapshot_times", where("snapshot_times")))
    snap_list = sorted(set(snap_list))
    if any(t < 0 or t > t_max for t in snap_list):
        raise ConfigError("snapshot times must lie in [0, t_max]", "snapshot_times", *where("snapshot_times"))

    sweep_raw = vals.get("sweep") or {}
    if not isinstance(sweep_raw, dict):
        raise ConfigError("expected a mapping of axis -> list", "sweep", *where("sweep"))
    sweep = {}
    for axis, values in sweep_raw.items():
        key = f"sweep.{axis}"
        if axis not in SWEEP_AXES:
            raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}", key, *where(key))
        if not isinstance(values, (list, tuple)) or not values:
            raise ConfigError("sweep axis needs a non-empty list", key, *where(key))
        kind = int if axis == "L0" else float
        vs = tuple(_number(v, kind, key, where(key)) for v in values)
        if axis == "L0" and any(v < 1 or v % 2 == 0 for v in vs):
            raise ConfigError("L0 must be odd", key, *where(key))
        if axis != "L0" and any(v < 0 for v in vs):
            raise ConfigError(f"{axis} values must be >= 0", key, *where(key))
        sweep[axis] = vs
    zip_axes = tuple(vals.get("zip") or ())
    if zip_axes:
        if any(a not in sweep for a in zip_axes):
            raise ConfigError("zip lists axes that are not swept", "zip", *where("zip"))
        if len({len(sweep[a]) for a in zip_axes}) != 1:
            raise ConfigError("zipped axes must have equal length", "zip", *where("zip"))

    freeze = vals.get("freeze") or ()
    if isinstance(freeze, str):
        freeze = (freeze,)
    bad = [f for f in freeze if f not in ("disorder", "phases", "se")]
    if bad:
        raise ConfigError(f"cannot freeze {bad[0]!r}", "freeze", *where("freeze"))

    fmt = vals.get("format", "csv")
    if fmt not in FORMATS:
        raise ConfigError(f"format must be one of {FORMATS}", "format", *where("format"))

    cfg_kwargs = {k: out[k] for k in ("L", "L0", "W", "g", "gamma", "t_max", "dt_max",
                                       "t_min", "samples_per_decade", "seed") if k in out}
    try:
        config = SimulationConfig(integrator=integrator, absorber=absorber,
                                  snapshot_times=tuple(snap_list), **cfg_kwargs)
        for coords in _axis_extremes(sweep):
            replace(config, **coords)
    except InvalidParameterError as exc:
        raise ConfigError(str(exc), source=source) from None
    return RunManifest(config=config, n_realizations=out.get("n_realizations", 50),
                       freeze=tuple(sorted(set(freeze))), sweep=sweep, zip_axes=zip_axes,
                       out=str(vals.get("out", "out")), format=fmt,
                       name=str(vals.get("name", "run")))


def _axis_extremes(sweep):
    for axis, values in sweep.items():
        for v in (min(values), max(values)):
            yield {axis: v}


def parse_config(path=None, overrides: dict | None = None, text: str | None = None,
                 conflicts: list | None = None) -> RunManifest:
    """Build a validated manifest from a YAML (or JSON) file and/or overrides.

    Overrides (from command-line flags) win over file values; each conflict is
    logged and appended to ``conflicts`` if given. A run sidecar (``*.meta.json``)
    is accepted and reproduces its cell.
    """
    source = None
    data, lines = {}, {}
    if path is not None:
        source = str(path)
        p = Path(path)
        if not p.exists():
            raise ConfigError("file not found", source=source)
        text = p.read_text()
    if text is not None:
        data, lines = _load(text, source or "<config>")
        if "manifest" in data and isinstance(data["manifest"], dict):
            data = data["manifest"]
            lines = {}
    overrides = dict(overrides or {})
    for key, value in overrides.items():
        if key in data and data[key] != value:
            msg = f"flag overrides {key}: file value {data[key]!r} -> {value!r}"
            log.warning(msg)
            if conflicts is not None:
                conflicts.append(msg)
        data[key] = value
    scale = data.pop("scale", 1.0)
    manifest = _validate(data, lines, source)
    scale = _number(scale, float, "scale", (lines.get("scale"), source))
    if scale != 1.0:
        manifest = apply_scale(manifest, scale)
    return manifest


# ------------------------------------------------------------ presets

def apply_scale(manifest: RunManifest, scale: float) -> RunManifest:
    """Shrink a run: t_max and snapshot times times ``scale``, realizations
    times ``scale`` (at least one), and gamma divided by ``scale`` so the
    expected number of SE events is unchanged."""
    if not scale > 0:
        raise InvalidParameterError("scale must be > 0")
    c = manifest.config
    t_max = c.t_max * scale
    config = replace(c, t_max=t_max, gamma=c.gamma / scale,
                     snapshot_times=tuple(min(t * scale, t_max) for t in c.snapshot_times),
                     t_min=min(c.t_min, t_max))
    sweep = dict(manifest.sweep)
    if "gamma" in sweep:
        sweep["gamma"] = tuple(g / scale for g in sweep["gamma"])
    n = max(1, int(round(manifest.n_realizations * scale)))
    return replace(manifest, config=config, sweep=sweep, n_realizations=n)


def _geom(lo, hi, n):
    return tuple(float(x) for x in np.geomspace(lo, hi, n))


def preset(name: str, scale: float = DEFAULT_PRESET_SCALE, seed: int = 2012,
           out: str | None = None) -> RunManifest:
    """Manifest reproducing one figure's parameter grid, reduced by ``scale``."""
    gammas4 = (0.0, 1e-5, 1e-4, 1e-3)
    snaps = (FULL_T_MAX,)
    if name == "fig1":
        base = dict(W=4.0, g=0.0, L0=21)
        sweep = {"W": (2.0, 3.0, 4.0, 6.0, 8.0), "gamma": _geom(1e-6, 1e-1, 11)}
        zip_axes = ()
    elif name == "fig2":
        base = dict(W=4.0, g=0.0, L0=3)
        sweep = {"gamma": gammas4}
        zip_axes = ()
    elif name == "fig3":
        base = dict(W=4.0, L0=3)
        sweep = {"gamma": gammas4, "g": _geom(0.1, 320.0, 15)}
        zip_axes = ()
    elif name == "fig4":
        base = dict(W=1.0, gamma=1e-5)
        sweep = {"L0": (3, 7, 13, 21, 31, 41), "g": _geom(0.1, 1000.0, 17)}
        zip_axes = ()
    elif name == "fig5":
        base = dict(W=4.0, gamma=1e-5)
        sweep = {"W": (4.0, 1.0), "gamma": (1e-5, 1e-3), "L0": (7, 13, 21, 31, 41),
                 "g": _geom(0.1, 1000.0, 17)}
        zip_axes = ("W", "gamma")
    else:
        raise InvalidParameterError(f"unknown preset {name!r}; choose from {PRESETS}")
    config = SimulationConfig(t_max=FULL_T_MAX, snapshot_times=snaps, seed=seed, **base)
    manifest = RunManifest(config=config, n_realizations=FULL_REALIZATIONS, sweep=sweep,
                           zip_axes=zip_axes, out=out or f"out_{name}", name=name)
    return apply_scale(manifest, scale) if scale != 1.0 else manifest
