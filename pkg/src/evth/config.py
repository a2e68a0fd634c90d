"""Run configuration: a TOML file with one table per concern.

Grammar (every key optional unless marked)::

    [grid]
    npts = 32                  # >= 8
    period = 1.0

    [initial]
    kind = "flat"              # flat | kasner | perturbed | checkpoint (required)
    p1 = 0.6666666666666666    # kasner; p3 defaults to 1 - p1 - p2
    p2 = 0.6666666666666666
    p3 = -0.3333333333333333
    f = 1.0
    tau = 0.0
    amplitude = 1e-4           # perturbed
    wavevector = [1, 0, 0]
    path = "run.ckpt"          # checkpoint

    [evolution]
    cfl = 0.25
    tau_end = 1.0
    direction = "forward"      # forward | backward
    max_steps = 100000
    dt_floor = 1e-12
    dt_fixed = 0.01            # optional, bypasses the CFL rule

    [thresholds]               # omitted keys never fire
    pointwise = 100.0
    integral = 10.0
    pi_l1 = 10.0
    spectrum = 4.0

    [domain]
    enabled = false
    center = [0.5, 0.5, 0.5]
    radius = 0.3
    halo = 0.03125             # default: one grid spacing

    [radius_diagnostics]
    enabled = false
    point = [0.5, 0.5, 0.5]    # default: domain center
    scales = [0.1, 0.2]
    l = 0
    max_r = 0.25

    [output]
    csv = "monitors.csv"
    checkpoint = "run_{step}.ckpt"   # "{step}" is replaced by the step number
    checkpoint_stride = 0            # 0: only the final checkpoint

Relative paths are resolved against the directory of the config file.
"""

from dataclasses import dataclass, field
import math
from pathlib import Path
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .diagnostics import ThresholdConfig
from .errors import ConfigError
from .evolution import EvolutionConfig
from .grid import GridSpec
from .oracles import KasnerParams

__all__ = ["RunConfig", "load_config", "parse_config"]

_TABLES = {
    "grid": {"npts", "period"},
    "initial": {"kind", "p1", "p2", "p3", "f", "tau", "amplitude", "wavevector", "path"},
    "evolution": {"cfl", "tau_end", "direction", "max_steps", "dt_floor", "dt_fixed"},
    "thresholds": {"pointwise", "integral", "pi_l1", "spectrum"},
    "domain": {"enabled", "center", "radius", "halo"},
    "radius_diagnostics": {"enabled", "point", "scales", "l", "max_r"},
    "output": {"csv", "checkpoint", "checkpoint_stride"},
}
KINDS = ("flat", "kasner", "perturbed", "checkpoint")


@dataclass
class RunConfig:
    """Validated run description; see the module docstring for the file grammar."""

    grid: GridSpec
    kind: str
    initial: dict
    evolution: EvolutionConfig
    thresholds: ThresholdConfig
    domain_enabled: bool = False
    domain_center: tuple = (0.0, 0.0, 0.0)
    domain_radius: float = math.inf
    domain_halo: float | None = None
    radius_enabled: bool = False
    radius_point: tuple | None = None
    radius_scales: list = field(default_factory=list)
    radius_l: int = 0
    radius_max_r: float | None = None
    csv_path: Path | None = None
    checkpoint_path: str | None = None
    checkpoint_stride: int = 0
    kasner: KasnerParams | None = None


def _triple(v, name):
    if not isinstance(v, (list, tuple)) or len(v) != 3:
        raise ConfigError(f"{name} must be a list of three numbers")
    try:
        return tuple(float(c) for c in v)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a list of three numbers") from exc


def _num(tab, key, default, name):
    v = tab.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{name}.{key} must be a number, got {v!r}")
    return float(v)


def _resolve(base, p):
    if p is None:
        return None
    q = Path(p)
    return q if q.is_absolute() or base is None else base / q


def parse_config(data, base_dir=None):
    """Validate a parsed TOML mapping and build a :class:`RunConfig`.

    Raises
    ------
    ConfigError
        Naming the offending key or the violated invariant.
    """
    unknown = set(data) - set(_TABLES)
    if unknown:
        raise ConfigError(f"unknown table(s): {', '.join(sorted(unknown))}")
    for name, keys in _TABLES.items():
        tab = data.get(name, {})
        if not isinstance(tab, dict):
            raise ConfigError(f"[{name}] must be a table")
        extra = set(tab) - keys
        if extra:
            raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(sorted(extra))}")
    base = None if base_dir is None else Path(base_dir)

    gt = data.get("grid", {})
    try:
        grid = GridSpec(gt.get("npts", 32), _num(gt, "period", 1.0, "grid"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[grid]: {exc}") from exc

    it = dict(data.get("initial", {}))
    kind = it.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"initial.kind must be one of {', '.join(KINDS)}, got {kind!r}")
    kp = None
    if kind == "kasner":
        if "p1" not in it or "p2" not in it:
            raise ConfigError("kasner initial data needs p1 and p2")
        p1 = _num(it, "p1", None, "initial")
        p2 = _num(it, "p2", None, "initial")
        p3 = _num(it, "p3", 1.0 - p1 - p2, "initial")
        try:
            kp = KasnerParams(p1, p2, p3, _num(it, "f", 1.0, "initial"))
        except ValueError as exc:
            raise ConfigError(f"invalid Kasner parameters: {exc}") from exc
        it["tau"] = _num(it, "tau", 0.0, "initial")
    elif kind == "perturbed":
        it["amplitude"] = _num(it, "amplitude", 1e-4, "initial")
        wv = it.get("wavevector", [1, 0, 0])
        if not isinstance(wv, list) or len(wv) != 3 or not all(isinstance(c, int) for c in wv):
            raise ConfigError("initial.wavevector must be three integers")
        it["wavevector"] = tuple(wv)
    elif kind == "checkpoint":
        if "path" not in it:
            raise ConfigError("checkpoint initial data needs initial.path")
        it["path"] = _resolve(base, it["path"])

    et = data.get("evolution", {})
    try:
        evo = EvolutionConfig(
            cfl_factor=_num(et, "cfl", 0.25, "evolution"),
            tau_end=_num(et, "tau_end", 1.0, "evolution"),
            max_steps=int(et.get("max_steps", 100_000)),
            direction=et.get("direction", "forward"),
            dt_floor=_num(et, "dt_floor", 1e-12, "evolution"),
            dt_fixed=_num(et, "dt_fixed", None, "evolution"),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[evolution]: {exc}") from exc

    tt = data.get("thresholds", {})
    try:
        th = ThresholdConfig(
            pointwise=_num(tt, "pointwise", math.inf, "thresholds"),
            integral=_num(tt, "integral", math.inf, "thresholds"),
            pi_l1=_num(tt, "pi_l1", math.inf, "thresholds"),
            spectrum_bound=_num(tt, "spectrum", math.inf, "thresholds"),
        )
    except ValueError as exc:
        raise ConfigError(f"[thresholds]: {exc}") from exc

    dt_ = data.get("domain", {})
    d_enabled = bool(dt_.get("enabled", False))
    center = _triple(dt_.get("center", [0.0, 0.0, 0.0]), "domain.center")
    radius = _num(dt_, "radius", math.inf, "domain")
    halo = _num(dt_, "halo", None, "domain")
    if not radius >= 0:
        raise ConfigError("domain.radius must be non-negative")
    if halo is not None and not halo >= 0:
        raise ConfigError("domain.halo must be non-negative")

    rt = data.get("radius_diagnostics", {})
    r_enabled = bool(rt.get("enabled", False))
    r_point = _triple(rt["point"], "radius_diagnostics.point") if "point" in rt else None
    scales = rt.get("scales", [])
    if r_enabled and (not isinstance(scales, list) or not scales):
        raise ConfigError("radius_diagnostics.scales must be a non-empty list")
    try:
        scales = [float(s) for s in scales]
    except (TypeError, ValueError) as exc:
        raise ConfigError("radius_diagnostics.scales must be numbers") from exc
    r_l = rt.get("l", 0)
    if r_l not in (0, 1):
        raise ConfigError("radius_diagnostics.l must be 0 or 1")

    ot = data.get("output", {})
    stride = ot.get("checkpoint_stride", 0)
    if isinstance(stride, bool) or not isinstance(stride, int) or stride < 0:
        raise ConfigError("output.checkpoint_stride must be a non-negative integer")
    ckpt = ot.get("checkpoint")
    if stride and ckpt is None:
        raise ConfigError("output.checkpoint_stride needs output.checkpoint")

    return RunConfig(
        grid=grid,
        kind=kind,
        initial=it,
        evolution=evo,
        thresholds=th,
        domain_enabled=d_enabled,
        domain_center=center,
        domain_radius=radius,
        domain_halo=halo,
        radius_enabled=r_enabled,
        radius_point=r_point,
        radius_scales=scales,
        radius_l=r_l,
        radius_max_r=_num(rt, "max_r", None, "radius_diagnostics"),
        csv_path=_resolve(base, ot.get("csv")),
        checkpoint_path=None if ckpt is None else str(_resolve(base, ckpt)),
        checkpoint_stride=stride,
        kasner=kp,
    )


def load_config(path):
    """Read and validate a TOML config file."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config {path} is not valid TOML: {exc}") from exc
    return parse_config(data, base_dir=path.parent)
