"""Bit-exact checkpoints.

Layout::

    EVTH1\\n
    <one header line of space-separated key:value tokens>\\n
    g (6 planes) k (6 planes) n (1 plane) f (1 plane)

Planes are little-endian float64, ``npts^3`` values each, x fastest. Floats in
the header are written with ``float.hex`` so that a resumed run continues from
exactly the same numbers.
"""

import math
import os

import numpy as np

from .diagnostics import Accumulators
from .errors import CheckpointError
from .grid import GridSpec
from .state import SliceState

__all__ = ["MAGIC", "FIELD_ORDER", "Checkpoint", "write_checkpoint", "read_checkpoint"]

MAGIC = b"EVTH1\n"
FIELD_ORDER = "g11,g12,g13,g22,g23,g33,k11,k12,k13,k22,k23,k33,n,f"
_FLOAT_KEYS = (
    "period", "tau", "integral", "pi_l1", "nk_integral", "proper_time", "gronwall_c",
    "domain_radius", "speed_integral",
)
_INT_KEYS = ("npts", "step")
_DTYPE = np.dtype("<f8")


class Checkpoint:
    """A state plus the run bookkeeping needed to continue it."""

    def __init__(self, state, step=0, accumulators=None, domain_radius=math.inf, speed_integral=0.0):
        self.state = state
        self.step = int(step)
        self.accumulators = accumulators if accumulators is not None else Accumulators()
        self.domain_radius = float(domain_radius)
        self.speed_integral = float(speed_integral)


def _planes(s):
    yield from s.g
    yield from s.k
    yield s.n
    yield s.f


def _fmt(x):
    return "none" if x is None else float(x).hex()


def write_checkpoint(path, state, step=0, accumulators=None, domain=None):
    """Write ``state`` and the run bookkeeping to ``path`` (atomically)."""
    acc = accumulators if accumulators is not None else Accumulators()
    radius = domain.radius if domain is not None else math.inf
    speed = domain.speed_integral if domain is not None else 0.0
    meta = {
        "npts": str(state.grid.npts),
        "period": _fmt(state.grid.period),
        "tau": _fmt(state.tau),
        "step": str(int(step)),
        "integral": _fmt(acc.integral),
        "pi_l1": _fmt(acc.pi_l1),
        "nk_integral": _fmt(acc.nk_integral),
        "proper_time": _fmt(acc.proper_time),
        "gronwall_c": _fmt(acc.gronwall_c),
        "domain_radius": _fmt(radius),
        "speed_integral": _fmt(speed),
        "fields": FIELD_ORDER,
    }
    header = " ".join(f"{k}:{v}" for k, v in meta.items()).encode("ascii") + b"\n"
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(header)
        for plane in _planes(state):
            fh.write(np.asarray(plane, dtype=_DTYPE).ravel(order="F").tobytes())
    os.replace(tmp, path)


def _parse_header(line):
    meta = {}
    for tok in line.split():
        key, sep, val = tok.partition(":")
        if not sep:
            raise CheckpointError(f"malformed header token {tok!r}")
        meta[key] = val
    missing = [k for k in _INT_KEYS + _FLOAT_KEYS + ("fields",) if k not in meta]
    if missing:
        raise CheckpointError(f"checkpoint header lacks {', '.join(missing)}")
    if meta["fields"] != FIELD_ORDER:
        raise CheckpointError(f"unsupported field order {meta['fields']!r}")
    out = {}
    try:
        for k in _INT_KEYS:
            out[k] = int(meta[k])
        for k in _FLOAT_KEYS:
            out[k] = None if meta[k] == "none" else float.fromhex(meta[k])
    except ValueError as exc:
        raise CheckpointError(f"bad header value: {exc}") from exc
    return out


def read_checkpoint(path):
    """Load a checkpoint written by :func:`write_checkpoint`.

    Raises
    ------
    CheckpointError
        On a wrong magic string, a malformed header or a size mismatch.
    """
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path!s}: {exc}") from exc
    if not data.startswith(MAGIC):
        raise CheckpointError("not an EVTH1 checkpoint (bad magic)")
    end = data.find(b"\n", len(MAGIC))
    if end < 0:
        raise CheckpointError("checkpoint header is truncated")
    try:
        meta = _parse_header(data[len(MAGIC):end].decode("ascii"))
    except UnicodeDecodeError as exc:
        raise CheckpointError("checkpoint header is not ASCII") from exc
    npts = meta["npts"]
    try:
        grid = GridSpec(npts, meta["period"])
    except ValueError as exc:
        raise CheckpointError(str(exc)) from exc
    body = data[end + 1:]
    nplane = npts**3
    want = 14 * nplane * _DTYPE.itemsize
    if len(body) != want:
        raise CheckpointError(f"checkpoint body has {len(body)} bytes, expected {want} (truncated?)")
    flat = np.frombuffer(body, dtype=_DTYPE).reshape(14, nplane)
    planes = [p.reshape(grid.shape, order="F").astype(np.float64) for p in flat]
    try:
        state = SliceState(
            grid=grid,
            g=np.stack(planes[0:6]),
            k=np.stack(planes[6:12]),
            n=planes[12],
            f=planes[13],
            tau=meta["tau"],
        )
    except ValueError as exc:
        raise CheckpointError(str(exc)) from exc
    acc = Accumulators(
        integral=meta["integral"],
        pi_l1=meta["pi_l1"],
        nk_integral=meta["nk_integral"],
        proper_time=meta["proper_time"],
        gronwall_c=meta["gronwall_c"],
    )
    return Checkpoint(state, meta["step"], acc, meta["domain_radius"], meta["speed_integral"])
