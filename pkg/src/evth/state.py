"""Slice state in the time-harmonic gauge.

The lapse is evolved as a primary variable. The gauge identity
``n = f sqrt(det g)`` with a frozen density ``f`` is then a diagnostic, not an
enforced constraint: both ``log n`` and ``log sqrt(det g)`` have time derivative
``-n tr k`` in the continuum, so any discrete mismatch is integrator error.
"""

from dataclasses import dataclass, fields
import math

import numpy as np

from . import kernels
from .errors import NonPositiveLapse
from .grid import GridSpec, metric_pointwise, square_norm, trace

__all__ = [
    "SliceState",
    "MonitorReport",
    "init_gauge",
    "gauge_residual",
    "p_variable",
    "deformation_norm",
    "grad_log_lapse",
]


def _frozen(a, shape, name):
    arr = np.array(a, dtype=np.float64, copy=True)
    if arr.shape != shape:
        raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} has non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SliceState:
    """Metric ``g``, second fundamental form ``k``, lapse ``n``, gauge density ``f``.

    Arrays are copied on construction and made read-only. Sign convention:
    ``k(X, Y) = -g(D_X T, Y)`` so that ``d_tau g = -2 n k``.
    """

    grid: GridSpec
    g: np.ndarray
    k: np.ndarray
    n: np.ndarray
    f: np.ndarray
    tau: float = 0.0

    def __post_init__(self):
        sh = self.grid.shape
        object.__setattr__(self, "g", _frozen(self.g, (6,) + sh, "g"))
        object.__setattr__(self, "k", _frozen(self.k, (6,) + sh, "k"))
        object.__setattr__(self, "n", _frozen(self.n, sh, "n"))
        # f is shared, never copied again, so it stays bit-identical across a run
        if isinstance(self.f, np.ndarray) and not self.f.flags.writeable and self.f.shape == sh:
            pass
        else:
            object.__setattr__(self, "f", _frozen(self.f, sh, "f"))
        object.__setattr__(self, "tau", float(self.tau))

    def replace(self, **changes):
        kw = {fl.name: getattr(self, fl.name) for fl in fields(self)}
        kw.update(changes)
        return SliceState(**kw)


@dataclass
class MonitorReport:
    """Scalar diagnostics of one accepted slice (one CSV row).

    ``breakdown_pointwise`` is the sup of the deformation proxy ``|pi|``;
    ``monitor_m`` is the sup of ``|k|_g + |grad log n|_g`` (half the proxy).
    """

    step: int = 0
    tau: float = 0.0
    dt: float = 0.0
    gauge_residual: float = 0.0
    ham_sup: float = 0.0
    ham_l2: float = 0.0
    mom_sup: float = 0.0
    mom_l2: float = 0.0
    breakdown_pointwise: float = 0.0
    breakdown_integral_accum: float = 0.0
    pi_l1linf_accum: float = 0.0
    curvature_l2: float = 0.0
    spectrum_min: float = 1.0
    spectrum_max: float = 1.0
    domain_radius: float = math.inf
    wave_energy: float = 0.0
    proper_time: float = 0.0
    monitor_m: float = 0.0
    v_max: float = 0.0
    nk_sup: float = 0.0
    speed_integral: float = 0.0
    lapse_min: float = 1.0
    lapse_max: float = 1.0
    gronwall_bound: float = 1.0

    def as_dict(self):
        return {fl.name: getattr(self, fl.name) for fl in fields(self)}


def init_gauge(g0, k0, n0, grid, tau=0.0):
    """Build a state with ``f := n0 / sqrt(det g0)`` frozen for the whole run.

    Raises
    ------
    NonPositiveDefinite
        If ``g0`` is not positive-definite somewhere.
    NonPositiveLapse
        If ``n0 <= 0`` somewhere.
    """
    g0 = np.asarray(g0, dtype=np.float64)
    n0 = np.broadcast_to(np.asarray(n0, dtype=np.float64), grid.shape)
    _, det = metric_pointwise(g0)
    bad = ~(n0 > 0)
    if bad.any():
        raise NonPositiveLapse(np.unravel_index(int(np.argmax(bad)), n0.shape))
    f = n0 / np.sqrt(det)
    return SliceState(grid=grid, g=g0, k=k0, n=n0, f=f, tau=tau)


def gauge_residual(s, mask=None, det=None):
    """``max |n - f sqrt(det g)| / n`` over the grid (or over ``mask``)."""
    if det is None:
        _, det = kernels.inv_det(np.asarray(s.g))
    r = np.abs(s.n - s.f * np.sqrt(det)) / s.n
    if mask is not None:
        r = r[mask]
        if r.size == 0:
            return 0.0
    return float(r.max())


def p_variable(s, ginv=None):
    """Contravariant ``P^{ij} = k^{ij} - (tr k) g^{ij}`` in symmetric storage."""
    if ginv is None:
        ginv, _ = metric_pointwise(s.g)
    gi = ginv[kernels.SYM]
    kf = s.k[kernels.SYM]
    kup = np.einsum("ia...,ab...,bj...->ij...", gi, kf, gi)
    trk = trace(s.k, ginv)
    return np.stack([kup[a, b] - trk * ginv[p] for p, (a, b) in enumerate(kernels.PAIRS)])


def grad_log_lapse(s):
    """``d_i log n`` as ``d_i n / n``, shape ``(3, N, N, N)``."""
    return kernels.d1_stack(np.asarray(s.n), s.grid.spacing) / s.n


def deformation_norm(s, ginv=None):
    """Pointwise proxy ``|pi| = 2 |k|_g + 2 |grad log n|_g``.

    The frame components of the deformation tensor of the unit normal are
    ``k`` and ``grad log n``; the factor 2 is a fixed convention.
    """
    if ginv is None:
        ginv, _ = metric_pointwise(s.g)
    kn = np.sqrt(np.maximum(square_norm(s.k, ginv), 0.0))
    ln = np.sqrt(np.maximum(square_norm(grad_log_lapse(s), ginv), 0.0))
    return 2.0 * kn + 2.0 * ln
