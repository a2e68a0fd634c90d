"""Tensor calculus on a periodic uniform 3D grid.

Fields are plain numpy arrays whose last three axes are (x, y, z):

* scalar field: ``(N, N, N)``
* covector field: ``(3, N, N, N)``
* symmetric 2-tensor: ``(6, N, N, N)`` with components 11, 12, 13, 22, 23, 33

Every derivative is the 4th-order centred stencil
``(-u[+2] + 8 u[+1] - 8 u[-1] + u[-2]) / (12 h)`` with periodic wraparound.
Second derivatives compose two first-derivative stencils.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import NonPositiveDefinite
from .kernels import PAIRS, SYM

__all__ = [
    "GridSpec",
    "Geometry",
    "fd_derivative",
    "gradient",
    "metric_pointwise",
    "check_positive_definite",
    "geometry",
    "christoffel",
    "ricci",
    "scalar_curvature",
    "covariant_hessian",
    "covariant_derivative_sym",
    "norms",
    "sym_to_full",
    "full_to_sym",
    "trace",
    "square_norm",
]


@dataclass(frozen=True)
class GridSpec:
    """Periodic cube with ``npts`` points per axis and side length ``period``."""

    npts: int
    period: float = 1.0
    spacing: float = field(init=False)

    def __post_init__(self):
        if int(self.npts) != self.npts or self.npts < 8:
            raise ValueError(f"npts must be an integer >= 8, got {self.npts!r}")
        if not (np.isfinite(self.period) and self.period > 0):
            raise ValueError(f"period must be positive, got {self.period!r}")
        object.__setattr__(self, "npts", int(self.npts))
        object.__setattr__(self, "period", float(self.period))
        object.__setattr__(self, "spacing", self.period / self.npts)

    @property
    def shape(self):
        return (self.npts,) * 3

    @property
    def cell_volume(self):
        return self.spacing**3

    def axis(self):
        """Coordinates of the grid points along one axis."""
        return np.arange(self.npts) * self.spacing

    def mesh(self):
        """``(x, y, z)`` coordinate arrays, each of shape ``self.shape``."""
        a = self.axis()
        return np.meshgrid(a, a, a, indexing="ij")

    def nearest_index(self, p):
        """Grid index of the point nearest to coordinates ``p`` (periodic)."""
        return tuple(int(round(c / self.spacing)) % self.npts for c in p)

    def periodic_distance(self, p):
        """Coordinate distance from ``p`` to every grid point, periodic-aware."""
        x = self.mesh()
        r2 = np.zeros(self.shape)
        for a in range(3):
            d = np.abs(x[a] - p[a]) % self.period
            d = np.minimum(d, self.period - d)
            r2 += d * d
        return np.sqrt(r2)


def _h(grid):
    return grid.spacing if isinstance(grid, GridSpec) else float(grid)


# --------------------------------------------------------------------------
# component helpers


def sym_to_full(t):
    """``(6, ...)`` symmetric storage to a ``(3, 3, ...)`` array (a view copy)."""
    return t[SYM]


def full_to_sym(m):
    """``(3, 3, ...)`` to ``(6, ...)``, symmetrising the off-diagonal pairs."""
    return np.stack([0.5 * (m[a, b] + m[b, a]) for a, b in PAIRS])


def trace(t, ginv):
    """``g^{ij} t_ij`` for covariant ``t``."""
    return (
        ginv[0] * t[0] + ginv[3] * t[3] + ginv[5] * t[5]
        + 2.0 * (ginv[1] * t[1] + ginv[2] * t[2] + ginv[4] * t[4])
    )


def square_norm(t, ginv):
    """Pointwise ``|t|_g^2`` for scalar, covector, symmetric or rank-3 fields.

    The rank is read from the leading shape: ``()`` scalar, ``(3,)`` covector,
    ``(6,)`` symmetric 2-tensor, ``(3, 6)`` rank-3 tensor symmetric in its
    last pair (first index is the derivative index). All indices are down.
    """
    if t.shape[:-3] == ():
        return t * t
    return kernels.sq_norm(t, ginv)


# --------------------------------------------------------------------------
# derivatives


def fd_derivative(u, axis, grid):
    """4th-order centred derivative of ``u`` along ``axis`` (1, 2 or 3).

    Leading axes of ``u`` are treated as components, so a symmetric tensor is
    differentiated component-wise.
    """
    if axis not in (1, 2, 3):
        raise ValueError("axis must be 1, 2 or 3")
    return kernels.d1_numpy(np.asarray(u, dtype=np.float64), _h(grid), axis - 1)


def gradient(u, grid):
    """All three first derivatives; output shape ``(3, *u.shape)``."""
    return kernels.d1_stack(np.asarray(u, dtype=np.float64), _h(grid))


# --------------------------------------------------------------------------
# metric algebra


def check_positive_definite(g):
    """Raise :class:`NonPositiveDefinite` at the first point where a leading
    principal minor is not positive."""
    m1 = g[0]
    m2 = g[0] * g[3] - g[1] * g[1]
    m3 = (
        g[0] * (g[3] * g[5] - g[4] * g[4])
        - g[1] * (g[1] * g[5] - g[4] * g[2])
        + g[2] * (g[1] * g[4] - g[3] * g[2])
    )
    for k, m in enumerate((m1, m2, m3), start=1):
        bad = ~(m > 0)
        if bad.any():
            idx = np.unravel_index(int(np.argmax(bad)), m.shape)
            raise NonPositiveDefinite(idx, minor=k)


def metric_pointwise(g):
    """Pointwise inverse and determinant of a positive-definite metric.

    Returns
    -------
    inverse : ndarray, shape (6, N, N, N)
    det : ndarray, shape (N, N, N)

    Raises
    ------
    NonPositiveDefinite
        If any leading principal minor is <= 0 (or not finite).
    """
    g = np.asarray(g, dtype=np.float64)
    check_positive_definite(g)
    return kernels.inv_det(g)


@dataclass(frozen=True)
class Geometry:
    """Derived metric quantities of one slice, computed once and shared.

    ``gamma`` is compact ``(3, 6, ...)``: ``gamma[c, p]`` is ``Gamma^c_{ab}``
    for the pair ``p = (a, b)``.
    """

    ginv: np.ndarray
    det: np.ndarray
    dg: np.ndarray
    gamma: np.ndarray
    ricci: np.ndarray

    @property
    def sqrt_det(self):
        return np.sqrt(self.det)

    @property
    def scalar_curvature(self):
        return trace(self.ricci, self.ginv)


def geometry(g, grid):
    """Inverse, determinant, derivatives, Christoffel symbols and Ricci."""
    h = _h(grid)
    ginv, det = metric_pointwise(g)
    dg = kernels.d1_stack(np.asarray(g, dtype=np.float64), h)
    gam = kernels.christoffel2(ginv, dg)
    ric = kernels.ricci_from_gamma(gam, h)
    return Geometry(ginv=ginv, det=det, dg=dg, gamma=gam, ricci=ric)


def christoffel(g, grid):
    """``Gamma^c_{ab}`` as a full ``(3, 3, 3, N, N, N)`` array, index order c, a, b."""
    ginv, _ = metric_pointwise(g)
    dg = kernels.d1_stack(np.asarray(g, dtype=np.float64), _h(grid))
    return kernels.christoffel2(ginv, dg)[:, SYM]


def ricci(g, grid):
    """Ricci tensor ``R_ij`` in symmetric storage."""
    return geometry(g, grid).ricci


def scalar_curvature(g, grid):
    return geometry(g, grid).scalar_curvature


def _hessian_coord(s, h):
    ds = kernels.d1_stack(s, h)
    dds = kernels.d1_stack(ds, h)  # dds[b, a] = d_b d_a s
    return ds, np.stack([dds[b, a] for a, b in PAIRS])


def covariant_hessian(s, g, grid, geo=None):
    """``nabla_i nabla_j s = d_i d_j s - Gamma^c_ij d_c s`` in symmetric storage."""
    h = _h(grid)
    if geo is None:
        ginv, _ = metric_pointwise(g)
        gam = kernels.christoffel2(ginv, kernels.d1_stack(np.asarray(g, dtype=np.float64), h))
    else:
        gam = geo.gamma
    ds, hess = _hessian_coord(np.asarray(s, dtype=np.float64), h)
    return hess - np.einsum("cp...,c...->p...", gam, ds)


def covariant_derivative_sym(t, gamma, grid):
    """``nabla_a t_ij`` of a symmetric covariant tensor, shape ``(3, 6, ...)``."""
    t = np.asarray(t, dtype=np.float64)
    return kernels.cov_deriv_sym(kernels.d1_stack(t, _h(grid)), gamma, t)


# --------------------------------------------------------------------------
# norms


def norms(t, g, grid=None, weighted=True, mask=None, geo=None):
    """Sup and L2 norms of a tensor field measured with the metric ``g``.

    Parameters
    ----------
    t : ndarray
        Scalar ``(N,N,N)``, covector ``(3,...)``, symmetric ``(6,...)`` or
        rank-3 ``(3,6,...)`` field, all indices down.
    g : ndarray
        Metric, ``(6, N, N, N)``.
    grid : GridSpec or float, optional
        Needed for the L2 norm (cell volume). Defaults to unit spacing.
    weighted : bool
        Include the volume element ``sqrt(det g)`` in the L2 sum.
    mask : ndarray of bool, optional
        Restrict both norms to these points.

    Returns
    -------
    (sup_norm, l2_norm) : tuple of float
    """
    if geo is None:
        ginv, det = metric_pointwise(g)
    else:
        ginv, det = geo.ginv, geo.det
    sq = np.maximum(square_norm(np.asarray(t, dtype=np.float64), ginv), 0.0)
    h = 1.0 if grid is None else _h(grid)
    dens = sq * np.sqrt(det) if weighted else sq
    if mask is not None:
        if not mask.any():
            return 0.0, 0.0
        sq = sq[mask]
        dens = dens[mask]
    return float(np.sqrt(sq.max())), float(np.sqrt(dens.sum() * h**3))
