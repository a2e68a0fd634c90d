"""Shrinking coordinate ball tracking a discrete domain of dependence.

With zero shift the flow of the normal is the identity in coordinates, so a
localized region is a coordinate ball whose radius shrinks at the largest
coordinate light speed ``n sqrt(max eig g^{-1})`` found inside it, plus a fixed
stencil halo per step.

The default halo of one grid spacing keeps the ball close to the physical
cone. The discrete scheme itself reaches further: one RK4 step moves
information :data:`STEP_REACH` cells and the slice monitors read
:data:`MONITOR_REACH` cells. A halo of ``STEP_REACH`` spacings makes the ball
an exact discrete domain of dependence of the initial ball inflated by
``MONITOR_REACH`` spacings.
"""

from dataclasses import dataclass, replace
from functools import lru_cache
import math

import numpy as np

from . import kernels
from .errors import DomainCrushed

__all__ = ["DomainSpec", "characteristic_speed", "shrink_domain", "STEP_REACH", "MONITOR_REACH"]

# Ricci and the lapse Hessian are two chained 2-cell first-derivative stencils;
# RK4 feeds them through two stages of k -> g coupling.
MONITOR_REACH = 4
STEP_REACH = 8


@dataclass(frozen=True)
class DomainSpec:
    """Coordinate ball ``|x - center| < radius`` on the torus.

    Parameters
    ----------
    center : tuple of float
    radius : float
        ``inf`` (or ``enabled=False``) means the whole grid.
    speed_integral : float
        Accumulated ``int v_max |dtau|``.
    halo : float or None
        Extra radius removed per step for the stencil reach. ``None`` means
        one grid spacing.
    """

    center: tuple = (0.0, 0.0, 0.0)
    radius: float = math.inf
    speed_integral: float = 0.0
    enabled: bool = True
    halo: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if len(self.center) != 3:
            raise ValueError("center needs three coordinates")
        if not self.radius >= 0:
            raise ValueError(f"radius must be >= 0, got {self.radius!r}")

    @property
    def active(self):
        return self.enabled and math.isfinite(self.radius)

    def mask(self, grid):
        """Boolean membership array, or ``None`` for the whole grid."""
        if not self.active:
            return None
        return _ball_mask(grid, self.center, self.radius)


@lru_cache(maxsize=32)
def _ball_mask(grid, center, radius):
    m = grid.periodic_distance(center) < radius
    m.setflags(write=False)
    return m


def characteristic_speed(n, g, eig=None):
    """Pointwise ``n sqrt(max eig g^{-1}) = n / sqrt(min eig g)``."""
    if eig is None:
        eig = kernels.eig3(np.asarray(g))
    return n / np.sqrt(eig[0])


def shrink_domain(d, s, dt, v_max=None):
    """Advance the ball by one step of size ``dt`` (either sign).

    The radius loses ``v_max |dt| + halo``; ``speed_integral`` gains
    ``v_max |dt|``. ``v_max`` defaults to the sup of the characteristic speed
    of ``s`` over the current ball.

    Raises
    ------
    DomainCrushed
        When the radius reaches zero. The exception carries the clamped
        domain as ``exc.domain``.

    An inactive domain (the whole grid) keeps its radius but still
    accumulates ``speed_integral`` with the grid-wide speed.
    """
    if v_max is None:
        speed = characteristic_speed(s.n, s.g)
        m = d.mask(s.grid)
        if m is not None:
            speed = speed[m]
        v_max = float(speed.max()) if speed.size else 0.0
    if not d.active:
        return replace(d, speed_integral=d.speed_integral + abs(dt) * v_max)
    halo = s.grid.spacing if d.halo is None else d.halo
    step = abs(dt) * v_max
    radius = d.radius - step - halo
    new = replace(d, radius=max(radius, 0.0), speed_integral=d.speed_integral + step)
    if radius <= 0.0:
        exc = DomainCrushed(f"domain radius reached 0 (speed integral {new.speed_integral:.6g})")
        exc.domain = new
        raise exc
    return new
