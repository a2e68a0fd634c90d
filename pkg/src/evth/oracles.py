"""Closed-form reference solutions in the time-harmonic gauge.

Kasner in harmonic time
-----------------------
Proper-time Kasner has ``g = diag(t^{2 p_i})`` with unit lapse. With a
homogeneous density ``f`` the gauge ``n = f sqrt(det g) = f t`` relates the
two clocks by ``dt = n dtau``, i.e. ``dtau = dt / (f t)``, so ``t = exp(f tau)``:

* ``g_ii = exp(2 p_i f tau)``
* ``n = f exp(f tau)``
* ``k_ii = -(1/2n) d_tau g_ii = -p_i exp((2 p_i - 1) f tau)``
* ``tr k = -exp(-f tau)``, ``|k|_g = exp(-f tau)``

The closed form never uses the evolution equations, so feeding it to
:func:`evth.evolution.rhs` is an independent check of their signs.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import AmplitudeTooLarge
from .state import SliceState, init_gauge

__all__ = [
    "KasnerParams",
    "kasner_fields",
    "kasner_state",
    "kasner_rates",
    "flat_state",
    "perturbed_flat",
    "tt_direction",
    "kasner_reference_ode",
]

_KASNER_TOL = 1e-12


@dataclass(frozen=True)
class KasnerParams:
    """Kasner exponents and homogeneous gauge density.

    Use :meth:`from_p1p2` to derive ``p3 = 1 - p1 - p2``.
    """

    p1: float
    p2: float
    p3: float
    f: float = 1.0

    def __post_init__(self):
        s1 = self.p1 + self.p2 + self.p3
        s2 = self.p1**2 + self.p2**2 + self.p3**2
        if abs(s1 - 1.0) > _KASNER_TOL:
            raise ValueError(f"Kasner exponents must satisfy p1+p2+p3 = 1 (sum is {s1!r})")
        if abs(s2 - 1.0) > _KASNER_TOL:
            raise ValueError(f"Kasner exponents must satisfy p1^2+p2^2+p3^2 = 1 (sum is {s2!r})")
        if not self.f > 0:
            raise ValueError(f"gauge density f must be positive, got {self.f!r}")

    @classmethod
    def from_p1p2(cls, p1, p2, f=1.0):
        return cls(p1, p2, 1.0 - p1 - p2, f)

    @property
    def exponents(self):
        return (self.p1, self.p2, self.p3)


def kasner_fields(kp, tau):
    """Homogeneous values ``(g_diag, k_diag, n)`` at harmonic time ``tau``."""
    ft = kp.f * tau
    p = np.array(kp.exponents)
    g = np.exp(2.0 * p * ft)
    k = -p * np.exp((2.0 * p - 1.0) * ft)
    return g, k, kp.f * math.exp(ft)


def kasner_rates(kp, tau):
    """Analytic ``d/dtau`` of ``(g_diag, k_diag, n)``."""
    ft = kp.f * tau
    p = np.array(kp.exponents)
    dg = 2.0 * p * kp.f * np.exp(2.0 * p * ft)
    dk = -p * (2.0 * p - 1.0) * kp.f * np.exp((2.0 * p - 1.0) * ft)
    return dg, dk, kp.f**2 * math.exp(ft)


def _diag_sym(d, shape):
    out = np.zeros((6,) + shape)
    out[0], out[3], out[5] = d[0], d[1], d[2]
    return out


def kasner_state(kp, tau, grid):
    """Kasner slice at harmonic time ``tau``; gauge residual exactly zero.

    >>> from evth.grid import GridSpec
    >>> s = kasner_state(KasnerParams.from_p1p2(2/3, 2/3), math.log(2), GridSpec(8))
    >>> round(float(s.n[0, 0, 0]), 12), round(float(s.g[0, 0, 0, 0]), 6)
    (2.0, 2.519842)
    """
    g, k, n = kasner_fields(kp, tau)
    sh = grid.shape
    f = np.full(sh, kp.f)
    return SliceState(grid=grid, g=_diag_sym(g, sh), k=_diag_sym(k, sh), n=np.full(sh, n), f=f, tau=tau)


def flat_state(grid):
    """Minkowski slice: ``g = delta``, ``k = 0``, ``n = f = 1``."""
    sh = grid.shape
    return SliceState(
        grid=grid, g=_diag_sym((1.0, 1.0, 1.0), sh), k=np.zeros((6,) + sh),
        n=np.ones(sh), f=np.ones(sh), tau=0.0,
    )


def tt_direction(m):
    """Unit transverse-traceless ``a a - b b`` for wave vector ``m``.

    ``a, b`` are orthonormal and orthogonal to ``m``; returned as a 3x3 array.
    """
    m = np.asarray(m, dtype=np.float64)
    nrm = np.linalg.norm(m)
    if nrm == 0:
        raise ValueError("wavevector must be non-zero")
    u = m / nrm
    trial = np.eye(3)[int(np.argmin(np.abs(u)))]
    a = trial - u * (trial @ u)
    a /= np.linalg.norm(a)
    b = np.cross(u, a)
    e = np.outer(a, a) - np.outer(b, b)
    return e / np.sqrt(2.0)


def perturbed_flat(grid, amplitude, wavevector=(1, 0, 0)):
    """Flat slice plus a small transverse-traceless metric wave, ``k = 0``, ``n = 1``.

    ``g = delta + amplitude sin(2 pi <m, x> / L) e`` with ``e`` from
    :func:`tt_direction`. The Hamiltonian constraint is violated at
    ``O(amplitude^2)``.

    Raises
    ------
    AmplitudeTooLarge
        If ``|amplitude| > 1e-3``.
    """
    if abs(amplitude) > 1e-3:
        raise AmplitudeTooLarge(f"amplitude {amplitude!r} exceeds 1e-3")
    sh = grid.shape
    x = grid.mesh()
    m = np.asarray(wavevector, dtype=np.float64)
    phase = 2.0 * np.pi * (m[0] * x[0] + m[1] * x[1] + m[2] * x[2]) / grid.period
    e = tt_direction(m)
    wave = amplitude * np.sin(phase)
    g = _diag_sym((1.0, 1.0, 1.0), sh)
    for p, (a, b) in enumerate(((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))):
        if e[a, b] != 0.0:
            g[p] = g[p] + wave * e[a, b]
    return init_gauge(g, np.zeros((6,) + sh), np.ones(sh), grid)


def kasner_reference_ode(kp, tau_end, rtol=1e-12, atol=1e-14):
    """Integrate the homogeneous evolution system with scipy as a cross-check.

    Homogeneous data reduce the evolution system to ODEs in ``tau`` for the
    diagonal ``g``, ``k`` and ``n``. The result agrees with the closed form.

    >>> kp = KasnerParams.from_p1p2(2/3, 2/3)
    >>> g, k, n = kasner_reference_ode(kp, math.log(2))
    >>> g0, k0, n0 = kasner_fields(kp, math.log(2))
    >>> bool(np.allclose(g, g0, rtol=1e-9) and np.allclose(k, k0, rtol=1e-9))
    True
    >>> abs(n - 2.0) < 1e-9
    True
    """
    from scipy.integrate import solve_ivp

    def f(_, y):
        g, k, n = y[0:3], y[3:6], y[6]
        kup = k / g
        trk = kup.sum()
        dg = -2.0 * n * k
        dk = n * (trk * k - 2.0 * k * kup)
        dn = -n * n * trk
        return np.concatenate([dg, dk, [dn]])

    g0, k0, n0 = kasner_fields(kp, 0.0)
    sol = solve_ivp(f, (0.0, tau_end), np.concatenate([g0, k0, [n0]]), method="DOP853", rtol=rtol, atol=atol)
    y = sol.y[:, -1]
    return y[0:3], y[3:6], float(y[6])
