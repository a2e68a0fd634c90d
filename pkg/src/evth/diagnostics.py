"""Constraints, curvature, breakdown monitors and slice energies.

Constraint forms hold for any slicing (not only ``tr k = 0``)::

    H   = R - |k|^2 + (tr k)^2
    M_i = nabla^j k_ij - nabla_i tr k

Breakdown monitors, with ``m = sup (|k|_g + |grad log n|_g)`` over the domain:

* pointwise: ``sup |pi|`` with the proxy ``|pi| = 2|k|_g + 2|grad log n|_g``
  (so it equals ``2 m``)
* integral: ``int m^2 nbar |dtau|`` with ``nbar`` the domain sup of ``n``
* L1-Linf: ``int sup |pi| |dtau|``

Time integrals use the trapezoidal rule on accepted slices.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from . import kernels
from .grid import covariant_derivative_sym, geometry, norms, square_norm, trace
from .state import MonitorReport, gauge_residual, grad_log_lapse

__all__ = [
    "ThresholdConfig",
    "Accumulators",
    "hamiltonian_residual",
    "momentum_residual",
    "electric_magnetic",
    "curvature_l2",
    "breakdown_monitors",
    "spectrum_monitor",
    "quasi_isometry_bound",
    "gronwall_factor",
    "wave_energy",
    "slice_report",
]


@dataclass(frozen=True)
class ThresholdConfig:
    """Limits on the monitors; a monitor fires when it strictly exceeds its limit.

    ``spectrum_bound`` is the constant ``C`` of the quasi-isometry condition
    ``C^-1 <= eig(g) <= C``.
    """

    pointwise: float = math.inf
    integral: float = math.inf
    pi_l1: float = math.inf
    spectrum_bound: float = math.inf

    def __post_init__(self):
        for name in ("pointwise", "integral", "pi_l1"):
            if not getattr(self, name) > 0:
                raise ValueError(f"threshold {name} must be positive")
        if not self.spectrum_bound > 1:
            raise ValueError("spectrum_bound must exceed 1")

    def scaled(self, factor):
        """Pointwise and integral limits times ``factor`` (spectrum unchanged)."""
        return ThresholdConfig(
            self.pointwise * factor, self.integral * factor, self.pi_l1 * factor, self.spectrum_bound
        )

    def fired(self, rep):
        """Names of the monitors of ``rep`` that exceed their limits."""
        out = []
        if rep.breakdown_pointwise > self.pointwise:
            out.append("pointwise")
        if rep.breakdown_integral_accum > self.integral:
            out.append("integral")
        if rep.pi_l1linf_accum > self.pi_l1:
            out.append("pi_l1")
        c = self.spectrum_bound
        if rep.spectrum_min < 1.0 / c or rep.spectrum_max > c:
            out.append("spectrum")
        return out


@dataclass
class Accumulators:
    """Running time integrals plus the last integrands (for the trapezoid).

    ``nk_integral`` is ``int sup 2 n |k|_g |dtau|`` (the Gronwall exponent);
    ``gronwall_c`` is fixed from the first slice.
    """

    integral: float = 0.0
    pi_l1: float = 0.0
    nk_integral: float = 0.0
    proper_time: float = 0.0
    gronwall_c: float | None = None
    last: dict | None = field(default=None, repr=False)

    def advance(self, inst, dt):
        """Fold in the integrands ``inst`` of a new slice reached by step ``dt``."""
        if self.last is not None and dt != 0:
            w = 0.5 * abs(dt)
            p = self.last
            self.integral += w * (p["m2n"] + inst["m2n"])
            self.pi_l1 += w * (p["pi_sup"] + inst["pi_sup"])
            self.nk_integral += w * (p["nk2"] + inst["nk2"])
            self.proper_time += w * (p["n_probe"] + inst["n_probe"])
        self.last = dict(inst)


# --------------------------------------------------------------------------
# fields


def _geo(s, geo):
    return geometry(s.g, s.grid) if geo is None else geo


def hamiltonian_residual(s, geo=None, k2=None):
    """``H = R - |k|^2_g + (tr k)^2`` pointwise."""
    geo = _geo(s, geo)
    trk = trace(s.k, geo.ginv)
    if k2 is None:
        k2 = square_norm(s.k, geo.ginv)
    return trace(geo.ricci, geo.ginv) - k2 + trk * trk


def momentum_residual(s, geo=None, dk=None):
    """``M_i = nabla^j k_ij - d_i tr k`` as a covector field ``(3, ...)``.

    ``dk`` is the covariant derivative ``nabla_a k_ij`` if already available.
    """
    geo = _geo(s, geo)
    if dk is None:
        dk = covariant_derivative_sym(s.k, geo.gamma, s.grid)
    dtr = kernels.d1_stack(trace(s.k, geo.ginv), s.grid.spacing)
    return kernels.div_sym(dk, geo.ginv) - dtr


def electric_magnetic(s, geo=None, dk=None):
    """Electric and magnetic parts ``(E, B)`` in symmetric storage.

    ``E_ij = R_ij + (tr k) k_ij - k_ia k^a_j`` and
    ``B_ij = sym(eps_i^{ab} nabla_a k_bj)`` with the metric volume form.
    """
    geo = _geo(s, geo)
    trk = trace(s.k, geo.ginv)
    e = geo.ricci + trk * s.k - kernels.kgk(s.k, geo.ginv)
    if dk is None:
        dk = covariant_derivative_sym(s.k, geo.gamma, s.grid)
    return e, kernels.curl_sym(dk, s.g, geo.det)


def curvature_l2(s, domain=None, geo=None, em=None):
    """``int_domain (|E|^2_g + |B|^2_g) dmu_g`` (no square root)."""
    geo = _geo(s, geo)
    e, b = electric_magnetic(s, geo) if em is None else em
    dens = (square_norm(e, geo.ginv) + square_norm(b, geo.ginv)) * np.sqrt(geo.det)
    mask = None if domain is None else domain.mask(s.grid)
    if mask is not None:
        dens = dens[mask]
    return float(dens.sum() * s.grid.cell_volume)


def _pointwise_parts(s, ginv, k2=None):
    if k2 is None:
        k2 = square_norm(s.k, ginv)
    kn = np.sqrt(np.maximum(k2, 0.0))
    ln = np.sqrt(np.maximum(square_norm(grad_log_lapse(s), ginv), 0.0))
    return kn, ln


def breakdown_monitors(s, domain=None, accumulators=None, dt=0.0, geo=None):
    """Pointwise monitor and updated integral accumulators.

    Returns
    -------
    dict
        ``m`` (sup of ``|k| + |grad log n|``), ``pi_sup`` (sup of the
        proxy, ``2 m``), ``integral`` and ``pi_l1`` (accumulators after
        folding in this slice with step ``dt``).
    """
    geo = _geo(s, geo)
    acc = accumulators if accumulators is not None else Accumulators()
    mask = None if domain is None else domain.mask(s.grid)
    inst = _instant(s, geo, mask, probe_index=(0, 0, 0))
    acc.advance(inst, dt)
    return {"m": inst["m"], "pi_sup": inst["pi_sup"], "integral": acc.integral, "pi_l1": acc.pi_l1}


def _sup(a, mask):
    if mask is not None:
        a = a[mask]
    return float(a.max()) if a.size else 0.0


def _instant(s, geo, mask, probe_index, k2=None):
    kn, ln = _pointwise_parts(s, geo.ginv, k2)
    m = _sup(kn + ln, mask)
    pi_sup = _sup(2.0 * kn + 2.0 * ln, mask)
    nbar = _sup(s.n, mask)
    nk = _sup(s.n * kn, mask)
    return {
        "m": m,
        "pi_sup": pi_sup,
        "m2n": m * m * nbar,
        "nk": nk,
        "nk2": 2.0 * nk,
        "n_probe": float(s.n[probe_index]),
    }


def spectrum_monitor(s, domain=None, eig=None):
    """Extreme coordinate-frame eigenvalues of ``g`` over the domain."""
    if eig is None:
        eig = kernels.eig3(np.asarray(s.g))
    mask = None if domain is None else domain.mask(s.grid)
    lo, hi = eig[0], eig[2]
    if mask is not None:
        if not mask.any():
            return 1.0, 1.0
        lo, hi = lo[mask], hi[mask]
    return float(lo.min()), float(hi.max())


def gronwall_factor(history, dts):
    """``exp(int 2 sup n|k|_g dtau)`` by the trapezoid over a step history.

    ``history[i]`` is ``sup n |k|_g`` on slice ``i`` and ``dts[i]`` the step
    that led from slice ``i`` to ``i + 1``. The factor 2 is needed because
    ``d_tau g = -2 n k`` moves ``log g(xi, xi)`` at a rate up to
    ``2 n |k|_g``.
    """
    h = np.asarray(history, dtype=np.float64)
    w = np.abs(np.asarray(dts, dtype=np.float64))
    if h.size < 2:
        return 1.0
    return math.exp(float(np.sum(w[: h.size - 1] * (h[:-1] + h[1:]))))


def quasi_isometry_bound(history, dts, c0):
    """``C' = C exp(int 2 sup n|k|_g dtau)``; the spectrum stays in ``[1/C', C']``.

    >>> quasi_isometry_bound([0.0, 0.0, 0.0], [0.1, 0.1], 2.0)
    2.0
    """
    if np.any(np.asarray(history) < 0):
        raise ValueError("history must be non-negative")
    return c0 * gronwall_factor(history, dts)


def wave_energy(u, du, s, domain=None, geo=None, grad_u=None):
    """``1/2 int (n^-2 |du|^2_g + |nabla u|^2_g) dmu_g`` for a symmetric tensor ``u``."""
    geo = _geo(s, geo)
    if grad_u is None:
        grad_u = covariant_derivative_sym(u, geo.gamma, s.grid)
    dens = (square_norm(du, geo.ginv) / (s.n * s.n) + square_norm(grad_u, geo.ginv)) * np.sqrt(geo.det)
    mask = None if domain is None else domain.mask(s.grid)
    if mask is not None:
        dens = dens[mask]
    return 0.5 * float(dens.sum() * s.grid.cell_volume)


# --------------------------------------------------------------------------
# one report per accepted slice


def slice_report(s, geo, rate, eig, domain, acc, step, dt, probe):
    """Assemble the :class:`MonitorReport` of slice ``s`` and advance ``acc``."""
    grid = s.grid
    mask = domain.mask(grid) if domain is not None else None
    dk = covariant_derivative_sym(s.k, geo.gamma, grid)
    k2 = square_norm(s.k, geo.ginv)
    ham = hamiltonian_residual(s, geo, k2)
    mom = momentum_residual(s, geo, dk)
    ham_sup, ham_l2 = norms(ham, s.g, grid, mask=mask, geo=geo)
    mom_sup, mom_l2 = norms(mom, s.g, grid, mask=mask, geo=geo)
    em = electric_magnetic(s, geo, dk)
    curv = curvature_l2(s, domain, geo, em)
    lo, hi = spectrum_monitor(s, domain, eig)
    inst = _instant(s, geo, mask, grid.nearest_index(probe), k2)
    acc.advance(inst, dt)
    if acc.gronwall_c is None:
        acc.gronwall_c = max(hi, 1.0 / lo)
    energy = wave_energy(s.k, rate.dk, s, domain, geo, dk)
    v = s.n / np.sqrt(eig[0])
    return MonitorReport(
        step=step,
        tau=s.tau,
        dt=dt,
        gauge_residual=gauge_residual(s, mask, geo.det),
        ham_sup=ham_sup,
        ham_l2=ham_l2,
        mom_sup=mom_sup,
        mom_l2=mom_l2,
        breakdown_pointwise=inst["pi_sup"],
        breakdown_integral_accum=acc.integral,
        pi_l1linf_accum=acc.pi_l1,
        curvature_l2=curv,
        spectrum_min=lo,
        spectrum_max=hi,
        domain_radius=domain.radius if domain is not None and domain.active else math.inf,
        wave_energy=energy,
        proper_time=acc.proper_time,
        monitor_m=inst["m"],
        v_max=_sup(v, mask),
        nk_sup=inst["nk"],
        speed_integral=domain.speed_integral if domain is not None else 0.0,
        lapse_min=float((s.n[mask] if mask is not None else s.n).min()) if (mask is None or mask.any()) else 0.0,
        lapse_max=_sup(s.n, mask),
        gronwall_bound=acc.gronwall_c * math.exp(acc.nk_integral),
    )
