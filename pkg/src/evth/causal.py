"""Causal localization: domain of dependence, causal-ball bound, temporal extent.

The shrinking ball itself lives in :mod:`evth.domain` and is re-exported here.
"""

from dataclasses import dataclass
import math

import numpy as np

from .diagnostics import ThresholdConfig
from .domain import DomainSpec, characteristic_speed, shrink_domain
from .evolution import EvolutionConfig, evolve
from .state import SliceState

__all__ = [
    "DomainSpec",
    "shrink_domain",
    "characteristic_speed",
    "CausalCheck",
    "causal_ball_check",
    "temporal_extent",
    "extent_from_result",
    "scale_state",
    "scaling_law_check",
    "extent_lower_bound",
]

BALL_FACTOR = 20.0
SPECTRUM_WINDOW = (0.25, 4.0)


@dataclass(frozen=True)
class CausalCheck:
    """Outcome of :func:`causal_ball_check`.

    ``margin`` is the smallest ``20 nu |tau - tau0| - speed_integral`` over the
    checked slices (``inf`` if none was checked); ``checked`` counts them.
    """

    passed: bool
    margin: float
    nu: float
    checked: int
    worst_step: int | None = None


def _get(rep, name):
    return rep[name] if isinstance(rep, dict) else getattr(rep, name)


def causal_ball_check(history, nu=None):
    """Check ``speed_integral(tau) <= 20 nu |tau - tau0|`` along a run.

    Parameters
    ----------
    history : sequence of MonitorReport (or dicts with the same keys)
        Accepted slices in order; the first one is the initial slice.
    nu : float, optional
        Defaults to ``max(1, sup n0, 1 / inf n0)`` from the first slice.

    The bound is only asserted while its hypotheses hold on every slice so
    far: lapse in ``[nu^-1 / 2, 2 nu]`` and spectrum in ``[1/4, 4]``. The first
    slice that leaves them ends the checked range.
    """
    history = list(history)
    if not history:
        return CausalCheck(True, math.inf, 1.0 if nu is None else nu, 0)
    first = history[0]
    if nu is None:
        nu = max(1.0, _get(first, "lapse_max"), 1.0 / _get(first, "lapse_min"))
    tau0 = _get(first, "tau")
    s0 = _get(first, "speed_integral")
    lo, hi = SPECTRUM_WINDOW
    margin = math.inf
    worst = None
    checked = 0
    for rep in history:
        ok = (
            0.5 / nu <= _get(rep, "lapse_min")
            and _get(rep, "lapse_max") <= 2.0 * nu
            and lo <= _get(rep, "spectrum_min")
            and _get(rep, "spectrum_max") <= hi
        )
        if not ok:
            break
        elapsed = abs(_get(rep, "tau") - tau0)
        if elapsed == 0.0:
            continue
        m = BALL_FACTOR * nu * elapsed - (_get(rep, "speed_integral") - s0)
        checked += 1
        if m < margin:
            margin, worst = m, _get(rep, "step")
    return CausalCheck(margin > 0, margin, nu, checked, worst)


def _crossing_fraction(prev, cur, thresholds, fired):
    """Linear-interpolation fraction in ``[0, 1]`` of the earliest crossing."""

    def frac(a, b, limit):
        if b == a:
            return 1.0
        return float(np.clip((limit - a) / (b - a), 0.0, 1.0))

    out = []
    if "pointwise" in fired:
        out.append(frac(prev.breakdown_pointwise, cur.breakdown_pointwise, thresholds.pointwise))
    if "integral" in fired:
        out.append(frac(prev.breakdown_integral_accum, cur.breakdown_integral_accum, thresholds.integral))
    if "pi_l1" in fired:
        out.append(frac(prev.pi_l1linf_accum, cur.pi_l1linf_accum, thresholds.pi_l1))
    if "spectrum" in fired:
        c = thresholds.spectrum_bound
        if cur.spectrum_max > c:
            out.append(frac(prev.spectrum_max, cur.spectrum_max, c))
        if cur.spectrum_min < 1.0 / c:
            out.append(frac(prev.spectrum_min, cur.spectrum_min, 1.0 / c))
    return min(out) if out else 1.0


def extent_from_result(result, thresholds):
    """Proper time of an evolution result, interpolated to a threshold crossing."""
    reps = result.reports
    if result.termination != "monitor_threshold":
        return reps[-1].proper_time if reps else 0.0
    if len(reps) < 2:
        return 0.0
    prev, cur = reps[-2], reps[-1]
    theta = _crossing_fraction(prev, cur, thresholds, result.fired)
    return prev.proper_time + theta * (cur.proper_time - prev.proper_time)


def temporal_extent(s0, p, r0, thresholds, cfg, halo=None, return_result=False):
    """Empirical temporal extent: proper time along the curve through ``p``.

    Evolves ``s0`` with a domain of initial radius ``r0`` centred at ``p``
    until a threshold fires, the domain crushes or ``tau_end`` is reached.
    The proper time ``int n(p) |dtau|`` uses the lapse at the grid point
    nearest ``p``; a threshold crossing is located by linear interpolation
    between the last two slices.

    Returns
    -------
    float
        ``0`` if the thresholds are already exceeded at the initial slice.
        With ``return_result`` a tuple ``(extent, EvolutionResult)``.
    """
    if not r0 > 0:
        raise ValueError("r0 must be positive")
    thresholds = thresholds or ThresholdConfig()
    domain = DomainSpec(center=tuple(p), radius=r0, halo=halo)
    res = evolve(s0, cfg, thresholds, domain=domain, probe=tuple(p))
    t = extent_from_result(res, thresholds)
    return (t, res) if return_result else t


def scale_state(s, lam):
    """``(lam^2 g, lam k, lam n)`` with ``f -> f / lam^2`` so the gauge identity holds."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    return SliceState(
        grid=s.grid, g=lam * lam * s.g, k=lam * s.k, n=lam * s.n, f=s.f / (lam * lam), tau=s.tau
    )


def scaling_law_check(s0, lam, thresholds, cfg=None, p=(0.0, 0.0, 0.0), r0=math.inf, halo=None):
    """Temporal extents of ``s0`` and of its ``lam``-scaled copy.

    The scaled run uses thresholds multiplied by ``1 / lam`` (every monitor
    scales that way). Returns ``(T, T_lam, T_lam / T)``.
    """
    cfg = cfg or EvolutionConfig()
    thresholds = thresholds or ThresholdConfig()
    t1 = temporal_extent(s0, p, r0, thresholds, cfg, halo)
    if lam == 1:
        t2 = t1
    else:
        t2 = temporal_extent(scale_state(s0, lam), p, r0, thresholds.scaled(1.0 / lam), cfg, halo)
    ratio = t2 / t1 if t1 > 0 else math.nan
    return t1, t2, ratio


def extent_lower_bound(alpha, r_h, t_star1):
    """``min(T*_1, r_h T*_1)``.

    ``t_star1`` is a calibration value for the bound constant ``alpha``; the
    shape of the bound does not depend on ``alpha`` itself.

    >>> extent_lower_bound(1.0, 2.0, 0.5)
    0.5
    >>> extent_lower_bound(1.0, 0.25, 0.5)
    0.125
    """
    for name, v in (("alpha", alpha), ("r_h", r_h), ("t_star1", t_star1)):
        if not v > 0:
            raise ValueError(f"{name} must be positive")
    return min(t_star1, r_h * t_star1)
