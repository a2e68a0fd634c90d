"""Gauge-reduced vacuum evolution and its RK4 method-of-lines driver.

With zero shift and ``n = f sqrt(det g)``::

    d_tau g_ij = -2 n k_ij
    d_tau k_ij = -nabla_i nabla_j n + n (R_ij + (tr k) k_ij - 2 k_ia k^a_j)
    d_tau n    = -n^2 tr k

The ``(tr k) k_ij`` term is absent from the maximal-gauge form of the second
equation; it is required here because the harmonic gauge does not keep
``tr k = 0``. The Kasner closed form (which never uses these equations) is
reproduced only with it.
"""

from dataclasses import dataclass, field
import math
from typing import Callable, NamedTuple

import numpy as np

from . import kernels
from .diagnostics import Accumulators, ThresholdConfig, slice_report
from .domain import DomainSpec, characteristic_speed, shrink_domain
from .errors import DomainCrushed, DtUnderflow, EvthError, NonPositiveLapse, StepFailed
from .grid import check_positive_definite, geometry
from .state import MonitorReport, SliceState

__all__ = [
    "EvolutionConfig",
    "StateRate",
    "EvolutionResult",
    "rhs",
    "cfl_dt",
    "step_rk4",
    "evolve",
    "TERMINATIONS",
]

TERMINATIONS = (
    "tau_end",
    "max_steps",
    "monitor_threshold",
    "dt_underflow",
    "step_failed",
    "domain_crushed",
)


@dataclass(frozen=True)
class EvolutionConfig:
    """Time-stepping controls.

    ``dt_fixed`` bypasses the CFL rule (its magnitude is used, the sign comes
    from ``direction``). A global CFL step reads the whole grid, so runs that
    compare interiors under exterior edits need a fixed step.
    """

    cfl_factor: float = 0.25
    tau_end: float = 1.0
    max_steps: int = 100_000
    direction: str = "forward"
    dt_floor: float = 1e-12
    dt_fixed: float | None = None

    def __post_init__(self):
        if not 0.0 < self.cfl_factor <= 1.0:
            raise ValueError(f"cfl_factor must lie in (0, 1], got {self.cfl_factor!r}")
        if not self.dt_floor > 0:
            raise ValueError(f"dt_floor must be positive, got {self.dt_floor!r}")
        if self.direction not in ("forward", "backward"):
            raise ValueError(f"direction must be 'forward' or 'backward', got {self.direction!r}")
        if int(self.max_steps) != self.max_steps or self.max_steps < 0:
            raise ValueError(f"max_steps must be a non-negative integer, got {self.max_steps!r}")
        if self.dt_fixed is not None and not self.dt_fixed != 0:
            raise ValueError("dt_fixed must be non-zero")

    @property
    def sign(self):
        return 1.0 if self.direction == "forward" else -1.0


class StateRate(NamedTuple):
    dg: np.ndarray
    dk: np.ndarray
    dn: np.ndarray


def _rate_arrays(g, k, n, h, geo=None):
    if geo is None:
        geo = geometry(g, h)
    if not (n > 0).all():
        bad = np.unravel_index(int(np.argmax(~(n > 0))), n.shape)
        raise NonPositiveLapse(bad)
    dn_ = kernels.d1_stack(n, h)
    ddn = kernels.d1_stack(dn_, h)
    dk, trk = kernels.rate_dk(geo.ginv, geo.gamma, geo.ricci, k, n, dn_, ddn)
    dg = -2.0 * n * k
    dn = -n * n * trk
    return StateRate(dg, dk, dn), geo


def rhs(s, geo=None):
    """Time derivatives ``(dg, dk, dn)`` of a slice.

    Parameters
    ----------
    s : SliceState
    geo : Geometry, optional
        Precomputed geometry of ``s.g``.

    Returns
    -------
    StateRate

    Raises
    ------
    NonPositiveDefinite
        If the metric degenerates.
    """
    return _rate_arrays(s.g, s.k, s.n, s.grid.spacing, geo)[0]


def rhs_with_geometry(s, geo=None):
    """Like :func:`rhs` but also returns the :class:`Geometry` it used."""
    return _rate_arrays(s.g, s.k, s.n, s.grid.spacing, geo)


def max_speed(s, mask=None, eig=None):
    v = characteristic_speed(s.n, s.g, eig)
    if mask is not None:
        v = v[mask]
    return float(v.max()) if v.size else 0.0


def cfl_dt(s, cfg, eig=None):
    """Positive step ``cfl_factor * h / v_max``.

    Raises
    ------
    DtUnderflow
        If the step falls below ``cfg.dt_floor``.
    """
    v = max_speed(s, eig=eig)
    dt = math.inf if v == 0 else cfg.cfl_factor * s.grid.spacing / v
    if dt < cfg.dt_floor:
        raise DtUnderflow(dt, cfg.dt_floor)
    return dt


def step_rk4(s, dt, k1=None, geo=None):
    """One classical RK4 step of size ``dt`` (negative runs backward).

    ``k1`` (the rate at ``s``) may be passed in to reuse a previous evaluation.

    Raises
    ------
    StepFailed
        If the metric degenerates or the lapse turns non-positive in any
        stage; ``stage`` is 1..4 (4 also covers the final combination).
    """
    if dt == 0:
        raise ValueError("dt must be non-zero")
    h = s.grid.spacing
    g0, k0, n0 = s.g, s.k, s.n
    rates = []
    for stage in range(1, 5):
        try:
            if stage == 1:
                r = k1 if k1 is not None else _rate_arrays(g0, k0, n0, h, geo)[0]
            else:
                c = 0.5 * dt if stage < 4 else dt
                prev = rates[-1]
                lc = kernels.lincomb
                r = _rate_arrays(
                    lc(g0, (c,), (prev.dg,)), lc(k0, (c,), (prev.dk,)), lc(n0, (c,), (prev.dn,)), h
                )[0]
        except EvthError as exc:
            raise StepFailed(stage, exc) from exc
        rates.append(r)
    w = dt / 6.0
    a, b, c, d = rates
    cw = (w, 2.0 * w, 2.0 * w, w)
    g = kernels.lincomb(g0, cw, (a.dg, b.dg, c.dg, d.dg))
    k = kernels.lincomb(k0, cw, (a.dk, b.dk, c.dk, d.dk))
    n = kernels.lincomb(n0, cw, (a.dn, b.dn, c.dn, d.dn))
    try:
        if not (np.isfinite(g).all() and np.isfinite(k).all() and np.isfinite(n).all()):
            raise EvthError("non-finite field values")
        check_positive_definite(g)
        if not (n > 0).all():
            raise NonPositiveLapse()
    except EvthError as exc:
        raise StepFailed(4, exc) from exc
    return SliceState(grid=s.grid, g=g, k=k, n=n, f=s.f, tau=s.tau + dt)


@dataclass
class EvolutionResult:
    """Outcome of :func:`evolve`. ``reports[0]`` describes the initial slice."""

    state: SliceState
    reports: list
    termination: str
    fired: list = field(default_factory=list)
    message: str = ""
    domain: DomainSpec | None = None
    accumulators: Accumulators | None = None
    step: int = 0

    @property
    def final_tau(self):
        return self.state.tau


def _next_dt(s, cfg, eig):
    if cfg.dt_fixed is not None:
        dt = abs(cfg.dt_fixed)
    else:
        dt = cfl_dt(s, cfg, eig=eig)
    remaining = cfg.tau_end - s.tau
    if abs(remaining) <= dt * (1.0 + 1e-9):
        return remaining, True
    return cfg.sign * dt, False


def evolve(
    s0,
    cfg,
    thresholds=None,
    domain=None,
    probe=None,
    on_report: Callable | None = None,
    accumulators=None,
    start_step=0,
    keep_reports=True,
):
    """Evolve until ``tau_end``, a monitor threshold, or a numerical failure.

    Parameters
    ----------
    s0 : SliceState
    cfg : EvolutionConfig
    thresholds : ThresholdConfig, optional
        Defaults to no thresholds.
    domain : DomainSpec, optional
        Shrinking ball; all reductions are restricted to it.
    probe : tuple of float, optional
        Point whose lapse is integrated into the proper time. Defaults to the
        domain center, else the origin.
    on_report : callable, optional
        ``on_report(report, state, domain, accumulators)`` after each accepted
        slice, including the initial one.
    accumulators : Accumulators, optional
        Integrals carried over from a previous run (resume).
    start_step : int
        Step counter of ``s0`` (resume).

    Returns
    -------
    EvolutionResult
        ``termination`` is one of :data:`TERMINATIONS`; failures are data.
        ``step`` is the step counter of the final state.
    """
    thresholds = thresholds or ThresholdConfig()
    domain = domain or DomainSpec(enabled=False)
    if probe is None:
        probe = domain.center if domain.enabled else (0.0, 0.0, 0.0)
    acc = accumulators if accumulators is not None else Accumulators()
    state = s0
    step = start_step
    reports = []

    def accept(st, geo, rate, eig, dt):
        rep = slice_report(st, geo, rate, eig, domain, acc, step, dt, probe)
        if keep_reports:
            reports.append(rep)
        if on_report is not None:
            on_report(rep, st, domain, acc)
        return rep

    def result(term, fired=(), msg=""):
        return EvolutionResult(state, reports, term, list(fired), msg, domain, acc, step)

    try:
        rate, geo = rhs_with_geometry(state)
    except EvthError as exc:
        return result("step_failed", msg=str(exc))
    eig = kernels.eig3(np.asarray(state.g))
    rep = accept(state, geo, rate, eig, 0.0)
    fired = thresholds.fired(rep)
    if fired:
        return result("monitor_threshold", fired)

    while True:
        if state.tau == cfg.tau_end or (cfg.tau_end - state.tau) * cfg.sign < 0:
            return result("tau_end")
        if step - start_step >= cfg.max_steps:
            return result("max_steps")
        try:
            dt, last = _next_dt(state, cfg, eig)
        except DtUnderflow as exc:
            return result("dt_underflow", msg=str(exc))
        v_dom = max_speed(state, domain.mask(state.grid), eig)
        try:
            new = step_rk4(state, dt, k1=rate)
        except StepFailed as exc:
            return result("step_failed", msg=str(exc))
        if last:
            new = new.replace(tau=cfg.tau_end)
        try:
            rate, geo = rhs_with_geometry(new)
        except EvthError as exc:
            state = new
            return result("step_failed", msg=str(exc))
        eig = kernels.eig3(np.asarray(new.g))
        crushed = None
        # the faster of the two end slices bounds the speed over the step
        v_new = max_speed(new, domain.mask(new.grid), eig)
        try:
            domain = shrink_domain(domain, new, dt, v_max=max(v_dom, v_new))
        except DomainCrushed as exc:
            domain = exc.domain
            crushed = str(exc)
        state = new
        step += 1
        if crushed is not None:
            return result("domain_crushed", msg=crushed)
        rep = accept(state, geo, rate, eig, dt)
        fired = thresholds.fired(rep)
        if fired:
            return result("monitor_threshold", fired)
