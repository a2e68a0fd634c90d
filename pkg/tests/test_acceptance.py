"""Acceptance criteria, one printed PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v``. Expensive runs are cached per
module so the causal-ball and Gronwall criteria reuse the histories of
criteria 1 to 6.
"""

import functools
import math
import time

import numpy as np
import pytest

from conftest import KP, LN2, flat_metric
from evth.causal import (
    causal_ball_check,
    extent_lower_bound,
    scale_state,
    temporal_extent,
)
from evth.cli import main
from evth.diagnostics import ThresholdConfig, quasi_isometry_bound
from evth.domain import MONITOR_REACH, STEP_REACH, DomainSpec
from evth.evolution import EvolutionConfig, evolve
from evth.grid import GridSpec
from evth.oracles import flat_state, kasner_fields, kasner_state, perturbed_flat, tt_direction
from evth.radius import chart_radius, volume_radius
from evth.state import gauge_residual, init_gauge

GRID8 = GridSpec(8)
MONITOR_KEYS = (
    "ham_sup", "ham_l2", "mom_sup", "mom_l2", "breakdown_pointwise", "breakdown_integral_accum",
    "pi_l1linf_accum", "curvature_l2", "wave_energy", "gauge_residual",
)


def verdict(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}: {detail}"
    print("\n" + line)
    return ok


@pytest.fixture
def say(capsys):
    def emit(*args):
        with capsys.disabled():
            return verdict(*args)

    return emit


def kasner_rel_error(s):
    g, k, n = kasner_fields(KP, s.tau)
    errs = [np.abs(s.n / n - 1).max()]
    for idx, comp in enumerate((0, 3, 5)):
        errs.append(np.abs(s.g[comp] / g[idx] - 1).max())
        errs.append(np.abs(s.k[comp] / k[idx] - 1).max())
    return float(max(errs))


@functools.cache
def kasner_forward(nsteps):
    cfg = EvolutionConfig(tau_end=LN2, dt_fixed=LN2 / nsteps)
    t0 = time.perf_counter()
    res = evolve(kasner_state(KP, 0.0, GRID8), cfg)
    return res, time.perf_counter() - t0


@functools.cache
def flat_1000():
    grid = GridSpec(32)
    evolve(flat_state(grid), EvolutionConfig(tau_end=math.inf, max_steps=2), keep_reports=False)
    t0 = time.perf_counter()
    res = evolve(flat_state(grid), EvolutionConfig(tau_end=math.inf, max_steps=1000))
    return res, time.perf_counter() - t0


@functools.cache
def perturbed(npts, amp):
    cfg = EvolutionConfig(tau_end=0.25, dt_fixed=0.25 / 64)
    return evolve(perturbed_flat(GridSpec(npts), amp), cfg)


@functools.cache
def backward_kasner():
    cfg = EvolutionConfig(tau_end=-LN2, direction="backward", dt_fixed=LN2 / 128)
    return evolve(kasner_state(KP, 0.0, GRID8), cfg)


@functools.cache
def forward_integral():
    return evolve(kasner_state(KP, 0.0, GRID8), EvolutionConfig(tau_end=1.0, dt_fixed=1.0 / 256))


@functools.cache
def scaling_pair(cfl):
    cfg = EvolutionConfig(tau_end=-5.0, direction="backward", cfl_factor=cfl)
    th = ThresholdConfig(pointwise=2 * math.e)
    s0 = kasner_state(KP, 0.0, GRID8)
    t1, r1 = temporal_extent(s0, (0, 0, 0), math.inf, th, cfg, return_result=True)
    t2, r2 = temporal_extent(scale_state(s0, 2.0), (0, 0, 0), math.inf, th.scaled(0.5), cfg, return_result=True)
    return t1, t2, r1, r2


def acceptance_histories():
    runs = {
        "1 kasner dt/64": kasner_forward(64)[0],
        "1 kasner dt/128": kasner_forward(128)[0],
        "2 kasner dt/256": kasner_forward(256)[0],
        "3 flat 32^3": flat_1000()[0],
        "5 backward kasner": backward_kasner(),
        "5 forward integral": forward_integral(),
    }
    for n in (16, 32, 64):
        runs[f"4 perturbed {n}^3"] = perturbed(n, 1e-4)
    runs["4 perturbed 32^3 x2"] = perturbed(32, 2e-4)
    for cfl in (0.25, 0.125):
        _, _, r1, r2 = scaling_pair(cfl)
        runs[f"6 scaling cfl {cfl}"] = r1
        runs[f"6 scaling cfl {cfl} lam 2"] = r2
    return runs


def test_c01_kasner_oracle(say):
    (r64, t64), (r128, _) = kasner_forward(64), kasner_forward(128)
    e64, e128 = kasner_rel_error(r64.state), kasner_rel_error(r128.state)
    ratio = e64 / e128
    ok = e64 <= 1e-8 and abs(ratio - 16) <= 2 and t64 < 5.0 and r64.final_tau == LN2
    assert say(1, "Kasner oracle", ok, f"rel err {e64:.2e} <= 1e-8, halving ratio {ratio:.2f} in 16 +- 2, {t64:.2f} s < 5 s")


def test_c02_gauge_identity(say):
    res = [gauge_residual(kasner_forward(n)[0].state) for n in (64, 128, 256)]
    orders = [math.log2(a / b) for a, b in zip(res, res[1:])]
    ok = res[0] <= 1e-9 and all(abs(o - 4) <= 0.5 for o in orders)
    assert say(2, "gauge identity", ok, f"residual {res[0]:.2e} <= 1e-9, orders {orders[0]:.2f}, {orders[1]:.2f} ~ 4")


def test_c03_flat_fixed_point(say):
    res, elapsed = flat_1000()
    worst = max(getattr(r, key) for r in res.reports for key in MONITOR_KEYS)
    ok = res.step == 1000 and worst <= 1e-12 and elapsed < 120.0
    assert say(3, "flat fixed point", ok, f"{res.step} steps, worst monitor {worst:.1e} <= 1e-12, {elapsed:.1f} s < 120 s")


def test_c04_constraint_convergence(say):
    g = {n: perturbed(n, 1e-4).state.g for n in (16, 32, 64)}
    d1 = np.abs(g[16] - g[32][:, ::2, ::2, ::2]).max()
    d2 = np.abs(g[32][:, ::2, ::2, ::2] - g[64][:, ::4, ::4, ::4]).max()
    order = math.log2(d1 / d2)
    h1 = perturbed(32, 1e-4).reports[-1].ham_sup
    h2 = perturbed(32, 2e-4).reports[-1].ham_sup
    ok = order >= 3.5 and abs(h2 / h1 - 4) <= 0.5
    assert say(4, "constraint convergence", ok, f"self-convergence order {order:.2f} >= 3.5, H ratio {h2 / h1:.3f} in 4 +- 0.5")


def test_c05_monitor_calibration(say, tmp_path, capsys):
    pw = backward_kasner().reports[-1].breakdown_pointwise
    acc = forward_integral().accumulators.integral
    target = 1 - math.exp(-1)
    cfgfile = tmp_path / "run.toml"
    cfgfile.write_text(
        '[grid]\nnpts = 8\n[initial]\nkind = "kasner"\np1 = 0.6666666666666666\np2 = 0.6666666666666666\n'
        '[evolution]\ntau_end = -20.0\ndirection = "backward"\n[thresholds]\npointwise = 100.0\n'
        '[output]\ncsv = "out.csv"\n'
    )
    code = main([str(cfgfile)])
    capsys.readouterr()
    rows = [line.split(",") for line in (tmp_path / "out.csv").read_text().splitlines()[2:]]
    finite = all(math.isfinite(float(v)) for row in rows for v in row if v not in ("inf",))
    ok = abs(pw - 4.0) <= 1e-6 and abs(acc - target) <= 1e-4 and code == 2 and finite
    assert say(5, "monitor calibration", ok,
               f"pointwise {pw:.9f} = 4 +- 1e-6, integral {acc:.6f} = {target:.5f} +- 1e-4 (m = proxy/2), "
               f"threshold 100 exit {code} with {len(rows)} finite rows")


def test_c06_scaling_law(say):
    t1, t2, _, _ = scaling_pair(0.25)
    u1, u2, _, _ = scaling_pair(0.125)
    ok = abs(t2 / t1 - 2) <= 0.04 and abs(u2 / u1 - 2) <= 0.01
    assert say(6, "scaling law", ok, f"ratio {t2 / t1:.5f} = 2 +- 2%, half dt {u2 / u1:.5f} = 2 +- 0.5%")


def test_c07_domain_of_dependence(say):
    grid = GridSpec(32)
    h = grid.spacing
    c, r0 = (0.5, 0.5, 0.5), 0.3
    s = perturbed_flat(grid, 1e-3, (1, 1, 0))
    out = grid.periodic_distance(c) >= r0 + MONITOR_REACH * h
    rng = np.random.default_rng(7)
    g, k, n = np.array(s.g), np.array(s.k), np.array(s.n)
    for comp in (0, 3, 5):
        g[comp, out] += 1e-2 * rng.random(out.sum())
    k[:, out] += 1e-2 * rng.standard_normal((6, out.sum()))
    n[out] *= 1.05
    s2 = init_gauge(g, k, n, grid)
    cfg = EvolutionConfig(tau_end=1.0, dt_fixed=0.25 * h)
    dom = DomainSpec(center=c, radius=r0, halo=STEP_REACH * h)
    a, b = (evolve(x, cfg, domain=dom, probe=c).reports for x in (s, s2))
    worst = 0.0
    for ra, rb in zip(a, b):
        for key, v in ra.as_dict().items():
            if math.isfinite(v):
                worst = max(worst, abs(v - getattr(rb, key)))
    ok = len(a) == len(b) >= 2 and worst <= 1e-12
    assert say(7, "domain of dependence", ok,
               f"{len(a)} slices, max interior change {worst:.1e} <= 1e-12 "
               f"(halo {STEP_REACH}h per step, edit outside r0 + {MONITOR_REACH}h)")


def test_c08_causal_ball(say):
    checks = {name: causal_ball_check(res.reports) for name, res in acceptance_histories().items()}
    checked = {k: c for k, c in checks.items() if c.checked}
    ok_runs = all(c.passed and c.margin > 0 for c in checked.values())
    reps = [dict(step=i, tau=0.1 * i, speed_integral=2.5 * i, lapse_min=1.0, lapse_max=1.0,
                 spectrum_min=1.0, spectrum_max=1.0) for i in range(4)]
    falsified = not causal_ball_check(reps).passed
    margin = min(c.margin for c in checked.values())
    ok = ok_runs and falsified and len(checked) >= 10
    assert say(8, "causal ball", ok,
               f"{len(checked)} runs checked, min margin {margin:.3g} > 0, injected 25 nu speed fails: {falsified}")


def test_c09_gronwall(say):
    worst = -math.inf
    steps = 0
    for res in acceptance_histories().values():
        reps = res.reports
        c0 = max(reps[0].spectrum_max, 1.0 / reps[0].spectrum_min)
        hist = [r.nk_sup for r in reps]
        dts = [r.dt for r in reps[1:]]
        for i, r in enumerate(reps):
            c = quasi_isometry_bound(hist[: i + 1], dts[:i], c0)
            worst = max(worst, r.spectrum_max / (c * (1 + 1e-6)), (1 - 1e-6) / (c * r.spectrum_min))
            steps += 1
    ok = worst <= 1.0
    assert say(9, "Gronwall property", ok, f"{steps} slices, worst spectrum / bound {worst:.6f} <= 1")


def test_c10_radius(say):
    grid = GridSpec(64)
    vr = volume_radius(flat_metric(grid), (0.5, 0.5, 0.5), grid, [12 * grid.spacing]).volume_radius_ratio
    ball = 4 * math.pi / 3
    small, big = GridSpec(32), GridSpec(32, 2.0)
    x = small.mesh()[0]
    e = tt_direction((1, 0, 0))
    g = flat_metric(small)
    g[3] += 0.3 * np.sin(4 * math.pi * x) * e[1, 1]
    g[5] += 0.3 * np.sin(4 * math.pi * x) * e[2, 2]
    r = chart_radius(g, (0.5, 0.5, 0.5), small)
    r2 = chart_radius(g, (1.0, 1.0, 1.0), big)
    rhs = np.linspace(0.01, 3.0, 300)
    lb = [extent_lower_bound(1.0, rh, 0.7) for rh in rhs]
    shape = all(a <= b for a, b in zip(lb, lb[1:])) and all(v == min(0.7, rh * 0.7) for rh, v in zip(rhs, lb))
    ok = abs(vr - ball) <= 0.1 * ball and abs(r2 - 2 * r) <= small.spacing and shape
    assert say(10, "radius diagnostics", ok,
               f"volume ratio {vr:.4f} within 10% of {ball:.4f}, chart {r2:.4f} vs 2 x {r:.4f} within h, "
               f"lower-bound shape exact: {shape}")
