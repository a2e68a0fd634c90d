import math

import numpy as np
import pytest

from conftest import KP, LN2
from evth.diagnostics import ThresholdConfig, hamiltonian_residual, momentum_residual
from evth.errors import DtUnderflow, StepFailed
from evth.evolution import (
    TERMINATIONS,
    EvolutionConfig,
    cfl_dt,
    evolve,
    rhs,
    step_rk4,
)
from evth.grid import GridSpec
from evth.oracles import KasnerParams, flat_state, kasner_fields, kasner_state


def rel_error(s, kp):
    g, k, n = kasner_fields(kp, s.tau)
    errs = [np.abs(s.n / n - 1).max()]
    for idx, comp in enumerate((0, 3, 5)):
        errs.append(np.abs(s.g[comp] / g[idx] - 1).max())
        errs.append(np.abs(s.k[comp] / k[idx] - 1).max())
    return max(errs)


class TestConfig:
    def test_defaults(self):
        cfg = EvolutionConfig()
        assert cfg.cfl_factor == 0.25 and cfg.sign == 1.0

    @pytest.mark.parametrize(
        "kw",
        [dict(cfl_factor=0.0), dict(cfl_factor=1.5), dict(dt_floor=0.0), dict(direction="up"),
         dict(max_steps=-1), dict(max_steps=2.5), dict(dt_fixed=0.0)],
    )
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            EvolutionConfig(**kw)


class TestCFL:
    def test_flat(self, grid8):
        assert cfl_dt(flat_state(grid8), EvolutionConfig()) == pytest.approx(0.25 * grid8.spacing, rel=1e-15)

    def test_kasner_ln2(self, grid8):
        v = 2 * 2 ** (1 / 3)
        dt = cfl_dt(kasner_state(KP, LN2, grid8), EvolutionConfig())
        assert dt == pytest.approx(0.25 * grid8.spacing / v, rel=1e-12)

    def test_small_lapse_grows_step(self, grid8):
        s = flat_state(grid8)
        slow = s.replace(n=np.full(grid8.shape, 0.1))
        assert cfl_dt(slow, EvolutionConfig()) > cfl_dt(s, EvolutionConfig())

    def test_underflow(self, grid8):
        s = flat_state(grid8)
        fast = s.replace(n=np.full(grid8.shape, 1e12))
        with pytest.raises(DtUnderflow):
            cfl_dt(fast, EvolutionConfig())


class TestStep:
    def test_flat_fixed_point(self, grid8):
        s = flat_state(grid8)
        t = step_rk4(s, 0.37)
        assert np.array_equal(t.g, s.g) and np.array_equal(t.k, s.k) and np.array_equal(t.n, s.n)
        assert t.tau == 0.37 and t.f is s.f

    def test_zero_dt(self, grid8):
        with pytest.raises(ValueError):
            step_rk4(flat_state(grid8), 0.0)

    def test_failure_reports_stage(self, grid8):
        # n -> n - dt n^2 tr k drives the lapse negative in the first half step
        s = kasner_state(KP, 0.0, grid8)
        with pytest.raises(StepFailed) as exc:
            step_rk4(s, -5.0)
        assert exc.value.stage in (2, 3, 4)

    def test_kasner_oracle(self, grid8):
        s = kasner_state(KP, 0.0, grid8)
        errs = []
        for nsteps in (64, 128):
            dt = LN2 / nsteps
            t = s
            for _ in range(nsteps):
                t = step_rk4(t, dt)
            errs.append(rel_error(t, KP))
        assert errs[0] < 1e-8
        assert errs[0] / errs[1] == pytest.approx(16.0, abs=2.0)

    def test_reversibility(self, grid8):
        s = kasner_state(KP, 0.2, grid8)
        dt = LN2 / 64
        t = s
        for _ in range(10):
            t = step_rk4(t, dt)
        for _ in range(10):
            t = step_rk4(t, -dt)
        assert np.abs(t.g - s.g).max() <= 1e-9
        assert np.abs(t.k - s.k).max() <= 1e-9
        assert np.abs(t.n - s.n).max() <= 1e-9


class TestEvolve:
    def test_flat_to_one(self, grid8):
        res = evolve(flat_state(grid8), EvolutionConfig(tau_end=1.0))
        assert res.termination == "tau_end"
        assert res.final_tau == 1.0
        for rep in res.reports:
            assert max(rep.ham_sup, rep.mom_sup, rep.breakdown_pointwise, rep.curvature_l2,
                       rep.wave_energy, rep.breakdown_integral_accum, rep.pi_l1linf_accum) <= 1e-12

    def test_reports_start_with_initial_slice(self, grid8):
        res = evolve(flat_state(grid8), EvolutionConfig(tau_end=0.1))
        assert res.reports[0].step == 0 and res.reports[0].dt == 0.0
        assert [r.step for r in res.reports] == list(range(len(res.reports)))
        assert res.step == res.reports[-1].step

    def test_homogeneity_preserved(self, grid8):
        res = evolve(kasner_state(KP, 0.0, grid8), EvolutionConfig(tau_end=1.0), keep_reports=False)
        s = res.state
        for f in (s.g, s.k, s.n[None]):
            spread = f.reshape(f.shape[0], -1)
            assert np.abs(spread.max(axis=1) - spread.min(axis=1)).max() <= 1e-12

    def test_backward_kasner_monitor_value(self, grid8):
        cfg = EvolutionConfig(tau_end=-LN2, direction="backward", dt_fixed=LN2 / 128)
        res = evolve(kasner_state(KP, 0.0, grid8), cfg)
        assert res.termination == "tau_end"
        assert res.reports[-1].breakdown_pointwise == pytest.approx(4.0, abs=1e-6)
        assert res.reports[-1].monitor_m == pytest.approx(2.0, abs=1e-9)

    def test_backward_kasner_threshold_100(self, grid8):
        cfg = EvolutionConfig(tau_end=-10.0, direction="backward")
        res = evolve(kasner_state(KP, 0.0, grid8), cfg, ThresholdConfig(pointwise=100.0))
        assert res.termination == "monitor_threshold"
        assert res.fired == ["pointwise"]
        # proxy 2 e^{-tau} crosses 100 at tau = -ln 50, inside the last step
        assert res.reports[-2].tau > -math.log(50.0) >= res.final_tau
        assert res.reports[-2].breakdown_pointwise <= 100.0 < res.reports[-1].breakdown_pointwise
        for r in res.reports:
            vals = [v for k, v in r.as_dict().items() if k != "domain_radius"]
            assert np.isfinite(vals).all()

    def test_threshold_at_start(self, grid8):
        res = evolve(kasner_state(KP, 0.0, grid8), EvolutionConfig(), ThresholdConfig(pointwise=1.0))
        assert res.termination == "monitor_threshold" and len(res.reports) == 1

    def test_max_steps(self, grid8):
        res = evolve(flat_state(grid8), EvolutionConfig(tau_end=10.0, max_steps=3))
        assert res.termination == "max_steps" and res.step == 3

    def test_step_failed_is_data(self, grid8):
        cfg = EvolutionConfig(tau_end=-10.0, direction="backward", dt_fixed=5.0)
        res = evolve(kasner_state(KP, 0.0, grid8), cfg)
        assert res.termination == "step_failed"
        assert "stage" in res.message

    def test_dt_underflow_is_data(self, grid8):
        cfg = EvolutionConfig(tau_end=1.0, dt_floor=0.1)
        res = evolve(flat_state(grid8), cfg, keep_reports=False)
        assert res.termination == "dt_underflow"
        assert res.termination in TERMINATIONS

    def test_hits_tau_end_exactly(self, grid8):
        res = evolve(kasner_state(KP, 0.0, grid8), EvolutionConfig(tau_end=0.3))
        assert res.final_tau == 0.3

    def test_constraints_preserved_500_steps(self, grid8):
        cfg = EvolutionConfig(tau_end=math.inf, max_steps=500, dt_fixed=LN2 / 128)
        res = evolve(kasner_state(KP, 0.0, grid8), cfg)
        assert len(res.reports) == 501
        assert max(r.ham_sup for r in res.reports) <= 1e-10
        assert max(r.mom_sup for r in res.reports) <= 1e-10

    def test_resume_equals_single_run(self, grid8):
        s0 = kasner_state(KP, 0.0, grid8)
        one = evolve(s0, EvolutionConfig(tau_end=0.5), keep_reports=False)
        half = evolve(s0, EvolutionConfig(tau_end=0.5, max_steps=5), keep_reports=False)
        rest = evolve(half.state, EvolutionConfig(tau_end=0.5), accumulators=half.accumulators,
                      start_step=half.step, keep_reports=False)
        assert np.array_equal(rest.state.g, one.state.g)
        assert rest.step == one.step
        assert rest.accumulators.integral == one.accumulators.integral


class TestRhs:
    def test_flat_zero(self, grid8):
        r = rhs(flat_state(grid8))
        assert not np.any(r.dg) and not np.any(r.dk) and not np.any(r.dn)

    def test_general_f_kasner(self, grid8):
        kp = KasnerParams.from_p1p2(0.0, 0.0, f=2.0)
        s = kasner_state(kp, 0.3, grid8)
        assert np.abs(hamiltonian_residual(s)).max() <= 1e-12
        assert np.abs(momentum_residual(s)).max() == 0.0
        r = rhs(s)
        assert np.allclose(r.dk[5], -2.0 * math.exp(0.6), rtol=1e-14)
        assert not np.any(r.dk[:5])

    def test_perturbed_self_convergence(self):
        from evth.oracles import perturbed_flat

        finals = {}
        for npts in (8, 16, 32):
            grid = GridSpec(npts)
            cfg = EvolutionConfig(tau_end=0.25, dt_fixed=0.25 / 64)
            finals[npts] = evolve(perturbed_flat(grid, 1e-4), cfg, keep_reports=False).state.g
        d1 = np.abs(finals[8] - finals[16][:, ::2, ::2, ::2]).max()
        d2 = np.abs(finals[16] - finals[32][:, ::2, ::2, ::2]).max()
        assert math.log2(d1 / d2) >= 3.5
