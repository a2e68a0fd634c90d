"""Command-line runner: ``evth <config.toml> [--resume <checkpoint>]``.

Exit codes:

* 0 ``tau_end`` reached
* 1 stopped early without a failure (``max_steps`` or ``domain_crushed``)
* 2 a monitor threshold fired
* 3 numerical failure (``step_failed``, ``dt_underflow``)
* 4 configuration or checkpoint error

The CSV gets one row per accepted slice. The last line of standard output is
a JSON record with ``termination``, ``final_tau``, ``proper_time`` and
``worst_monitors``.
"""

import argparse
import json
import logging
import math
import sys

from . import __version__
from ._jit import set_threads_from_env
from .checkpoint import read_checkpoint, write_checkpoint
from .config import load_config
from .domain import DomainSpec
from .errors import AmplitudeTooLarge, CheckpointError, ConfigError, EvthError
from .evolution import evolve
from .oracles import flat_state, kasner_state, perturbed_flat

__all__ = ["CSV_COLUMNS", "SCHEMA_VERSION", "EXIT_CODES", "main", "run"]

log = logging.getLogger("evth")

SCHEMA_VERSION = 1
CSV_COLUMNS = (
    "step",
    "tau",
    "dt",
    "gauge_residual",
    "ham_sup",
    "ham_l2",
    "mom_sup",
    "breakdown_pointwise",
    "breakdown_integral",
    "pi_l1",
    "curvature_l2",
    "spectrum_min",
    "spectrum_max",
    "domain_radius",
    "wave_energy",
    "proper_time",
)
# report attribute behind each CSV column
_SOURCE = {"breakdown_integral": "breakdown_integral_accum", "pi_l1": "pi_l1linf_accum"}
MONITOR_COLUMNS = (
    "gauge_residual",
    "ham_sup",
    "ham_l2",
    "mom_sup",
    "breakdown_pointwise",
    "breakdown_integral",
    "pi_l1",
    "curvature_l2",
    "wave_energy",
)
EXIT_CODES = {
    "tau_end": 0,
    "max_steps": 1,
    "domain_crushed": 1,
    "monitor_threshold": 2,
    "step_failed": 3,
    "dt_underflow": 3,
}
EXIT_CONFIG = 4


def csv_row(rep):
    vals = []
    for col in CSV_COLUMNS:
        v = getattr(rep, _SOURCE.get(col, col))
        vals.append(str(v) if col == "step" else repr(float(v)))
    return ",".join(vals)


def csv_header():
    return f"# evth monitor csv schema {SCHEMA_VERSION}\n" + ",".join(CSV_COLUMNS) + "\n"


def _initial_state(cfg, resume):
    if resume is not None:
        ck = read_checkpoint(resume)
        if ck.state.grid != cfg.grid:
            raise ConfigError(
                f"checkpoint grid (npts={ck.state.grid.npts}, period={ck.state.grid.period}) "
                f"does not match config grid (npts={cfg.grid.npts}, period={cfg.grid.period})"
            )
        return ck
    if cfg.kind == "flat":
        return flat_state(cfg.grid)
    if cfg.kind == "kasner":
        return kasner_state(cfg.kasner, cfg.initial["tau"], cfg.grid)
    if cfg.kind == "perturbed":
        try:
            return perturbed_flat(cfg.grid, cfg.initial["amplitude"], cfg.initial["wavevector"])
        except AmplitudeTooLarge as exc:
            raise ConfigError(str(exc)) from exc
    ck = read_checkpoint(cfg.initial["path"])
    if ck.state.grid != cfg.grid:
        raise ConfigError("checkpoint grid does not match config grid")
    return ck


def _finite_or_none(d):
    return {k: (v if math.isfinite(v) else None) for k, v in d.items()}


def _ckpt_path(template, step):
    return template.replace("{step}", str(step))


class _Worst:
    def __init__(self):
        self.vals = {c: 0.0 for c in MONITOR_COLUMNS}
        self.vals["spectrum_min"] = math.inf
        self.vals["spectrum_max"] = -math.inf

    def update(self, rep):
        for c in MONITOR_COLUMNS:
            self.vals[c] = max(self.vals[c], float(getattr(rep, _SOURCE.get(c, c))))
        self.vals["spectrum_min"] = min(self.vals["spectrum_min"], rep.spectrum_min)
        self.vals["spectrum_max"] = max(self.vals["spectrum_max"], rep.spectrum_max)


def run(cfg, resume=None, out=None):
    """Execute a validated :class:`RunConfig`; returns ``(exit_code, record)``.

    Raises
    ------
    ConfigError, CheckpointError
        Before any evolution happens.
    """
    out = out or sys.stdout
    start = _initial_state(cfg, resume)
    if hasattr(start, "state"):
        state, step0, acc = start.state, start.step, start.accumulators
        radius, speed = start.domain_radius, start.speed_integral
    else:
        state, step0, acc = start, 0, None
        radius, speed = cfg.domain_radius, 0.0
    domain = DomainSpec(
        center=cfg.domain_center,
        radius=radius if cfg.domain_enabled else math.inf,
        speed_integral=speed,
        enabled=cfg.domain_enabled,
        halo=cfg.domain_halo,
    )
    resuming = step0 > 0 or acc is not None
    csv = None
    if cfg.csv_path is not None:
        append = resuming and cfg.csv_path.exists()
        csv = open(cfg.csv_path, "a" if append else "w", encoding="ascii", newline="")
        if not append:
            csv.write(csv_header())
    worst = _Worst()
    first = [True]

    def on_report(rep, st, dom, accs):
        # a resumed run's first slice is the checkpointed one, already written
        skip = resuming and first[0]
        first[0] = False
        worst.update(rep)
        if csv is not None and not skip:
            csv.write(csv_row(rep) + "\n")
            csv.flush()
        stride = cfg.checkpoint_stride
        if stride and rep.step % stride == 0 and rep.step != step0:
            write_checkpoint(_ckpt_path(cfg.checkpoint_path, rep.step), st, rep.step, accs, dom)

    probe = cfg.domain_center
    try:
        res = evolve(
            state,
            cfg.evolution,
            cfg.thresholds,
            domain=domain,
            probe=probe,
            on_report=on_report,
            accumulators=acc,
            start_step=step0,
            keep_reports=False,
        )
    finally:
        if csv is not None:
            csv.close()
    final_step = res.step
    if cfg.checkpoint_path is not None:
        write_checkpoint(_ckpt_path(cfg.checkpoint_path, final_step), res.state, final_step, res.accumulators, res.domain)
    if cfg.radius_enabled:
        from .radius import radius_report

        point = cfg.radius_point or cfg.domain_center
        rr = radius_report(res.state.g, point, cfg.grid, cfg.radius_scales, l=cfg.radius_l, max_r=cfg.radius_max_r)
        print("radius " + json.dumps({
            "point": list(rr.point),
            "volume_radius_ratio": rr.volume_radius_ratio,
            "chart_radius": rr.chart_radius,
            "scales": rr.scales_tested,
            "unreliable_scales": rr.unreliable_scales,
        }), file=out)
    if res.message:
        log.warning("%s: %s", res.termination, res.message)
    record = {
        "termination": res.termination,
        "final_tau": res.state.tau,
        "proper_time": res.accumulators.proper_time,
        "worst_monitors": _finite_or_none(worst.vals),
    }
    if res.fired:
        record["fired"] = res.fired
    print(json.dumps(record), file=out)
    return EXIT_CODES[res.termination], record


def main(argv=None):
    parser = argparse.ArgumentParser(prog="evth", description=__doc__.split("\n")[0])
    parser.add_argument("config", help="TOML run configuration")
    parser.add_argument("--resume", metavar="CHECKPOINT", help="continue from a checkpoint")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s", stream=sys.stderr)
    set_threads_from_env()
    try:
        cfg = load_config(args.config)
        code, _ = run(cfg, resume=args.resume)
    except (ConfigError, CheckpointError) as exc:
        print(f"evth: error: {exc}", file=sys.stderr)
        print(json.dumps({"termination": "config_error", "message": str(exc)}))
        return EXIT_CONFIG
    except EvthError as exc:
        print(f"evth: numerical failure: {exc}", file=sys.stderr)
        return 3
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
