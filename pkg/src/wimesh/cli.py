"""Command line entry point: ``wimesh run|sweep-load|sweep-subnet|compare|tune``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import harness
from .config import ConfigError, ExperimentConfig, load_config
from .energy import rows_to_csv
from .sim import simulate

log = logging.getLogger("wimesh")


def _floats(text: str):
    return [float(x) for x in text.split(",") if x]


def _ints(text: str):
    return [int(x) for x in text.split(",") if x]


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def _out(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args) -> int:
    cfg = _config(args)
    out = _out(args)
    res = simulate(cfg, verbose_events=args.verbose_events, record_slots=args.slot_csv)
    rep = harness.RunReport(cfg, res.summary)
    text = rows_to_csv([rep.row()])
    (out / "run.csv").write_text(text)
    (out / "config.txt").write_text(cfg.to_text())
    if args.verbose_events:
        (out / "events.csv").write_text(res.events_csv())
    if args.slot_csv and res.mac is not None:
        lines = ["epoch,owner,start,allocated,used,info_flits"]
        lines += [f"{r.epoch},{r.owner},{r.start},{r.allocated},{r.used},{r.info_flits}"
                  for r in res.mac.records]
        (out / "slots.csv").write_text("\n".join(lines) + "\n")
    sys.stdout.write(text)
    return 0


def cmd_sweep_load(args) -> int:
    cfg = _config(args)
    out = _out(args)
    sw = harness.sweep_load(cfg, _floats(args.loads), jobs=args.jobs)
    harness.write_csv(out / "sweep_load.csv", [r.row() for r in sw.reports])
    print(f"zero-load latency {sw.zero_load_latency:.1f} cycles; saturation at {sw.saturation_load}; "
          f"peak bandwidth per core {sw.peak_bandwidth * 1e-9:.4f} Gbps")
    if args.emit_plots:
        harness.plot_latency_curves(out / "latency.png", {cfg.scheme: sw})
    return 0


def cmd_sweep_subnet(args) -> int:
    cfg = _config(args)
    out = _out(args)
    res = harness.sweep_subnet(cfg, _ints(args.sizes), _floats(args.loads), scheme=args.scheme,
                               jobs=args.jobs)
    (out / "sweep_subnet.csv").write_text(res.table())
    sys.stdout.write(res.table())
    print(f"best subnet size: {res.best_size}")
    return 0


def cmd_compare(args) -> int:
    cfg = _config(args)
    out = _out(args)
    cmp = harness.compare_schemes(cfg, args.schemes.split(","), args.baseline,
                                  _floats(args.loads), jobs=args.jobs)
    harness.write_csv(out / "compare_runs.csv", cmp.rows())
    (out / "compare.csv").write_text(cmp.report())
    sys.stdout.write(cmp.report())
    if args.emit_plots:
        harness.plot_latency_curves(out / "latency.png", cmp.sweeps)
        harness.plot_peak_bars(out / "peak_bandwidth.png", cmp.sweeps)
    return 0


def cmd_tune(args) -> int:
    from .tuner import collect_training_set, two_step_optimize

    cfg = _config(args)
    out = _out(args)
    ts = collect_training_set(cfg, epochs=args.epochs, epoch_cycles=args.epoch_cycles)
    res = two_step_optimize(ts, rounds=args.rounds)
    w = res.weights
    lines = [f"# tuned on {ts.source}, {len(ts)} epochs of {ts.epoch_cycles} cycles",
             f"kp = {w.kp!r}", f"ki = {w.ki!r}", f"kd = {w.kd!r}",
             f"# J = {res.cost!r}  rmse = {res.rmse!r}  rounds = {res.rounds}"]
    (out / "weights.txt").write_text("\n".join(lines) + "\n")
    (out / "cost_trace.txt").write_text("".join(f"{j!r}\n" for j in res.trace))
    print("\n".join(lines))
    for msg in res.warnings:
        log.warning(msg)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wimesh", description="WiMesh wireless NoC MAC simulator")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out-dir", default="out", help="directory for CSV/plot artifacts")
    common.add_argument("--emit-plots", action="store_true", help="write PNG plots")
    common.add_argument("--verbose-events", action="store_true",
                        help="write a per-cycle event log (run only)")
    common.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[common], help="one simulation run")
    r.add_argument("--slot-csv", action="store_true", help="write per-slot allocation/usage")
    r.set_defaults(func=cmd_run)

    loads = ",".join(str(x) for x in harness.DEFAULT_LOADS)
    s = sub.add_parser("sweep-load", parents=[common], help="latency/bandwidth vs injection load")
    s.add_argument("--loads", default=loads)
    s.set_defaults(func=cmd_sweep_load)

    n = sub.add_parser("sweep-subnet", parents=[common], help="peak bandwidth vs subnet size")
    n.add_argument("--sizes", default="4,8,16")
    n.add_argument("--loads", default=loads)
    n.add_argument("--scheme", default="tmac")
    n.set_defaults(func=cmd_sweep_subnet)

    c = sub.add_parser("compare", parents=[common], help="compare MAC schemes")
    c.add_argument("--schemes", default="tmac,psam,dsam,racm")
    c.add_argument("--baseline", default=None)
    c.add_argument("--loads", default=loads)
    c.set_defaults(func=cmd_compare)

    t = sub.add_parser("tune", parents=[common], help="fit predictor weights")
    t.add_argument("--epochs", type=int, default=5000)
    t.add_argument("--epoch-cycles", type=int, default=100)
    t.add_argument("--rounds", type=int, default=1000)
    t.set_defaults(func=cmd_tune)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("invalid configuration: %s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
