"""Command-line front end.

Exit codes: 0 success, 1 runtime failure, 2 config error, 3 validation failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, FitError, IsccError, NoGainError
from .experiment import (load_config, run_sweep, solve_all, validate_model, write_sweep_csv,
                         write_validation_csv)
from .sensing import ClassSet, SensingParams, gain_breakdown, gain_condition, save_json
from .signal_sim import (SIM_METHODS, fit_class_stats, matched_spec, power_rows, read_power_csv,
                         simulate_powers, write_power_csv)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_VALIDATION = 0, 1, 2, 3


def _out(path, default):
    return Path(path if path is not None else default)


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, seed=args.seed, step=args.step)
    rows = run_sweep(cfg)
    out = _out(args.output, cfg.output)
    write_sweep_csv(out, rows, cfg)
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = load_config(args.config, seed=args.seed, step=args.step)
    plans = [p.to_dict() for p in solve_all(cfg)]
    text = json.dumps(plans, indent=2, sort_keys=True) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = load_config(args.config, seed=args.seed)
    if cfg.validate.trials < 1000:
        print(f"warning: only {cfg.validate.trials} trials; standard errors are wide and a pass "
              "says little", file=sys.stderr)
    cells = validate_model(cfg)
    out = _out(args.output, "validate.csv")
    write_validation_csv(out, cells)
    failed = [c for c in cells if not c.passed]
    print(f"validate: {len(cells) - len(failed)}/{len(cells)} cells pass ({out})")
    for c in failed:
        print(f"  FAIL {c.label} f_s={c.f_s:g} {c.quantity} eta={c.eta if c.eta is not None else '-'}"
              f" predicted={c.predicted:.6g} empirical={c.empirical:.6g} tol={c.tolerance:.3g}")
    return EXIT_VALIDATION if failed else EXIT_OK


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, seed=args.seed)
    v = cfg.validate
    rows = []
    for i, c in enumerate(cfg.class_set.classes):
        spec = matched_spec(c, cfg.sensing, static=(i == 0))
        label = "static" if i == 0 else f"action{i}"
        for f_s in v.f_s:
            powers = simulate_powers(spec, cfg.sensing, f_s, args.trials, v.seed + 1000 * i,
                                     method=args.method)
            rows.extend(power_rows(label, f_s, powers))
    out = _out(args.output, "powers.csv")
    write_power_csv(out, rows)
    print(f"wrote {len(rows)} samples to {out}")
    return EXIT_OK


def cmd_fit(args) -> int:
    sp = load_config(args.config).sensing if args.config else SensingParams()
    data = read_power_csv(args.samples)
    labels = list(data)
    static = args.static or labels[0]
    if static not in data:
        raise ConfigError(f"--static: class {static!r} not present in {args.samples}")
    order = [static] + [c for c in labels if c != static]
    counts = {c: sum(len(v) for _, v in data[c]) for c in order}
    total = sum(counts.values())
    stats = [fit_class_stats(data[c], sp, prior=counts[c] / total) for c in order]
    cs = ClassSet(tuple(stats))
    out = _out(args.output, "classes.json")
    save_json(out, cs, sp)
    print(f"fitted {len(stats)} classes (static: {static}) -> {out}")
    return EXIT_OK


def cmd_explain(args) -> int:
    cfg = load_config(args.config)
    rates = args.fs or list(cfg.validate.f_s)
    for f_s in rates:
        cond = gain_condition(cfg.class_set, cfg.sensing, cfg.alpha, f_s)
        print(f"f_s={f_s:g} Hz: gain condition {'holds' if cond.holds else 'fails'} "
              f"(margin {cond.margin:.6g}, {cond.reason})")
        if not cond:
            continue
        b = gain_breakdown(cfg.class_set, cfg.sensing, cfg.alpha, f_s)
        root = "none" if b.root_branch is None else f"{b.root_branch:.6g} at eta={b.eta_root:.6g}"
        print(f"  saving at accuracy-equal threshold: {root}")
        print(f"  saving at upper threshold: {b.upper_branch:.6g}")
        print(f"  predicted saving ratio: {b.rho:.6g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="iscc", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True, step=True):
        sp.add_argument("config", help="experiment config (JSON)")
        sp.add_argument("-o", "--output", help="output path (defaults to the config's)")
        if seed:
            sp.add_argument("--seed", type=int, help="run this single seed instead of the config's")
        if step:
            sp.add_argument("--step", type=int, help="sampling-rate stride for the search")

    s = sub.add_parser("sweep", help="run schemes over a sweep axis and write CSV")
    common(s)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("solve", help="solve one scenario with every configured scheme")
    common(s)
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("validate", help="Monte Carlo check of the detection model")
    common(s, step=False)
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("simulate", help="write simulated band-power samples as CSV")
    common(s, step=False)
    s.add_argument("--trials", type=int, default=10_000, help="windows per class and rate")
    s.add_argument("--method", choices=SIM_METHODS, default="full",
                   help="full: synthesise whole windows; band: draw the band bins directly")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("fit", help="fit class statistics from a power-sample CSV")
    s.add_argument("samples", help="CSV with columns class,f_s,trial,P")
    s.add_argument("-c", "--config", help="config supplying sensing parameters")
    s.add_argument("--static", help="label of the static class (default: first in file)")
    s.add_argument("-o", "--output", help="class-set JSON to write (default classes.json)")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("explain", help="print the gain condition and saving-ratio branches")
    s.add_argument("config", help="experiment config (JSON)")
    s.add_argument("--fs", type=float, action="append", help="sampling rate(s) to report")
    s.set_defaults(func=cmd_explain)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FitError, NoGainError, IsccError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
