"""Command-line front end.

Subcommands ``walk``, ``ensemble``, ``fit``, ``experiment`` and ``crw-check``
read a YAML run configuration (optionally starting from a shipped preset),
apply flag overrides, validate everything, then compute and write CSV
results plus a ``run.json`` sidecar into the output directory.

Exit codes: 0 success, 2 configuration error, 3 runtime contract violation,
4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import os
import sys

import numpy as np
from scipy import stats

from . import __version__
from .analysis import dispersion_exponent, fixed_exponent_prefactor, loglog_fit
from .coins import GENERATOR_NAME, CrwEmulation, Fixed, SeedSpec, coin_sequence, describe_policy
from .config import COMMANDS, ConfigError, RunConfig, parse_config, preset_names
from .ensemble import EnsembleSpec, build_grid, run_ensemble, write_csv
from .errors import ContractError, DomainError
from .evolution import WalkConfig, run
from .protocols import entropy_trajectories, search_best_sequence
from .state import SPIN_UP, localized

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONTRACT = 3
EXIT_IO = 4


def _header(cfg: RunConfig) -> str:
    return f"config_sha256={cfg.config_hash} master_seed={cfg.master_seed}"


def _write_sidecar(cfg: RunConfig, results: dict) -> str:
    meta = {
        "command": cfg.command,
        "config_sha256": cfg.config_hash,
        "master_seed": cfg.master_seed,
        "generator": GENERATOR_NAME,
        "subsample": cfg.subsample,
        "version": __version__,
        "config": cfg.raw,
        "results": results,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    path = os.path.join(cfg.out, "run.json")
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return path


def _fit_or_none(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except DomainError:
        return None


# -- walk -----------------------------------------------------------------------


def _walk_rows(traj, record):
    cols = ["t"]
    if "S_E" in record:
        cols.append("S_E")
    if "alpha" in record:
        cols.append("alpha")
    if "gamma" in record:
        cols += ["gamma_re", "gamma_im"]
    if "bloch" in record:
        cols += ["r1", "r2", "r3"]
    if "moments" in record:
        cols += ["mean_j", "variance"]
    if "trace_distance" in record:
        cols.append("D")
    rows = []
    for r in traj.records:
        row = [r.t]
        if "S_E" in record:
            row.append(r.S_E)
        if "alpha" in record:
            row.append(r.alpha)
        if "gamma" in record:
            row += [r.gamma.real, r.gamma.imag]
        if "bloch" in record:
            row += list(r.bloch)
        if "moments" in record:
            row += [r.mean_j, r.variance]
        if "trace_distance" in record:
            row.append(r.trace_distance)
        rows.append(row)
    return cols, rows


def cmd_walk(cfg: RunConfig, dry_run: bool) -> int:
    width = cfg.initial.width
    print(f"walk: {cfg.steps} steps, initial window {width} sites, policy {describe_policy(cfg.policy)['kind']}")
    if dry_run:
        print(f"plan: 1 walker, about {cfg.steps * (width + cfg.steps):,} site updates")
        return EXIT_OK
    traj = run(WalkConfig(cfg.initial, cfg.policy, cfg.steps, SeedSpec(cfg.master_seed, 0), cfg.record))
    os.makedirs(cfg.out, exist_ok=True)
    cols, rows = _walk_rows(traj, cfg.record)
    write_csv(os.path.join(cfg.out, "trajectory.csv"), cols, rows, _header(cfg))
    s = traj.final
    write_csv(os.path.join(cfg.out, "final_state.csv"), ["j", "re_a", "im_a", "re_b", "im_b"],
              ([int(j), x.real, x.imag, y.real, y.imag] for j, x, y in zip(s.sites, s.up, s.down)), _header(cfg))
    last = traj.records[-1]
    results = {"steps": cfg.steps, "policy": describe_policy(cfg.policy)}
    if last.S_E is not None:
        results["final_S_E"] = last.S_E
        print(f"S_E({cfg.steps}) = {last.S_E:.5f}")
    if last.variance is not None:
        results["final_variance"] = last.variance
        print(f"<j>({cfg.steps}) = {last.mean_j:.6g}, variance = {last.variance:.6g}")
    _write_sidecar(cfg, results)
    print(f"wrote {cfg.out}/trajectory.csv, final_state.csv, run.json")
    return EXIT_OK


# -- ensemble -------------------------------------------------------------------


def cmd_ensemble(cfg: RunConfig, dry_run: bool) -> int:
    ens = cfg.ensemble
    spec = EnsembleSpec(cfg.grid, cfg.policy, cfg.steps, cfg.master_seed, ens["realizations"],
                        tuple(ens["thresholds"]), ens["shared_sequence"], ens["keep_members"])
    lo, hi = cfg.grid.window()
    width = hi - lo + 1
    print(f"ensemble: grid {cfg.grid.kind} with {len(cfg.grid)} conditions (subsample 1/{cfg.grid.subsample_factor}), "
          f"{ens['realizations']} realizations each, {spec.member_count} members, {cfg.steps} steps")
    if dry_run:
        work = spec.member_count * cfg.steps * (width + cfg.steps)
        print(f"plan: about {work:,} site updates on {cfg.jobs} worker(s)")
        return EXIT_OK
    summary = run_ensemble(spec, jobs=cfg.jobs)
    os.makedirs(cfg.out, exist_ok=True)
    summary.to_csv(os.path.join(cfg.out, "summary.csv"), _header(cfg))
    summary.distribution_to_csv(os.path.join(cfg.out, "distribution.csv"), _header(cfg))
    if summary.member_S_E is not None:
        cols = ["member", "condition", "realization"] + [f"t{t}" for t in summary.t]
        R = spec.realizations_per_condition
        rows = ([k, cfg.grid.indices[k // R], k % R] + list(summary.member_S_E[k])
                for k in range(summary.member_count))
        write_csv(os.path.join(cfg.out, "members.csv"), cols, rows, _header(cfg))

    t_min = ens["t_min"]
    series_D = (summary.t, summary.mean_trace_distance)
    series_disp = (summary.t, summary.mean_sqrt_variance)
    fit_D = _fit_or_none(loglog_fit, series_D, t_min)
    fit_disp = _fit_or_none(dispersion_exponent, series_disp, t_min)
    fractions = {f"{thr:g}": float(v[-1]) for thr, v in summary.fraction_above.items()}
    results = {
        "member_count": summary.member_count,
        "final_mean_S_E": float(summary.mean_S_E[-1]),
        "final_min_S_E": float(summary.min_S_E[-1]),
        "final_max_S_E": float(summary.max_S_E[-1]),
        "final_fraction_above": fractions,
        "fit_trace_distance": fit_D.to_dict() if fit_D else None,
        "fit_dispersion": fit_disp.to_dict() if fit_disp else None,
        "ensemble": spec.describe(),
    }
    _write_sidecar(cfg, results)
    print(f"<S_E>({cfg.steps}) = {summary.mean_S_E[-1]:.5f}  "
          f"min {summary.min_S_E[-1]:.5f}  max {summary.max_S_E[-1]:.5f}")
    for thr, v in fractions.items():
        print(f"fraction S_E > {thr}: {v:.4f}")
    if fit_D:
        print(f"<D(t)> fit: {fit_D.summary()}")
    if fit_disp:
        print(f"<sqrt(var)> fit: {fit_disp.summary()}")
    print(f"wrote {cfg.out}/summary.csv, distribution.csv, run.json")
    return EXIT_OK


# -- fit ------------------------------------------------------------------------


def read_series(path, column: str) -> tuple[np.ndarray, np.ndarray]:
    """Read (t, column) from a CSV whose comment lines start with '#'."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        if reader.fieldnames is None or "t" not in reader.fieldnames or column not in reader.fieldnames:
            raise ConfigError("fit.column", f"{path} needs columns 't' and {column!r}, has {reader.fieldnames}")
        t, y = [], []
        for row in reader:
            t.append(float(row["t"]))
            y.append(float(row[column]))
    return np.array(t), np.array(y)


def cmd_fit(cfg: RunConfig, dry_run: bool) -> int:
    f = cfg.fit
    t, y = read_series(f["input"], f["column"])
    print(f"fit: {f['column']} from {f['input']} ({t.size} rows), t >= {f['t_min']}"
          + (f", t <= {f['t_max']}" if f["t_max"] else ""))
    if dry_run:
        return EXIT_OK
    fit = loglog_fit((t, y), f["t_min"], f["t_max"])
    results = {"input": f["input"], "column": f["column"], "fit": fit.to_dict()}
    print(fit.summary())
    if f["exponent"] is not None:
        a, (a_lo, a_hi) = fixed_exponent_prefactor((t, y), f["exponent"], f["t_min"], f["t_max"])
        results["fixed_exponent"] = {"exponent": f["exponent"], "prefactor": a, "prefactor_ci_95": [a_lo, a_hi]}
        print(f"prefactor at exponent {f['exponent']:g}: {a:.4g} (95% CI {a_lo:.4g}..{a_hi:.4g})")
    os.makedirs(cfg.out, exist_ok=True)
    with open(os.path.join(cfg.out, "fit.json"), "w") as fh:
        json.dump({"config_sha256": cfg.config_hash, "master_seed": cfg.master_seed, **results},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_sidecar(cfg, results)
    return EXIT_OK


# -- experiment -----------------------------------------------------------------


def cmd_experiment(cfg: RunConfig, dry_run: bool) -> int:
    e = cfg.experiment
    seq = e["sequence"]
    n = cfg.steps
    conditions = e["conditions"]
    print(f"experiment: {len(conditions)} conditions, {n} steps, sequence {seq}")
    if e["search_trials"]:
        print(f"search: {e['search_trials']} random sequences with P(H) = {e['search_p']:g}")
    if dry_run:
        return EXIT_OK
    ordered = entropy_trajectories(coin_sequence(Fixed(e["coin"]), n), conditions)
    designed = entropy_trajectories(coin_sequence(seq.policy(), len(seq))[:n], conditions)
    os.makedirs(cfg.out, exist_ok=True)
    rows = []
    for label, traj in ((e["coin_name"], ordered), ("sequence", designed)):
        for k, (a, b) in enumerate(conditions):
            rows += [[label, a, b, t + 1, traj[k, t]] for t in range(n)]
    write_csv(os.path.join(cfg.out, "experiment.csv"), ["walk", "alpha_s", "beta_s", "t", "S_E"], rows, _header(cfg))

    print(f"{'alpha_s':>8} {'beta_s':>9} {'S_E(' + e['coin_name'] + ')':>16} {'S_E(sequence)':>14}")
    table = []
    for k, (a, b) in enumerate(conditions):
        print(f"{a:8.4f} {b:9.4f} {ordered[k, -1]:16.5f} {designed[k, -1]:14.5f}")
        table.append({"alpha_s": a, "beta_s": b, "ordered": float(ordered[k, -1]),
                      "sequence": float(designed[k, -1])})
    results = {"sequence": str(seq), "steps": n, "conditions": table}
    if e["search_trials"]:
        best, best_S = search_best_sequence(e["search_trials"], n, e["search_p"], conditions[0], cfg.master_seed)
        results["search"] = {"target": list(conditions[0]), "trials": e["search_trials"], "p": e["search_p"],
                             "best_sequence": str(best), "best_S_E": best_S}
        print(f"best of {e['search_trials']} random sequences for {conditions[0]}: {best} with S_E = {best_S:.5f}")
    _write_sidecar(cfg, results)
    print(f"wrote {cfg.out}/experiment.csv, run.json")
    return EXIT_OK


# -- crw-check ------------------------------------------------------------------


def binomial_oracle(j: np.ndarray, n: int, p: float) -> np.ndarray:
    """P(j) after ``n`` classical steps of +1 (prob. p) or -1 from j = 0."""
    j = np.asarray(j)
    k = (j + n) // 2
    return np.where((j + n) % 2 == 0, stats.binom.pmf(k, n, p), 0.0)


def cmd_crw_check(cfg: RunConfig, dry_run: bool) -> int:
    p, R, n = cfg.crw["p"], cfg.crw["realizations"], cfg.steps
    print(f"crw-check: p = {p:g}, {R} realizations, {n} steps, walker starts at j = 0 with spin up")
    if dry_run:
        print(f"plan: about {R * n * (n + 1):,} site updates on {cfg.jobs} worker(s)")
        return EXIT_OK
    grid = build_grid("explicit", states=[localized(SPIN_UP, 0)])
    spec = EnsembleSpec(grid, CrwEmulation(p), n, cfg.master_seed, R)
    summary = run_ensemble(spec, jobs=cfg.jobs)
    oracle = binomial_oracle(summary.final_j, n, p)
    tv = 0.5 * float(np.sum(np.abs(summary.final_mean_P - oracle)))
    max_S = float(np.max(summary.max_S_E))
    os.makedirs(cfg.out, exist_ok=True)
    write_csv(os.path.join(cfg.out, "crw_distribution.csv"), ["j", "mean_P", "binomial_P"],
              zip(summary.final_j.tolist(), summary.final_mean_P, oracle), _header(cfg))
    _write_sidecar(cfg, {"p": p, "realizations": R, "steps": n, "max_S_E": max_S, "tv_distance": tv})
    print(f"max S_E over all steps and realizations = {max_S:.3g}")
    print(f"total-variation distance to binomial = {tv:.5f}")
    print(f"wrote {cfg.out}/crw_distribution.csv, run.json")
    return EXIT_OK


_HANDLERS = {"walk": cmd_walk, "ensemble": cmd_ensemble, "fit": cmd_fit, "experiment": cmd_experiment,
             "crw-check": cmd_crw_check}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rqwalk", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--list-presets", action="store_true", help="print the shipped preset names and exit")
    sub = parser.add_subparsers(dest="command")
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} command")
        p.add_argument("--config", help="YAML run configuration")
        p.add_argument("--preset", help="shipped preset used as the base configuration")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--steps", type=int, help="number of steps")
        p.add_argument("--jobs", type=int, help="worker processes (results do not depend on it)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--subsample", type=int, help="keep every k-th grid condition")
        p.add_argument("--dry-run", action="store_true", help="validate and print the plan only")
        if name == "fit":
            p.add_argument("--input", help="CSV with a 't' column")
            p.add_argument("--column", help="column to fit (default mean_D)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list_presets:
        print("\n".join(preset_names()))
        return EXIT_OK
    if not args.command:
        parser.print_help()
        return EXIT_CONFIG
    overrides = {"master_seed": args.seed, "steps": args.steps, "jobs": args.jobs, "out": args.out,
                 "subsample": args.subsample}
    if args.command == "fit":
        overrides["fit"] = {k: v for k, v in (("input", args.input), ("column", args.column)) if v is not None}
    try:
        cfg = parse_config(args.config, command=args.command, preset=args.preset, overrides=overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        return _HANDLERS[cfg.command](cfg, args.dry_run)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ContractError, DomainError) as exc:
        print(f"runtime error in {cfg.command}: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
