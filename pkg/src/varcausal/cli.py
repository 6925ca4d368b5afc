"""Config-driven command line: simulate, fit, effects, whatif.

Each subcommand reads one JSON config (see README for the schema) and writes
plot-ready files into the output directory. Exit codes: 0 success, 1
numerical failure (report written), 2 config or validation error. Outputs
are deterministic: the same config produces byte-identical files.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io
from .counterfactual import (ABDUCTION, DELTA_PROPAGATION, CounterfactualQuery,
                             effect_summary, oracle_resimulation,
                             predict_abduction, predict_delta)
from .dataset import (build_all_rows, format_partition, load_recording,
                      partition, save_recording)
from .effects import stability_report, total_effects
from .errors import (ConfigError, DataError, DeltaMethodError, FormatError,
                     ModelError, RankDeficiencyError, ScheduleError,
                     UnrecoverableNoiseError, VarCausalError)
from .estimation import FitConfig, coefficient_mse, fit_lasso, fit_ols
from .model import InterventionSchedule, simulate

_CONFIG_ERRORS = (ConfigError, FormatError, ScheduleError, ModelError, DataError)
_NUMERICAL_ERRORS = (RankDeficiencyError, UnrecoverableNoiseError, DeltaMethodError)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="varcausal",
        description="Simulate, estimate, and query linear lagged causal models.",
    )
    sub = parser.add_subparsers(required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.set_defaults(func=func)
        return p

    add("simulate", cmd_simulate, "generate a recording under a schedule")
    p_fit = add("fit", cmd_fit, "estimate coefficients (joint and observational-only)")
    p_fit.add_argument("--lambda", dest="penalty", type=float, default=None,
                       help="L1 penalty override")
    add("effects", cmd_effects, "total causal effect matrices and stability")
    p_what = add("whatif", cmd_whatif, "counterfactual prediction for a past intervention")
    p_what.add_argument("--method", choices=["delta", "abduction", "both"], default=None,
                        help="prediction route override")
    return parser


def _require(cfg: dict, key: str, context: str):
    if key not in cfg:
        raise ConfigError(f"{context}: missing required field '{key}'")
    return cfg[key]


def _out_dir(args, cfg) -> Path:
    out = args.out if args.out is not None else cfg.get("out")
    if out is None:
        raise ConfigError("no output directory: set 'out' in the config or pass --out")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_simulate(args) -> int:
    cfg, base = io.load_config(args.config)
    model = io.build_model_from_spec(_require(cfg, "model", "config"), base)
    horizon = int(_require(cfg, "horizon", "config"))
    seed = args.seed if args.seed is not None else _require(cfg, "seed", "config")
    schedule = io.parse_schedule(cfg.get("schedule"))
    recording = simulate(model, schedule, horizon, seed=seed)

    out = _out_dir(args, cfg)
    io.save_model(model, out / "model.json")
    io.save_schedule(schedule, out / "schedule.json")
    save_recording(recording, out / "recording.csv", out / "noise.csv")
    part = partition(schedule, horizon, model.dim)
    (out / "partition.txt").write_text(format_partition(part))
    stab = stability_report(model)
    io.write_json({
        "dim": model.dim, "lag": model.lag, "horizon": horizon, "seed": int(seed),
        "spectral_radius": stab.spectral_radius, "stable": stab.stable,
    }, out / "summary.json")
    print(f"simulate: wrote {horizon}x{model.dim} recording to {out / 'recording.csv'}")
    print(f"simulate: spectral radius {stab.spectral_radius:.4f} "
          f"({'stable' if stab.stable else 'UNSTABLE'})")
    return 0


def _fit_once(rows_by_node, dim, lag, fit_config: FitConfig):
    if fit_config.method == "lasso":
        return fit_lasso(rows_by_node, dim, lag, fit_config)
    return fit_ols(rows_by_node, dim, lag)


def _fit_settings(cfg: dict, penalty_override) -> FitConfig:
    fit = cfg.get("fit", {})
    penalty = penalty_override if penalty_override is not None else fit.get("penalty", 0.0)
    return FitConfig(
        method=fit.get("method", "ols"),
        penalty=float(penalty),
        max_iterations=int(fit.get("max_iterations", 10_000)),
        tolerance=float(fit.get("tolerance", 1e-8)),
        standardize=bool(fit.get("standardize", False)),
    )


def _filter_rows(rows_by_node, keep: set):
    return {n: [r for r in rows if r.t in keep] for n, rows in rows_by_node.items()}


def _budget_sets(part, lag: int, observational_budget, baseline_budget):
    """Time-step sets for the joint fit and the observational-only baseline.

    Budgets count eligible steps (t > lag) in increasing time order; the
    joint set adds every interventional step on top of its observational
    allowance.
    """
    obs = sorted(t for t in part.observational if t > lag)
    base_keep = set(obs if baseline_budget is None else obs[:int(baseline_budget)])
    joint_obs = obs if observational_budget is None else obs[:int(observational_budget)]
    joint_keep = set(joint_obs) | set(part.interventional_times())
    return joint_keep, base_keep


def cmd_fit(args) -> int:
    cfg, base = io.load_config(args.config)
    fit = _require(cfg, "fit", "config")
    settings = _fit_settings(cfg, getattr(args, "penalty", None))
    out = _out_dir(args, cfg)
    if "seeds" in fit:
        return _fit_sweep(args, cfg, base, fit, settings, out)
    return _fit_files(cfg, base, fit, settings, out)


def _fit_files(cfg, base, fit, settings, out) -> int:
    model = io.build_model_from_spec(_require(cfg, "model", "config"), base)
    data_spec = _require(fit, "data", "fit section")
    data = []
    for i, item in enumerate(data_spec):
        rec_path = base / _require(item, "recording", f"fit.data[{i}]")
        noise_path = base / item["noise"] if "noise" in item else None
        recording = load_recording(rec_path, lag=model.lag, noise_path=noise_path)
        sched = (io.load_schedule(base / item["schedule"]) if "schedule" in item
                 else InterventionSchedule())
        data.append((recording, partition(sched, recording.length, model.dim)))
    rows = build_all_rows(data, model.lag)
    joint_keep, base_keep = None, None
    if len(data) == 1:
        joint_keep, base_keep = _budget_sets(
            data[0][1], model.lag, fit.get("observational_budget"),
            fit.get("baseline_observational_budget"))
    else:
        base_keep = set()
        for _, part in data:
            base_keep |= part.observational

    rows_joint = rows if joint_keep is None else _filter_rows(rows, joint_keep)
    rows_base = _filter_rows(rows, base_keep)
    report_joint = _fit_once(rows_joint, model.dim, model.lag, settings)
    report_base = _fit_once(rows_base, model.dim, model.lag, settings)

    for name, report in (("joint", report_joint), ("baseline", report_base)):
        io.write_fit_report(report, out / f"fit_{name}.json")
        io.write_coefficients_csv(report.estimate, out / f"theta_{name}.csv")
    for i, (_, part) in enumerate(data, start=1):
        (out / f"partition_{i}.txt").write_text(format_partition(part))

    if "truth" in fit:
        truth = io.load_model(base / fit["truth"])
        _write_mse_table(out / "mse.csv", [
            ("joint", coefficient_mse(report_joint.estimate,
                                      _stacked_of(truth))[0]),
            ("baseline", coefficient_mse(report_base.estimate,
                                         _stacked_of(truth))[0]),
        ])
        print(f"fit: wrote coefficient MSE table to {out / 'mse.csv'}")

    failures = {**report_joint.errors, **report_base.errors}
    for msg in failures.values():
        print(f"fit: {msg}", file=sys.stderr)
    print(f"fit: wrote joint and baseline estimates to {out}")
    return 1 if failures else 0


def _stacked_of(model):
    from .estimation import StackedCoefficients
    return StackedCoefficients.from_model(model)


def _write_mse_table(path, entries):
    with open(path, "w", newline="") as fh:
        fh.write("method,lag,mse\n")
        for method, per_lag in entries:
            for q, value in enumerate(per_lag, start=1):
                fh.write(f"{method},{q},{value!r}\n")


def _fit_sweep(args, cfg, base, fit, settings, out) -> int:
    model_spec = _require(cfg, "model", "config")
    if "random" not in model_spec:
        raise ConfigError("sweep mode needs a random model spec to redraw per seed")
    horizon = int(_require(cfg, "horizon", "config"))
    schedule = io.parse_schedule(cfg.get("schedule"))
    seeds = [int(args.seed)] if args.seed is not None else [int(s) for s in fit["seeds"]]
    obs_budget = fit.get("observational_budget")
    base_budget = fit.get("baseline_observational_budget")

    results = []
    failures = {}
    for seed in seeds:
        model_seed, noise_seed = np.random.SeedSequence(seed).spawn(2)
        model = io.random_model_from_spec(dict(model_spec["random"]), seed=model_seed)
        recording = simulate(model, schedule, horizon, seed=noise_seed)
        part = partition(schedule, horizon, model.dim)
        rows = build_all_rows([(recording, part)], model.lag)
        joint_keep, base_keep = _budget_sets(part, model.lag, obs_budget, base_budget)
        report_joint = _fit_once(_filter_rows(rows, joint_keep), model.dim, model.lag, settings)
        report_base = _fit_once(_filter_rows(rows, base_keep), model.dim, model.lag, settings)
        truth = _stacked_of(model)
        mse_joint, _ = coefficient_mse(report_joint.estimate, truth)
        mse_base, _ = coefficient_mse(report_base.estimate, truth)
        results.append((seed, mse_joint, mse_base))
        io.write_coefficients_csv(report_joint.estimate, out / f"theta_joint_s{seed}.csv")
        io.write_coefficients_csv(report_base.estimate, out / f"theta_baseline_s{seed}.csv")
        for msg in {**report_joint.errors, **report_base.errors}.values():
            failures[(seed, msg)] = msg

    lag = results[0][1].size
    with open(out / "mse_by_seed.csv", "w", newline="") as fh:
        fh.write("seed,method,lag,mse\n")
        for seed, mse_joint, mse_base in results:
            for q in range(1, lag + 1):
                fh.write(f"{seed},joint,{q},{mse_joint[q - 1]!r}\n")
            for q in range(1, lag + 1):
                fh.write(f"{seed},baseline,{q},{mse_base[q - 1]!r}\n")

    med_joint = np.median(np.vstack([r[1] for r in results]), axis=0)
    med_base = np.median(np.vstack([r[2] for r in results]), axis=0)
    with open(out / "summary.csv", "w", newline="") as fh:
        fh.write("method,lag,median_mse\n")
        for q in range(1, lag + 1):
            fh.write(f"joint,{q},{med_joint[q - 1]!r}\n")
        for q in range(1, lag + 1):
            fh.write(f"baseline,{q},{med_base[q - 1]!r}\n")
    improved = [bool(med_joint[q] < med_base[q]) for q in range(lag)]
    io.write_json({
        "seeds": seeds,
        "median_mse_joint": med_joint.tolist(),
        "median_mse_baseline": med_base.tolist(),
        "joint_below_baseline_per_lag": improved,
        "all_lags_improved": all(improved),
    }, out / "summary.json")
    for q in range(lag):
        print(f"fit: lag {q + 1} median MSE joint {med_joint[q]:.6f} "
              f"vs baseline {med_base[q]:.6f}"
              f" ({'joint better' if improved[q] else 'baseline better'})")
    for msg in failures.values():
        print(f"fit: {msg}", file=sys.stderr)
    return 1 if failures else 0


def cmd_effects(args) -> int:
    cfg, base = io.load_config(args.config)
    model = io.build_model_from_spec(_require(cfg, "model", "config"), base)
    eff_cfg = cfg.get("effects", {})
    max_horizon = int(eff_cfg.get("max_horizon", 30))
    out = _out_dir(args, cfg)
    effects = total_effects(model, max_horizon)
    io.write_effects_csv(effects, out / "effects.csv")
    stab = stability_report(model)
    io.write_json({"spectral_radius": stab.spectral_radius, "stable": stab.stable,
                   "max_horizon": max_horizon}, out / "stability.json")
    print(f"effects: wrote horizons 0..{max_horizon} to {out / 'effects.csv'}")
    print(f"effects: spectral radius {stab.spectral_radius:.4f} "
          f"({'stable' if stab.stable else 'UNSTABLE'})")
    return 0


def cmd_whatif(args) -> int:
    cfg, base = io.load_config(args.config)
    model = io.build_model_from_spec(_require(cfg, "model", "config"), base)
    what = _require(cfg, "whatif", "config")
    hypothetical = io.parse_schedule(_require(what, "hypothetical", "whatif section"))
    method = args.method if args.method is not None else what.get("method", "delta")
    if method not in ("delta", "abduction", "both"):
        raise ConfigError(f"whatif method must be delta, abduction, or both, got {method!r}")

    factual_spec = _require(what, "factual", "whatif section")
    if factual_spec.get("simulate"):
        horizon = int(_require(cfg, "horizon", "config"))
        seed = args.seed if args.seed is not None else _require(cfg, "seed", "config")
        factual_schedule = io.parse_schedule(cfg.get("schedule"))
        factual = simulate(model, factual_schedule, horizon, seed=seed)
    else:
        rec_path = base / _require(factual_spec, "recording", "whatif.factual")
        noise_path = base / factual_spec["noise"] if "noise" in factual_spec else None
        factual = load_recording(rec_path, lag=model.lag, noise_path=noise_path)
        factual_schedule = (io.load_schedule(base / factual_spec["schedule"])
                            if "schedule" in factual_spec else InterventionSchedule())

    query = CounterfactualQuery(factual=factual, model=model, hypothetical=hypothetical,
                                factual_schedule=factual_schedule,
                                model_source=what.get("model_source", "true"))
    results = {}
    if method in ("delta", "both"):
        results[DELTA_PROPAGATION] = predict_delta(query)
    if method in ("abduction", "both"):
        results[ABDUCTION] = predict_abduction(query)
    primary = results.get(DELTA_PROPAGATION, results.get(ABDUCTION))

    out = _out_dir(args, cfg)
    io.write_counterfactual_csv(factual.values, primary, out / "counterfactual.csv")
    summary_doc = {
        "method": primary.method,
        "model_source": primary.model_source,
        "onset": effect_summary(primary).onset,
        "max_abs_delta": float(np.max(np.abs(primary.delta))),
    }
    if len(results) == 2:
        gap = float(np.max(np.abs(results[DELTA_PROPAGATION].delta
                                  - results[ABDUCTION].delta)))
        summary_doc["method_agreement_max_abs"] = gap
        print(f"whatif: delta-propagation vs abduction agreement {gap:.3e}")
    if factual.noise is not None:
        oracle = oracle_resimulation(query)
        err = float(np.max(np.abs(primary.counterfactual - oracle.values)))
        summary_doc["oracle_max_abs_error"] = err
        print(f"whatif: max |predicted - resimulated| = {err:.3e}")
    io.write_json(summary_doc, out / "summary.json")
    print(f"whatif: wrote three-curve table to {out / 'counterfactual.csv'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
