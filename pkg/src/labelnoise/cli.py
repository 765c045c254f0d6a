"""Command-line harness.

Subcommands: generate, train, eval, estimate, bound, sweep, validate-bound.
Exit codes: 0 success, 1 coverage check failed, 2 validation error,
3 vacuous bound, 4 numerical abort.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from labelnoise import keyvalue, runconfig
from labelnoise.bound import (
    DEFAULT_DELTA,
    BoundInputs,
    SweepSpec,
    VacuousBoundError,
    bound_sweep,
    clean_accuracy_lower_bound,
    write_sweep_csv,
)
from labelnoise.keyvalue import ConfigError, format_float
from labelnoise.metrics import NOFINDING, EvalReport, evaluate
from labelnoise.model import NumericalAbort, load_checkpoint, save_checkpoint, train
from labelnoise.noise import NoiseModel, compute_noise_rate, compute_tau
from labelnoise.synthdata import (
    add_noise,
    analytic_prior,
    generate,
    load_dataset,
    noisy_posterior_matrix,
    save_dataset,
)
from labelnoise.transition import DEFAULT_PERCENTILE, estimate_noise_model
from labelnoise.validation import derive_seed, validate_bound, write_coverage_csv

log = logging.getLogger("labelnoise")

EXIT_OK = 0
EXIT_COVERAGE = 1
EXIT_VALIDATION = 2
EXIT_VACUOUS = 3
EXIT_NUMERICAL = 4

EFFECTIVE_CONFIG = "config.effective"


# ------------------------------------------------------------------ helpers

def _merged_config(args) -> dict[str, str]:
    values = keyvalue.load(args.config) if args.config else {}
    for item in args.set or ():
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        values[key] = value
    if args.seed is not None:
        values["seed"] = str(args.seed)
    return values


def _out_dir(args) -> Path:
    if not args.out:
        raise ConfigError("--out <dir> is required for this command")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo_config(out: Path, values) -> None:
    keyvalue.dump(values, out / EFFECTIVE_CONFIG)


def _write_csv_rows(path: Path, header, rows) -> None:
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


# ----------------------------------------------------------------- commands

def cmd_generate(args) -> int:
    values = _merged_config(args)
    keyvalue.check_known(values, {"seed"} | runconfig.GENERATOR_KEYS | runconfig.NOISE_KEYS,
                         runconfig.NOISE_PREFIXES)
    seed = runconfig.master_seed(values)
    spec = runconfig.generator_spec(values, seed)
    out = _out_dir(args)
    dataset = generate(spec)
    if runconfig.has_noise(values):
        model = runconfig.noise_model(values, analytic_prior(spec))
        dataset = add_noise(dataset, model, derive_seed(seed, "dataset_noise"))
    save_dataset(dataset, out / "dataset.csv")
    _echo_config(out, values)
    log.info("wrote %d samples to %s", dataset.n_samples, out / "dataset.csv")
    return EXIT_OK


def cmd_train(args) -> int:
    values = _merged_config(args)
    if args.data:
        values["train.data"] = args.data
    if args.val:
        values["train.val"] = args.val
    keyvalue.check_known(values, {"seed"} | runconfig.TRAIN_KEYS | runconfig.ELR_KEYS)
    seed = runconfig.master_seed(values)
    cfg = runconfig.train_config(values, seed)
    dataset = load_dataset(keyvalue.require(values, "train.data"))
    val = load_dataset(values["train.val"]) if "train.val" in values else None
    out = _out_dir(args)

    result = train(dataset, cfg, val=val)
    save_checkpoint(result.model, out / "model.json")

    header = ["epoch", "loss", "acc_noisy_train"]
    has_noisy_val = val is not None and val.noisy_labels is not None
    has_clean_val = val is not None and val.clean_labels is not None
    if has_noisy_val:
        header.append("acc_noisy_val")
    if has_clean_val:
        header.append("acc_clean_val")
    rows = []
    for rec in result.log:
        row = [rec.epoch, format_float(rec.loss), format_float(rec.acc_noisy_train)]
        if has_noisy_val:
            row.append(format_float(rec.acc_noisy_val))
        if has_clean_val:
            row.append(format_float(rec.acc_clean_val))
        rows.append(row)
        log.info("epoch %d loss %.5f acc_noisy_train %.4f", rec.epoch, rec.loss, rec.acc_noisy_train)
    _write_csv_rows(out / "train_log.csv", header, rows)
    _echo_config(out, values)
    return EXIT_OK


def cmd_eval(args) -> int:
    model = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.data)
    out = _out_dir(args)
    report = evaluate(model.forward(dataset.features), dataset.noisy_labels, dataset.clean_labels)
    report.to_json(out / "eval.json")
    report.to_csv(out / "eval.csv")
    _echo_config(out, {"eval.checkpoint": args.checkpoint, "eval.data": args.data})
    if not args.quiet:
        for c, name in enumerate(report.class_names):
            parts = [f"{name:>10}"]
            if report.per_class_accuracy_noisy:
                parts.append(f"acc_noisy={report.per_class_accuracy_noisy[c]:.4f}")
            if report.per_class_accuracy_clean:
                parts.append(f"acc_clean={report.per_class_accuracy_clean[c]:.4f}")
            if c < len(report.per_class_auc) and report.per_class_auc[c] is not None:
                parts.append(f"auc={report.per_class_auc[c]:.4f}")
            print("  ".join(parts))
        if report.mean_auc is not None:
            print(f"mean AUC ({report.auc_labels} labels): {report.mean_auc:.4f}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    dataset = load_dataset(args.data)
    if dataset.noisy_labels is None:
        raise ConfigError(f"{args.data} has no noisy label columns")
    if args.oracle:
        spec = dataset.provenance.get("generator")
        truth = dataset.provenance.get("noise_model")
        if spec is None or truth is None:
            raise ConfigError("--oracle needs a dataset whose metadata records the generator and noise model")
        probs = noisy_posterior_matrix(spec, truth, dataset.features)
    else:
        if not args.checkpoint:
            raise ConfigError("estimate needs --checkpoint or --oracle")
        probs = load_checkpoint(args.checkpoint).forward(dataset.features)
    labels = dataset.noisy_labels
    names = [f"c{c}" for c in range(labels.shape[1])]
    if args.nofinding:
        # labels are conditionally independent given x, so all-negative has
        # probability prod(1 - p_c)
        probs = np.column_stack([probs, np.prod(1.0 - probs, axis=1)])
        labels = np.column_stack([labels, ~labels.any(axis=1)]).astype(np.int8)
        names.append(NOFINDING)

    out = _out_dir(args)
    model, estimates = estimate_noise_model(probs, labels, args.percentile)
    rows = []
    for name, e in zip(names, estimates):
        t = e.transition
        rows.append([name, format_float(t.t00), format_float(t.t01), format_float(t.t10), format_float(t.t11),
                     format_float(e.tau), "" if e.prior is None else format_float(e.prior.p1),
                     "" if e.epsilon is None else format_float(e.epsilon), ";".join(e.flags)])
        if not args.quiet:
            eps = "n/a" if e.epsilon is None else f"{e.epsilon:.4f}"
            print(f"{name:>10}  t00={t.t00:.4f} t11={t.t11:.4f} tau={e.tau:.4f} eps_hat={eps} {' '.join(e.flags)}")
    _write_csv_rows(out / "estimate.csv",
                    ["class", "t00", "t01", "t10", "t11", "tau", "p1_hat", "epsilon_hat", "flags"], rows)
    _echo_config(out, {"estimate.data": args.data, "estimate.percentile": args.percentile,
                       "estimate.source": "oracle" if args.oracle else args.checkpoint,
                       "estimate.nofinding": bool(args.nofinding)})
    if model is None:
        log.error("at least one class has tau <= 0; noise model file not written")
        return EXIT_VACUOUS
    model.save(out / "noise_model.txt")
    return EXIT_OK


def _print_report(doc: dict, quiet: bool) -> None:
    if quiet:
        print(repr(doc["lower_bound"]))
        return
    for key in ("noisy_test_accuracy", "delta", "test_set_size", "tau", "epsilon",
                "hoeffding_gap", "noisy_optimal_accuracy", "lower_bound", "saturated"):
        value = doc[key]
        print(f"{key:>22}: {value!r}")


def cmd_bound(args) -> int:
    if args.from_eval:
        if not args.noise_model:
            raise ConfigError("--from-eval needs --noise-model")
        report = EvalReport.from_json(args.from_eval)
        if report.per_class_accuracy_noisy is None:
            raise ConfigError(f"{args.from_eval} has no noisy-label accuracies")
        noise = NoiseModel.load(args.noise_model)
        if noise.n_classes > len(report.class_names):
            raise ConfigError(f"noise model has {noise.n_classes} classes, eval report {len(report.class_names)}")
        delta = DEFAULT_DELTA if args.delta is None else args.delta
        docs = []
        for c in range(noise.n_classes):
            t, prior = noise.per_class[c]
            tau = compute_tau(t)
            eps = compute_noise_rate(t, prior)
            name = report.class_names[c]
            try:
                doc = clean_accuracy_lower_bound(BoundInputs(
                    report.per_class_accuracy_noisy[c], delta, report.n, tau, eps)).as_dict()
            except VacuousBoundError:
                doc = {"noisy_test_accuracy": report.per_class_accuracy_noisy[c], "delta": delta,
                       "test_set_size": report.n, "tau": tau, "epsilon": eps, "lower_bound": None,
                       "vacuous": True}
            doc["class"] = name
            docs.append(doc)
            if not args.quiet:
                lb = "vacuous" if doc["lower_bound"] is None else f"{doc['lower_bound']:.6f}"
                sat = " saturated" if doc.get("saturated") else ""
                print(f"{name:>10}  acc_noisy={doc['noisy_test_accuracy']:.4f} tau={tau:.4f} "
                      f"eps={eps:.4f} lower_bound={lb}{sat}")
        result = {"classes": docs}
        status = EXIT_VACUOUS if any(d["lower_bound"] is None for d in docs) else EXIT_OK
    else:
        delta = DEFAULT_DELTA if args.delta is None else args.delta
        # with delta = 1 the gap vanishes for every n, so n may be omitted
        n = args.n if args.n is not None or delta != 1.0 else 1
        missing = [f for f in ("acc", "tau", "epsilon") if getattr(args, f) is None]
        if n is None:
            missing.insert(1, "n")
        if missing:
            raise ConfigError("bound needs --" + ", --".join(missing) + " (or --from-eval)")
        try:
            inputs = BoundInputs(args.acc, delta, n, args.tau, args.epsilon)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        result = clean_accuracy_lower_bound(inputs).as_dict()
        _print_report(result, args.quiet)
        status = EXIT_OK
    if args.out:
        out = _out_dir(args)
        with open(out / "bound.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(result, fh, indent=1, sort_keys=True)
            fh.write("\n")
    return status


def _parse_grid(text: str) -> list[float]:
    """``start:stop:step`` (stop inclusive within 1e-9) or a comma list."""
    if ":" in text:
        try:
            start, stop, step = (float(v) for v in text.split(":"))
        except ValueError:
            raise ConfigError(f"grid must be start:stop:step, got {text!r}") from None
        if step <= 0:
            raise ConfigError("grid step must be positive")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(max(count, 0))]
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of numbers, got {text!r}") from None


def cmd_sweep(args) -> int:
    spec = SweepSpec(
        epsilons=_parse_grid(args.epsilons),
        mode=args.mode,
        accuracies=_parse_grid(args.accuracies) if args.accuracies else (),
        sizes=[int(v) for v in _parse_grid(args.sizes)] if args.sizes else (1_000, 10_000, 100_000),
        n=args.n,
        delta=args.delta,
        accuracy_offset=args.offset,
    )
    try:
        rows = bound_sweep(spec)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if args.out:
        out = _out_dir(args)
        with open(out / "sweep.csv", "w", encoding="utf-8", newline="") as fh:
            write_sweep_csv(rows, fh)
        _echo_config(out, {"sweep.mode": args.mode, "sweep.epsilons": args.epsilons,
                           "sweep.accuracies": args.accuracies or "", "sweep.sizes": args.sizes or "",
                           "sweep.n": args.n, "sweep.delta": args.delta, "sweep.offset": args.offset})
    else:
        write_sweep_csv(rows, sys.stdout)
    return EXIT_OK


def cmd_validate_bound(args) -> int:
    values = _merged_config(args)
    keyvalue.check_known(values, {"seed"} | runconfig.GENERATOR_KEYS | runconfig.NOISE_KEYS
                         | runconfig.TRAIN_KEYS | runconfig.ELR_KEYS | runconfig.BOUND_KEYS,
                         runconfig.NOISE_PREFIXES)
    for key in ("train.data", "train.val"):
        if key in values:
            raise ConfigError(f"'{key}' is not used by validate-bound (training data is generated)", key)
    seed = runconfig.master_seed(values)
    spec = runconfig.generator_spec(values, seed)
    if spec.mode != "deterministic":
        raise ConfigError("validate-bound needs generator.mode = deterministic", "generator.mode")
    noise = runconfig.noise_model(values, analytic_prior(spec)) if runconfig.has_noise(values) \
        else runconfig.noise_model({"noise.rho": "0"}, analytic_prior(spec))
    cfg = runconfig.train_config(values, derive_seed(seed, "train_init"))
    out = _out_dir(args)

    result = validate_bound(
        spec, noise, cfg,
        trials=keyvalue.get_int(values, "bound.trials", 200),
        test_size=keyvalue.get_int(values, "bound.test_size", 2000),
        delta=keyvalue.get_float(values, "bound.delta", DEFAULT_DELTA),
        proxy_size=keyvalue.get_int(values, "bound.proxy_size", 1_000_000),
        seed=seed,
    )
    with open(out / "coverage.csv", "w", encoding="utf-8", newline="") as fh:
        write_coverage_csv(result, fh)
    summary = result.summary()
    keyvalue.dump(summary, out / "coverage_summary.txt")
    _echo_config(out, values)
    if not args.quiet:
        for c in range(result.n_classes):
            print(f"class {c}: coverage {result.coverage[c]:.4f}  "
                  f"generalization {result.generalization_coverage[c]:.4f}  (need >= {1 - result.delta:.4f})")
        print("PASS" if result.passed else "FAIL")
    return EXIT_OK if result.passed else EXIT_COVERAGE


# ------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="key-value run config file")
    shared.add_argument("--out", help="output directory")
    shared.add_argument("--seed", type=int, help="master seed (overrides 'seed' in the config)")
    shared.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    shared.add_argument("--quiet", action="store_true", help="only print essential output")

    parser = argparse.ArgumentParser(prog="labelnoise", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[shared], help="write a synthetic dataset")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", parents=[shared], help="train an MLP on noisy labels")
    p.add_argument("--data", help="training dataset CSV (overrides train.data)")
    p.add_argument("--val", help="validation dataset CSV (overrides train.val)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[shared], help="per-class accuracies and AUC")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("estimate", parents=[shared], help="anchor-point transition matrix estimate")
    p.add_argument("--data", required=True, help="probe dataset CSV with noisy labels")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--checkpoint", help="model whose outputs estimate the noisy posterior")
    src.add_argument("--oracle", action="store_true", help="use the exact noisy posterior from the dataset metadata")
    p.add_argument("--percentile", type=float, default=DEFAULT_PERCENTILE)
    p.add_argument("--nofinding", action="store_true", help="also estimate T for the derived NoFinding class")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("bound", parents=[shared], help="clean-accuracy lower bound")
    p.add_argument("--acc", type=float, help="accuracy on the noisy test set")
    p.add_argument("--delta", type=float, default=None, help=f"confidence parameter (default {DEFAULT_DELTA})")
    p.add_argument("--n", type=int, help="noisy test set size")
    p.add_argument("--tau", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--from-eval", help="eval.json from the eval command")
    p.add_argument("--noise-model", help="noise model file (e.g. from estimate)")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("sweep", parents=[shared], help="bound curves over epsilon under symmetric noise")
    p.add_argument("--mode", choices=("accuracy", "size"), default="size")
    p.add_argument("--epsilons", default="0:0.49:0.01", help="start:stop:step or comma list")
    p.add_argument("--accuracies", help="noisy accuracies, one curve each (mode accuracy)")
    p.add_argument("--sizes", help="test set sizes, one curve each (mode size)")
    p.add_argument("--n", type=int, default=10_000, help="test set size in mode accuracy")
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    p.add_argument("--offset", type=float, default=0.1, help="mode size uses accuracy (1 - eps) - offset")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate-bound", parents=[shared], help="Monte Carlo coverage of the bound")
    p.set_defaults(func=cmd_validate_bound)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except VacuousBoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VACUOUS
    except NumericalAbort as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
