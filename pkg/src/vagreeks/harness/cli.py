"""Command-line interface: ``vagreeks <command>``."""

from __future__ import annotations

import csv
import functools
import json
import logging
import math
import sys
from pathlib import Path

import click
import numpy as np

from ..mc_engine import read_results_csv, value_portfolio, write_results_csv
from ..metamodel import Metamodel, write_history_csv
from ..portfolio import (
    ConfigurationError,
    read_portfolio_csv,
    sample_from_grid,
    sample_validation,
    write_portfolio_csv,
)
from .config import ExperimentConfig, MethodSpec, load_config
from .experiments import (
    REPLICATION_ID_STRIDE,
    REPRESENTATIVE_ID_BASE,
    TRAINING_ID_BASE,
    ComparisonReport,
    PreparedData,
    SensitivityReport,
    StageError,
    Vary,
    build_baseline,
    input_portfolio,
    load_mortality,
    mc_config,
    prepare,
    representative_set,
    run_comparison,
    run_method,
    run_sensitivity,
    stage,
)
from .reports import emit_reports, read_csv_rows
from .seeds import derive_seed

OUTPUT_ENV = "VAGREEKS_OUTPUT_DIR"


def _fail(stage_name: str, message: str):
    click.echo(f"error [{stage_name}]: {message}", err=True)
    sys.exit(1)


def guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except StageError as exc:
            _fail(exc.stage, str(exc).split("] ", 1)[-1])
        except ConfigurationError as exc:
            _fail("config", str(exc))
        except (OSError, ValueError, KeyError) as exc:
            _fail(fn.__name__.replace("_", "-"), f"{type(exc).__name__}: {exc}")

    return wrapper


class Context:
    def __init__(self, cfg: ExperimentConfig, out_dir: Path):
        self.cfg = cfg
        self.out_dir = out_dir

    @property
    def cache_dir(self) -> Path:
        return self.out_dir / "cache"

    def data(self) -> PreparedData:
        return prepare(self.cfg, self.cache_dir)


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="YAML config file.")
@click.option("--preset", type=click.Choice(["desk", "full"]), default="desk", show_default=True)
@click.option("--output-dir", envvar=OUTPUT_ENV, help=f"Output directory (env {OUTPUT_ENV}).")
@click.option("--seed", type=int, help="Master seed.")
@click.option("--replications", type=int)
@click.option("--scenarios", type=int, help="MC scenarios per contract.")
@click.option("--input-size", type=int, help="Input portfolio size N.")
@click.option("--representatives", type=int, help="Number of representatives n.")
@click.option("--max-iterations", type=int, help="Training iteration cap.")
@click.option("--workers", type=int, help="Threads for MC valuation.")
@click.option("-v", "--verbose", count=True)
@click.pass_context
def main(ctx, config_path, preset, output_dir, seed, replications, scenarios, input_size,
         representatives, max_iterations, workers, verbose):
    """Estimate VA portfolio deltas with MC, spatial interpolation and the neural metamodel."""
    logging.basicConfig(
        level=logging.WARNING - 10 * min(verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        cfg = load_config(config_path, preset).with_overrides(
            **{
                "seed": seed,
                "replications": replications,
                "workers": workers,
                "output_dir": output_dir,
                "mc.scenario_count": scenarios,
                "sizes.input": input_size,
                "sizes.representatives": representatives,
                "train.max_iterations": max_iterations,
            }
        )
    except (ConfigurationError, OSError, ValueError) as exc:
        _fail("config", str(exc))
    ctx.obj = Context(cfg, Path(cfg.output_dir))


@main.command()
@click.pass_obj
@guarded
def generate(obj: Context):
    """Write the input, training, validation and representative portfolios."""
    cfg = obj.cfg
    obj.out_dir.mkdir(parents=True, exist_ok=True)
    with stage("generate"):
        contracts = input_portfolio(cfg)
        write_portfolio_csv(contracts, obj.out_dir / "input.csv")
        training = sample_from_grid(
            cfg.training_space, cfg.sizes.training, derive_seed(cfg.seed, "training", 0),
            id_offset=TRAINING_ID_BASE,
        )
        write_portfolio_csv(training, obj.out_dir / "training.csv")
        validation = sample_validation(contracts, cfg.sizes.validation, derive_seed(cfg.seed, "validation", 0))
        write_portfolio_csv(validation, obj.out_dir / "validation.csv")
        for r in range(cfg.replications):
            reps = sample_from_grid(
                cfg.representative_space, cfg.sizes.representatives,
                derive_seed(cfg.seed, "representatives", r),
                id_offset=REPRESENTATIVE_ID_BASE + r * REPLICATION_ID_STRIDE,
            )
            write_portfolio_csv(reps, obj.out_dir / f"representatives_rep{r}.csv")
    click.echo(f"wrote portfolios to {obj.out_dir}")


@main.command("mc-value")
@click.argument("portfolio", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--output", type=click.Path(dir_okay=False), help="Results CSV (default: <name>_mc.csv).")
@click.pass_obj
@guarded
def mc_value(obj: Context, portfolio, output):
    """MC liability and delta for every contract in PORTFOLIO."""
    with stage("mc-value"):
        contracts = read_portfolio_csv(portfolio)
        valuation = value_portfolio(contracts, load_mortality(obj.cfg), mc_config(obj.cfg), workers=obj.cfg.workers)
        path = Path(output) if output else Path(portfolio).with_name(Path(portfolio).stem + "_mc.csv")
        write_results_csv(valuation.results, path)
    click.echo(f"portfolio delta {valuation.aggregate_delta:.6g} -> {path}")


@main.command("train")
@click.option("--replication", type=int, default=0, show_default=True)
@click.option("-o", "--output", type=click.Path(dir_okay=False), help="Model JSON (default: model_rep<r>.json).")
@click.pass_obj
@guarded
def train_cmd(obj: Context, replication, output):
    """Train the metamodel for one replication of the representatives."""
    data = obj.data()
    with stage("representatives"):
        reps, rep_d, _ = representative_set(obj.cfg, data.mortality, replication)
    with stage("train"):
        out = run_method(MethodSpec("nn"), obj.cfg, data, reps, rep_d)
        obj.out_dir.mkdir(parents=True, exist_ok=True)
        path = Path(output) if output else obj.out_dir / f"model_rep{replication}.json"
        out.model.save(path)
        write_history_csv(out.state, path.with_name(path.stem + "_history.csv"))
    err = (out.estimate - data.delta_mc) / abs(data.delta_mc)
    click.echo(
        f"stopped at iteration {out.state.iteration} ({out.state.stop_reason.value}); "
        f"portfolio delta {out.estimate:.6g}, MC {data.delta_mc:.6g}, rel error {err:+.4%} -> {path}"
    )


@main.command()
@click.argument("portfolio", type=click.Path(exists=True, dir_okay=False))
@click.option("--model", type=click.Path(exists=True, dir_okay=False), help="Trained metamodel JSON.")
@click.option("--method", type=click.Choice(["idw", "kriging", "rbf"]), help="Baseline instead of a model.")
@click.option("--power", type=float, default=1.0, show_default=True)
@click.option("--variogram", type=click.Choice(["spherical", "exponential"]), default="spherical")
@click.option("--epsilon", type=float, default=1.0, show_default=True)
@click.option("--reps", type=click.Path(exists=True, dir_okay=False), help="Representatives CSV (baselines).")
@click.option("--rep-results", type=click.Path(exists=True, dir_okay=False), help="Their MC results CSV.")
@click.option("--per-policy", type=click.Path(dir_okay=False), help="Write per-contract estimates here.")
@click.pass_obj
@guarded
def estimate(obj: Context, portfolio, model, method, power, variogram, epsilon, reps, rep_results, per_policy):
    """Estimate the delta of PORTFOLIO with a trained model or a baseline."""
    with stage("estimate"):
        contracts = read_portfolio_csv(portfolio)
        if model:
            estimator = Metamodel.load(model)
        elif method and reps and rep_results:
            rep_contracts = read_portfolio_csv(reps)
            results = {r.id: r.delta for r in read_results_csv(rep_results)}
            deltas = np.array([results[c.id] for c in rep_contracts])
            spec = MethodSpec(method, power=power, variogram=variogram, epsilon=epsilon)
            estimator = build_baseline(spec, obj.cfg, contracts).fit(rep_contracts, deltas)
        else:
            raise ConfigurationError("give --model, or --method with --reps and --rep-results")
        values = estimator.predict(contracts)
        if per_policy:
            with open(per_policy, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["id", "delta"])
                writer.writerows([c.id, repr(float(v))] for c, v in zip(contracts, values))
    click.echo(f"portfolio delta {math.fsum(values):.6g}")


@main.command()
@click.pass_obj
@guarded
def compare(obj: Context):
    """Run every method on every replication and write the comparison reports."""
    report = ComparisonReport()
    try:
        run_comparison(obj.cfg, cache_dir=obj.cache_dir, report=report)
    finally:
        if report.rows:
            emit_reports(obj.out_dir, obj.cfg, comparison=report)
    with stage("report"):
        emit_reports(obj.out_dir, obj.cfg, comparison=report)
    for s in report.summary():
        click.echo(f"{s['method']:<14} mean err {s['mean_rel_error']:+.4%}  std {s['std_rel_error']:.4%}")


@main.command()
@click.option(
    "--vary", type=click.Choice([v.value for v in Vary]), required=True, multiple=True,
    help="Portfolio to vary; repeat for several sweeps.",
)
@click.option("--realizations", type=int, help="Default: sensitivity_realizations from the config.")
@click.pass_obj
@guarded
def sensitivity(obj: Context, vary, realizations):
    """NN sensitivity to one portfolio choice, or to the portfolio sizes."""
    report = SensitivityReport()
    data = obj.data()
    try:
        for v in vary:
            run_sensitivity(obj.cfg, v, realizations, data=data, report=report)
    finally:
        if report.rows:
            emit_reports(obj.out_dir, obj.cfg, sensitivity=report)
    with stage("report"):
        emit_reports(obj.out_dir, obj.cfg, sensitivity=report)
    for s in report.summary():
        click.echo(
            f"{s['vary']:<16} {s['sizes']} err {s['mean_rel_error']:+.4%} +- {s['std_rel_error']:.4%}"
            f"  time {s['mean_seconds']:.2f}s +- {s['std_seconds']:.2f}s"
        )


@main.command()
@click.pass_obj
@guarded
def report(obj: Context):
    """Print the summaries stored in the output directory."""
    with stage("report"):
        summary = obj.out_dir / "comparison_summary.csv"
        sens = obj.out_dir / "sensitivity_summary.csv"
        if not summary.exists() and not sens.exists():
            raise FileNotFoundError(f"no reports under {obj.out_dir}; run compare or sensitivity first")
        if summary.exists():
            for row in read_csv_rows(summary):
                click.echo(
                    f"{row['method']:<14} mean err {float(row['mean_rel_error']):+.4%}"
                    f"  std {float(row['std_rel_error']):.4%}"
                )
        if sens.exists():
            for row in read_csv_rows(sens):
                click.echo(
                    f"{row['vary']:<16} ({row['r']}, {row['t']}, {row['v']}) "
                    f"err {float(row['mean_rel_error']):+.4%} +- {float(row['std_rel_error']):.4%}"
                )
        manifest = obj.out_dir / "manifest.json"
        if manifest.exists():
            seed = json.loads(manifest.read_text())["seeds"]["master"]
            click.echo(f"master seed {seed}")


if __name__ == "__main__":
    main()
