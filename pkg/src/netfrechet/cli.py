"""``netfrechet`` command line.

Exit codes: 0 success, 2 invalid input, 3 solver divergence (single
prediction).  With ``--json-errors`` failures are also written to stderr
as one JSON object per line.
"""

import json
import sys
from pathlib import Path

import click

from . import __version__, barycenter as bc
from .errors import DivergedNegativeEigenvalue, NetFrechetError, SolverError, ValidationError
from .evalstats import EvalConfig, cv_mspe
from .ingest import ingest_taxi, load_dataset
from .metrics import MetricSpec
from .regress import RegressorSpec, SolverConfig, WeightScheme, predict

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_VALIDATION = 2
EXIT_DIVERGED = 3


def _load_config(ctx, param, value):
    """Eager ``--config``: TOML keys become defaults, so explicit flags win."""
    if value is None:
        return None
    try:
        with open(value, "rb") as fh:
            data = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise click.BadParameter(str(exc), ctx=ctx, param=param) from None
    flat = {k.replace("-", "_"): v for k, v in data.items() if not isinstance(v, dict)}
    ctx.default_map = {**(ctx.default_map or {}), **flat}
    ctx.meta["config_tables"] = {k: v for k, v in data.items() if isinstance(v, dict)}
    return value


config_option = click.option(
    "--config", type=click.Path(exists=True, dir_okay=False), callback=_load_config,
    is_eager=True, expose_value=False, help="TOML file with flag values; flags override it.",
)
json_errors_option = click.option(
    "--json-errors", is_flag=True, help="Also report failures as JSON lines on stderr."
)


def _fail(exc, code, json_errors):
    msg = str(exc)
    if json_errors:
        click.echo(json.dumps({"error": type(exc).__name__, "message": msg, "exit_code": code}), err=True)
    else:
        click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def _run(fn, json_errors, diverged_code=EXIT_VALIDATION):
    try:
        return fn()
    except DivergedNegativeEigenvalue as exc:
        _fail(exc, diverged_code, json_errors)
    except SolverError as exc:
        _fail(exc, diverged_code, json_errors)
    except (ValidationError, ValueError) as exc:
        _fail(exc, EXIT_VALIDATION, json_errors)
    except NetFrechetError as exc:
        _fail(exc, EXIT_VALIDATION, json_errors)


def _emit(payload, out):
    text = json.dumps(payload, indent=2)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        click.echo(text)


def _metric(kind, alpha):
    return MetricSpec.wasserstein() if kind == "wasserstein" else MetricSpec.frobenius(alpha)


def _weights(kind, kernel, bandwidth):
    if kind == "global":
        return WeightScheme()
    return WeightScheme.local(kernel, bandwidth or None)


def spec_options(f):
    opts = [
        click.option("--weights", type=click.Choice(["global", "local"]), default="global", show_default=True),
        click.option("--kernel", type=click.Choice(["gaussian", "epanechnikov"]), default="gaussian",
                     show_default=True),
        click.option("--bandwidth", type=float, multiple=True,
                     help="Per-covariate bandwidth (repeat for p > 1); default n^(-1/5) * std."),
        click.option("--solver", type=click.Choice(list(bc.VARIANTS)), default=bc.SHIFTED, show_default=True),
        click.option("--eps", type=float, default=1e-5, show_default=True, help="Entropic regularization."),
        click.option("--tol", type=float, default=1e-8, show_default=True),
        click.option("--max-iter", type=int, default=500, show_default=True),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


@click.group()
@click.version_option(__version__, prog_name="netfrechet")
def main():
    """Frechet regression of graphs on Euclidean covariates."""


@main.command("predict")
@click.argument("dataset_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--x", "x", type=float, multiple=True, required=True, help="Query covariate (repeat for p > 1).")
@click.option("--metric", type=click.Choice(["frobenius", "wasserstein"]), default="frobenius", show_default=True)
@click.option("--alpha", type=float, default=1.0, show_default=True, help="Power for the Frobenius metric.")
@spec_options
@click.option("--no-projection", is_flag=True, help="Return the raw minimizer's Laplacian.")
@click.option("--out", type=click.Path(dir_okay=False), help="Write JSON here instead of stdout.")
@config_option
@json_errors_option
def cmd_predict(dataset_dir, x, metric, alpha, weights, kernel, bandwidth, solver, eps, tol, max_iter,
                no_projection, out, json_errors):
    """Predict the graph at covariate X from a dataset directory."""

    def go():
        ds = load_dataset(dataset_dir)
        spec = RegressorSpec(_metric(metric, alpha), _weights(weights, kernel, bandwidth),
                             SolverConfig(solver, eps, tol, max_iter), projection=not no_projection)
        rep = predict(ds, list(x), spec)
        payload = rep.to_dict()
        payload["spec"] = spec.to_dict(ds)
        _emit(payload, out)

    _run(go, json_errors, diverged_code=EXIT_DIVERGED)


@main.command("eval")
@click.argument("dataset_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--pred-metric", "--metric", "pred_metric", type=click.Choice(["frobenius", "wasserstein"]),
              default="frobenius", show_default=True)
@click.option("--alpha", type=float, default=1.0, show_default=True, help="Power for Frobenius prediction.")
@click.option("--err-metric", type=click.Choice(["frobenius", "wasserstein"]), default=None,
              help="Error metric; defaults to the prediction metric.")
@click.option("--err-alpha", type=float, default=1.0, show_default=True)
@spec_options
@click.option("--folds", type=int, default=10, show_default=True)
@click.option("--reps", type=int, default=100, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--csv", "csv_out", type=click.Path(dir_okay=False), help="Per-rep MSPE rows.")
@click.option("--out", type=click.Path(dir_okay=False))
@config_option
@json_errors_option
def cmd_eval(dataset_dir, pred_metric, alpha, err_metric, err_alpha, weights, kernel, bandwidth, solver, eps,
             tol, max_iter, folds, reps, seed, csv_out, out, json_errors):
    """Frechet R^2 and repeated k-fold MSPE."""

    def go():
        ds = load_dataset(dataset_dir)
        em = err_metric or pred_metric
        cfg = EvalConfig(
            RegressorSpec(_metric(pred_metric, alpha), _weights(weights, kernel, bandwidth),
                          SolverConfig(solver, eps, tol, max_iter)),
            _metric(em, err_alpha), folds=folds, reps=reps, seed=seed,
        )
        res = cv_mspe(ds, cfg)
        if csv_out:
            Path(csv_out).write_text(res.csv_rows(), encoding="utf-8")
        _emit(res.to_dict(), out)

    _run(go, json_errors)


def _parse_value(s):
    try:
        return json.loads(s)
    except json.JSONDecodeError:
        return s


@main.command("experiment")
@click.argument("name", type=click.Choice(
    ["fig1_toy", "scaling", "interpolate", "spectral", "erdos_renyi", "convergence"]), required=False)
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
              help="Override a driver parameter; VALUE is parsed as JSON when possible.")
@click.option("--seed", type=int, default=None, help="Seed for randomized experiments.")
@click.option("--from-manifest", type=click.Path(exists=True, dir_okay=False),
              help="Rerun with the parameters recorded in a manifest.json.")
@config_option
@json_errors_option
@click.pass_context
def cmd_experiment(ctx, name, out, overrides, seed, from_manifest, json_errors):
    """Regenerate a figure's data series as CSV plus manifest.json.

    Config files may carry ``name = "..."`` and a ``[parameters]`` table.
    """
    from . import experiments

    def go():
        params = dict(ctx.meta.get("config_tables", {}).get("parameters", {}))
        exp = name or (ctx.default_map or {}).get("name")
        if from_manifest:
            m = json.loads(Path(from_manifest).read_text(encoding="utf-8"))
            exp = exp or m["experiment"]
            params = {**m["parameters"], **params}
        if exp is None:
            raise ValueError("experiment name required (argument, config or manifest)")
        for kv in overrides:
            if "=" not in kv:
                raise ValueError(f"--set expects KEY=VALUE, got {kv!r}")
            k, v = kv.split("=", 1)
            params[k.strip().replace("-", "_")] = _parse_value(v)
        if seed is not None:
            params["seed"] = seed
        for k, v in params.items():
            if isinstance(v, list):
                params[k] = tuple(v)
        try:
            manifest = experiments.run(exp, out, **params)
        except TypeError as exc:
            raise ValueError(f"bad parameters for {exp}: {exc}") from None
        click.echo(json.dumps({"experiment": exp, "out": str(out), "outputs": manifest["outputs"]}))

    _run(go, json_errors)


@main.command("ingest")
@click.argument("trips", type=click.Path(exists=True, dir_okay=False))
@click.argument("cases", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), required=True, help="Dataset directory to write.")
@click.option("--regions", type=int, default=13, show_default=True)
@click.option("--zone-map", type=click.Path(exists=True, dir_okay=False),
              help="CSV zone_id,region_id applied to the trip region columns.")
@config_option
@json_errors_option
def cmd_ingest(trips, cases, out, regions, zone_map, json_errors):
    """Build a (weekend, cases) -> daily region graph dataset from trip records."""

    def go():
        ds, agg = ingest_taxi(trips, cases, out, regions=regions, zone_map_path=zone_map)
        click.echo(json.dumps({"n": ds.n, "k": ds.k, "p": ds.p, "rejected_records": agg.rejected,
                               "rejected_reasons": agg.reasons, "out": str(out)}))

    _run(go, json_errors)


@main.command("fixture")
@click.argument("name", type=click.Choice(["toy", "interpolation", "linear", "taxi"]))
@click.argument("out", type=click.Path(file_okay=False))
@json_errors_option
def cmd_fixture(name, out, json_errors):
    """Write a built-in dataset (or the raw taxi CSVs) to OUT."""
    from .fixtures import write_fixture

    _run(lambda: write_fixture(name, out), json_errors)
    click.echo(str(out))


if __name__ == "__main__":
    main()
