"""Command-line entry point.

Every subcommand reads its inputs, writes JSON/CSV artifacts into the output
directory, and prints a one-line summary.  Exit codes: 0 success, 1 domain
error, 2 usage error.  Identical invocations with the same seed produce
byte-identical artifacts.
"""

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import binning
from .apps import CoordLayout, jump_analysis, monotone_fit, project_edit, vi_range
from .blocking import explore
from .boxoracle import coord_intervals
from .ellipsoid import Ellipsoid
from .errors import RashgamError
from .evaluation import (
    TotalLossEvaluator,
    estimate_precision,
    fork_rng,
    method_ratio_report,
)
from .gam import GamModel, SupportSet, expand_support, fit_erm, reduce_support, total_loss
from .rsetfit import GamObjective, RashomonConfig, approximate


def _out_dir(out: str) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path: Path, doc):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, sort_keys=True, indent=1)


def _load_model_and_support(model_path) -> tuple[GamModel, SupportSet]:
    model = GamModel.load(model_path)
    return model, model.support


def _dataset_for_model(data_path, model: GamModel) -> binning.BinnedDataset:
    raw = binning.read_csv(data_path)
    spec = binning.BinningSpec([e for e in model.edges])
    return binning.bin_dataset(raw, spec)


@click.group()
@click.option("--threads", type=int, default=None, envvar="RASHGAM_THREADS",
              help="Cap worker threads for parallelizable loops.")
def main(threads):
    """Rashomon-set toolkit for sparse binned logistic GAMs."""
    if threads is not None:
        os.environ["RASHGAM_THREADS"] = str(threads)


def run(argv=None) -> int:
    """Programmatic entry returning the exit code instead of raising SystemExit."""
    try:
        main.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as exc:
        click.echo(f"usage error: {exc}", err=True)
        return 2
    except click.ClickException as exc:
        exc.show()
        return 1
    except (RashgamError, OSError, json.JSONDecodeError, KeyError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1


def _cli_errors(fn):
    """Map domain errors to exit code 1 both as a script and via run()."""

    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (RashgamError, OSError, json.JSONDecodeError, KeyError) as exc:
            raise click.ClickException(str(exc)) from exc

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@main.command()
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--bins", default=32, show_default=True, help="Max quantile bins per feature.")
@click.option("--edges-file", type=click.Path(exists=True), help="JSON list of per-feature edge lists; overrides --bins.")
@click.option("--lambda2", default=0.001, show_default=True)
@click.option("--lambdas", default=0.001, show_default=True)
@click.option("--tol", default=1e-8, show_default=True)
@click.option("--out", default="./out", show_default=True)
@_cli_errors
def fit(data_path, bins, edges_file, lambda2, lambdas, tol, out):
    """Fit the ERM GAM on a CSV dataset and write model.json."""
    raw = binning.read_csv(data_path)
    if edges_file:
        with open(edges_file, encoding="utf-8") as f:
            spec = binning.BinningSpec([np.asarray(e, dtype=float) for e in json.load(f)])
    else:
        spec = binning.make_quantile_spec(raw, bins)
    data = binning.bin_dataset(raw, spec)
    support = SupportSet.trivial(data)
    model = fit_erm(data, support, lambda2, tol=tol)
    model = GamModel(
        feature_names=model.feature_names,
        edges=model.edges,
        omega0=model.omega0,
        omega=model.omega,
        support=model.support,
        lambda2=lambda2,
        lambda_s=lambdas,
        pi=model.pi,
    )
    path = _out_dir(out) / "model.json"
    model.save(path)
    breakdown = total_loss(data, model.beta, lambda2, lambdas)
    click.echo(
        f"fit: n={data.n} m={data.m} loss={breakdown.total:.6f} "
        f"(classification {breakdown.classification:.6f}, steps {breakdown.steps}) -> {path}"
    )


@main.command()
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--theta-mult", default=1.01, show_default=True)
@click.option("--theta", "theta_abs", type=float, default=None, help="Absolute threshold; overrides --theta-mult.")
@click.option("--c", "c_penalty", default=500.0, show_default=True, help="Outside-sample penalty constant.")
@click.option("--lr", default=0.0001, show_default=True)
@click.option("--iterations", default=1000, show_default=True)
@click.option("--samples-per-iter", default=32, show_default=True)
@click.option("--seed", default=42, show_default=True)
@click.option("--out", default="./out", show_default=True)
@_cli_errors
def rset(data_path, model_path, theta_mult, theta_abs, c_penalty, lr, iterations, samples_per_iter, seed, out):
    """Approximate the Rashomon set of the model's support; writes ellipsoid.json + trace.csv."""
    model, support = _load_model_and_support(model_path)
    data = _dataset_for_model(data_path, model)
    cfg = RashomonConfig(
        lambda2=model.lambda2,
        lambda_s=model.lambda_s,
        theta=theta_abs,
        theta_mult=None if theta_abs is not None else theta_mult,
        C=c_penalty,
        learning_rate=lr,
        iterations=iterations,
        samples_per_iter=samples_per_iter,
    )
    ell, erm, trace = approximate(data, support, cfg, fork_rng(seed, 0))
    outdir = _out_dir(out)
    ell.save(outdir / "ellipsoid.json")
    trace.save_csv(outdir / "trace.csv")
    click.echo(
        f"rset: dim={ell.dim} theta={ell.meta['theta']:.6f} "
        f"log_volume={ell.log_volume():.3f} -> {outdir / 'ellipsoid.json'}"
    )


@main.command()
@click.option("--ellipsoid", "ellipsoid_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--ktilde", required=True, type=int, help="Target support size after merging.")
@click.option("--limit", default=10000, show_default=True)
@click.option("--seed", default=42, show_default=True)
@click.option("--out", default="./out", show_default=True)
@_cli_errors
def block(ellipsoid_path, model_path, ktilde, limit, seed, out):
    """Slice the fitted ellipsoid for merged supports of size KTILDE; writes slices.json."""
    model, _ = _load_model_and_support(model_path)
    ell = Ellipsoid.load(ellipsoid_path)
    layout = CoordLayout.from_model(model)
    results = explore(ell, layout.blocks, ktilde, limit, fork_rng(seed, 0))
    doc = [
        {
            "plan": plan.encode(),
            "u": sliced.u,
            "loss_bound": sliced.loss_bound,
            "center": sliced.ellipsoid.center.tolist(),
            "log_volume": sliced.ellipsoid.log_volume(),
        }
        for plan, sliced in results
    ]
    path = _out_dir(out) / "slices.json"
    _write_json(path, doc)
    click.echo(f"block: {len(doc)} nonempty slices at K~={ktilde} -> {path}")


@main.command()
@click.option("--ellipsoid", "ellipsoid_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--fix-others", is_flag=True, default=False)
@click.option("--out", default="./out", show_default=True)
@_cli_errors
def vi(ellipsoid_path, model_path, fix_others, out):
    """Variable-importance ranges for every feature; writes vi.csv and vi.json."""
    model, _ = _load_model_and_support(model_path)
    ell = Ellipsoid.load(ellipsoid_path)
    layout = CoordLayout.from_model(model)
    mode = "fix-others" if fix_others else "free"
    rows = []
    for j, name in enumerate(model.feature_names):
        r = vi_range(ell, layout, j, fix_others)
        rows.append({"feature": name, "vi_minus": r.vi_minus, "vi_plus": r.vi_plus, "mode": mode})
    outdir = _out_dir(out)
    with open(outdir / "vi.csv", "w", encoding="utf-8") as f:
        f.write("feature,vi_minus,vi_plus,mode\n")
        for r in rows:
            f.write(f"{r['feature']},{r['vi_minus']!r},{r['vi_plus']!r},{r['mode']}\n")
    _write_json(outdir / "vi.json", rows)
    top = max(rows, key=lambda r: r["vi_minus"])
    click.echo(f"vi: {len(rows)} features, largest vi_minus: {top['feature']} -> {outdir / 'vi.csv'}")


@main.command()
@click.option("--ellipsoid", "ellipsoid_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--feature", "features", multiple=True, required=True)
@click.option("--direction", "directions", multiple=True, required=True,
              type=click.Choice(["increasing", "decreasing"]))
@click.option("--out", default="./out", show_default=True)
@_cli_errors
def monotone(ellipsoid_path, model_path, features, directions, out):
    """Closest in-set model with monotone shape functions; writes monotone.json."""
    if len(features) != len(directions):
        raise click.UsageError("--feature and --direction must be paired")
    model, _ = _load_model_and_support(model_path)
    ell = Ellipsoid.load(ellipsoid_path)
    layout = CoordLayout.from_model(model)
    name_to_id = {n: j for j, n in enumerate(model.feature_names)}
    constraints = []
    for name, direction in zip(features, directions):
        if name not in name_to_id:
            raise RashgamError(f"unknown feature {name!r}")
        constraints.append((name_to_id[name], direction))
    w, q, feasible = monotone_fit(ell, layout, constraints)
    beta = expand_support(model.support, w)
    doc = {"omega0": beta[0], "omega": beta[1:].tolist(), "q": q, "feasible": feasible}
    path = _out_dir(out) / "monotone.json"
    _write_json(path, doc)
    click.echo(f"monotone: q={q:.6f} feasible={feasible} -> {path}")


@main.command()
@click.option("--ellipsoid", "ellipsoid_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--request", "request_path", required=True, type=click.Path(exists=True),
              help="JSON {omega0, omega} with one omega entry per bin.")
@click.option("--out", default="./out", show_default=True)
@_cli_errors
def project(ellipsoid_path, model_path, request_path, out):
    """Project a requested coefficient vector into the set; writes projected.json."""
    model, _ = _load_model_and_support(model_path)
    ell = Ellipsoid.load(ellipsoid_path)
    with open(request_path, encoding="utf-8") as f:
        req = json.load(f)
    beta = np.concatenate([[float(req["omega0"])], np.asarray(req["omega"], dtype=float)])
    v, dev = reduce_support(model.support, beta)
    if dev > 1e-8:
        raise RashgamError("requested vector breaks within-run equality of the support")
    w, dist, inside = project_edit(ell, v)
    out_beta = expand_support(model.support, w)
    doc = {
        "omega0": out_beta[0],
        "omega": out_beta[1:].tolist(),
        "distance": dist,
        "inside_already": inside,
    }
    path = _out_dir(out) / "projected.json"
    _write_json(path, doc)
    click.echo(f"project: distance={dist:.6f} inside_already={inside} -> {path}")


@main.command()
@click.option("--ellipsoid", "ellipsoid_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("-n", "n_samples", default=100, show_default=True)
@click.option("--seed", default=42, show_default=True)
@click.option("--out", default="./out", show_default=True)
@_cli_errors
def sample(ellipsoid_path, model_path, n_samples, seed, out):
    """Draw coefficient vectors uniformly from the ellipsoid; writes samples.csv."""
    model, _ = _load_model_and_support(model_path)
    ell = Ellipsoid.load(ellipsoid_path)
    V = ell.sample(fork_rng(seed, 0), n_samples)
    path = _out_dir(out) / "samples.csv"
    with open(path, "w", encoding="utf-8") as f:
        f.write("omega0," + ",".join(f"bin{i}" for i in range(model.m)) + "\n")
        for row in V:
            beta = expand_support(model.support, row)
            f.write(",".join(repr(x) for x in beta) + "\n")
    click.echo(f"sample: {n_samples} draws dim={ell.dim} -> {path}")


@main.command()
@click.option("--ellipsoid", "ellipsoid_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--feature", required=True)
@click.option("--k", "boundary", required=True, type=int)
@click.option("-n", "n_samples", default=10000, show_default=True)
@click.option("--tau", default=0.0, show_default=True)
@click.option("--seed", default=42, show_default=True)
@click.option("--out", default="./out", show_default=True)
@_cli_errors
def jumps(ellipsoid_path, model_path, feature, boundary, n_samples, tau, seed, out):
    """Fraction of sampled models with a jump at a step boundary; writes jumps.json."""
    model, _ = _load_model_and_support(model_path)
    ell = Ellipsoid.load(ellipsoid_path)
    layout = CoordLayout.from_model(model)
    name_to_id = {n: j for j, n in enumerate(model.feature_names)}
    if feature not in name_to_id:
        raise RashgamError(f"unknown feature {feature!r}")
    rep = jump_analysis(ell, layout, name_to_id[feature], boundary, n_samples, tau, fork_rng(seed, 0))
    doc = {
        "feature": feature,
        "boundary": rep.boundary,
        "n_samples": rep.n_samples,
        "fraction_down": rep.fraction_down,
        "fraction_up": rep.fraction_up,
        "fraction_flat": rep.fraction_flat,
        "tau": rep.tau,
    }
    path = _out_dir(out) / "jumps.json"
    _write_json(path, doc)
    click.echo(
        f"jumps: down={rep.fraction_down:.4f} up={rep.fraction_up:.4f} "
        f"flat={rep.fraction_flat:.4f} -> {path}"
    )


@main.command()
@click.option("--ellipsoid", "ellipsoid_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("-n", "n_samples", default=10000, show_default=True)
@click.option("--seed", default=42, show_default=True)
@click.option("--out", default="./out", show_default=True)
@_cli_errors
def precision(ellipsoid_path, model_path, data_path, n_samples, seed, out):
    """Estimate the share of sampled models truly below theta; writes precision.json."""
    model, support = _load_model_and_support(model_path)
    ell = Ellipsoid.load(ellipsoid_path)
    data = _dataset_for_model(data_path, model)
    theta = ell.meta.get("theta")
    if theta is None:
        raise RashgamError("ellipsoid JSON carries no theta")
    tl = TotalLossEvaluator(data, support, model.lambda2, model.lambda_s)
    est = estimate_precision(ell, tl, theta, n_samples, fork_rng(seed, 0))
    doc = {
        "n_samples": est.n_samples,
        "n_inside": est.n_inside,
        "precision": est.precision,
        "half_width": est.half_width,
        "theta": theta,
    }
    path = _out_dir(out) / "precision.json"
    _write_json(path, doc)
    click.echo(f"precision: {est.precision:.4f} +- {est.half_width:.4f} -> {path}")


@main.command()
@click.option("--ellipsoid", "ellipsoid_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--ratios", default="0.5,0.75,1.0,1.5,2.0", show_default=True)
@click.option("-n", "n_samples", default=10000, show_default=True)
@click.option("--seed", default=42, show_default=True)
@click.option("--out", default="./out", show_default=True)
@_cli_errors
def tradeoff(ellipsoid_path, model_path, data_path, ratios, n_samples, seed, out):
    """Precision across rescaled copies of the ellipsoid; writes tradeoff.csv."""
    from .evaluation import tradeoff_curve

    model, support = _load_model_and_support(model_path)
    ell = Ellipsoid.load(ellipsoid_path)
    data = _dataset_for_model(data_path, model)
    theta = ell.meta.get("theta")
    if theta is None:
        raise RashgamError("ellipsoid JSON carries no theta")
    tl = TotalLossEvaluator(data, support, model.lambda2, model.lambda_s)
    rho_list = [float(x) for x in ratios.split(",") if x]
    rows = tradeoff_curve(ell, tl, theta, rho_list, n_samples, seed)
    path = _out_dir(out) / "tradeoff.csv"
    with open(path, "w", encoding="utf-8") as f:
        f.write("rho,precision,half_width\n")
        for rho, prec, hw in rows:
            f.write(f"{rho!r},{prec!r},{hw!r}\n")
    click.echo(f"tradeoff: {len(rows)} points -> {path}")


@main.command()
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--ktilde", required=True, type=int)
@click.option("--plans", default=20, show_default=True)
@click.option("--theta-mult", default=1.01, show_default=True)
@click.option("--c", "c_penalty", default=500.0, show_default=True)
@click.option("--lr", default=0.001, show_default=True)
@click.option("--iterations", default=400, show_default=True)
@click.option("--precision-samples", default=2000, show_default=True)
@click.option("--seed", default=42, show_default=True)
@click.option("--out", default="./out", show_default=True)
@_cli_errors
def ratios(data_path, model_path, ktilde, plans, theta_mult, c_penalty, lr, iterations,
           precision_samples, seed, out):
    """Method-1 vs Method-2 precision/volume/time table; writes ratios.csv + manifest.json."""
    import hashlib

    model, support = _load_model_and_support(model_path)
    data = _dataset_for_model(data_path, model)
    cfg = RashomonConfig(
        lambda2=model.lambda2,
        lambda_s=model.lambda_s,
        theta_mult=theta_mult,
        C=c_penalty,
        learning_rate=lr,
        iterations=iterations,
    )
    rows, skipped = method_ratio_report(
        data, support, cfg, ktilde, plans, seed, n_precision_samples=precision_samples
    )
    outdir = _out_dir(out)
    with open(outdir / "ratios.csv", "w", encoding="utf-8") as f:
        f.write("plan,u,precision_ratio,volume_ratio,time_method1,time_method2\n")
        for r in rows:
            f.write(
                f'"{r.plan_encoding}",{r.u!r},{r.precision_ratio!r},'
                f"{r.volume_ratio!r},{r.time_method1!r},{r.time_method2!r}\n"
            )
    digest = hashlib.sha256(Path(data_path).read_bytes()).hexdigest()
    _write_json(
        outdir / "manifest.json",
        {
            "seed": seed,
            "ktilde": ktilde,
            "plans_requested": plans,
            "plans_compared": len(rows),
            "plans_empty": skipped,
            "theta_mult": theta_mult,
            "dataset_sha256": digest,
        },
    )
    click.echo(f"ratios: {len(rows)} plans compared, {skipped} empty -> {outdir / 'ratios.csv'}")


@main.command(name="box-volume")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--theta-mult", default=1.01, show_default=True)
@click.option("--delta", default=1e-6, show_default=True)
@click.option("--out", default="./out", show_default=True)
@_cli_errors
def box_volume_cmd(model_path, data_path, theta_mult, delta, out):
    """Axis-aligned box-volume diagnostic at the model's coefficients; writes box.json."""
    model, support = _load_model_and_support(model_path)
    data = _dataset_for_model(data_path, model)
    objective = GamObjective(data, support, model.lambda2)
    v, _ = reduce_support(support, model.beta)
    steps = support.steps()
    lstar = float(objective.value(v)) + model.lambda_s * steps
    theta_eff = theta_mult * lstar - model.lambda_s * steps
    intervals = coord_intervals(objective, v, theta_eff, delta)
    vol = 1.0
    for iv in intervals:
        vol *= iv.width
    doc = {
        "theta": theta_mult * lstar,
        "delta": delta,
        "box_volume": vol,
        "intervals": [{"coord": iv.j, "left": iv.left, "right": iv.right} for iv in intervals],
    }
    path = _out_dir(out) / "box.json"
    _write_json(path, doc)
    click.echo(f"box-volume: volume={vol:.6e} over {len(intervals)} coordinates -> {path}")


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--ellipsoid", "ellipsoid_path", required=True, type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@_cli_errors
def serve(model_path, ellipsoid_path, host, port):
    """Serve the model + ellipsoid over HTTP for the editor UI."""
    import uvicorn

    from .service import create_app, load_session

    app = create_app(load_session(model_path, ellipsoid_path))
    click.echo(f"serving on http://{host}:{port} (OpenAPI at /api/spec)")
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    sys.exit(run())
