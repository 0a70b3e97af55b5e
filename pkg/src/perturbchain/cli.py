"""Command-line interface.

Every subcommand accepts ``--config run.json`` mirroring its flags (top-level
keys, or nested under the subcommand name); explicit flags override the file.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .calibrate import CalibrationConfig, calibrate_all
from .cluster import (
    FeatureMatrix,
    GridFeatureExtractor,
    build_cluster_model,
    read_assignments_csv,
    read_features_csv,
    write_assignments_csv,
    write_features_csv,
)
from .dataset import load_dataset, write_synthetic
from .harness import load_report, render_markdown, report_to_json, run_campaign, write_report
from .models import open_model
from .optimize import DEConfig
from .perturb import ParamBounds, Registry, default_registry


def _merge_config(ctx: click.Context) -> None:
    """Fill parameters from the config file unless given on the command line."""
    path = ctx.params.pop("config_path", None)
    if not path:
        return
    data = json.loads(Path(path).read_text())
    section = data.get(ctx.command.name)
    merged = dict(data) if not isinstance(section, dict) else {**data, **section}
    # config keys are flag spellings ("k-chain") or parameter names ("k_chain")
    by_key = {}
    for param in ctx.command.params:
        by_key[param.name] = param.name
        for opt in getattr(param, "opts", ()):
            by_key[opt.lstrip("-").replace("-", "_")] = param.name
    for key, value in merged.items():
        name = by_key.get(key.replace("-", "_"))
        if name is None or isinstance(value, dict):
            continue
        if ctx.get_parameter_source(name) != click.core.ParameterSource.COMMANDLINE:
            if name == "disable" and isinstance(value, list):
                value = tuple(value)
            ctx.params[name] = value


def _config_option(f):
    return click.option(
        "--config",
        "config_path",
        type=click.Path(exists=True, dir_okay=False),
        default=None,
        help="JSON file mirroring this command's flags; flags override it.",
    )(f)


def _require(params: dict, flag_by_name: dict[str, str]) -> None:
    """Reject parameters that neither the command line nor the config supplied."""
    for name, flag in flag_by_name.items():
        if params.get(name) is None:
            raise click.UsageError(f"missing required option {flag} (flag or config file)")


def _load_registry(registry_path: str | None, disabled: tuple[str, ...] = ()) -> Registry:
    reg = Registry.load(registry_path) if registry_path else default_registry()
    if disabled:
        reg = reg.with_disabled(set(reg.disabled) | set(disabled))
    return reg


def _parse_disable(tokens: tuple[str, ...]) -> dict[str, list[int] | None]:
    """`name` disables everywhere; `name@1,5` only for those cluster ids."""
    disabled: dict[str, list[int] | None] = {}
    for token in tokens:
        if "@" in token:
            name, _, ids = token.partition("@")
            try:
                disabled[name] = [int(c) for c in ids.split(",") if c]
            except ValueError:
                raise click.BadParameter(f"bad cluster list in --disable {token!r}")
        else:
            disabled[token] = None
    return disabled


@click.group()
@click.version_option()
def main() -> None:
    """Falsify segmentation models with bounded natural-perturbation chains."""


@main.command("gen-synthetic")
@click.option("--n", default=50, show_default=True, help="Number of scenes.")
@click.option("--out", "out_dir", default=None, type=click.Path(file_okay=False))
@click.option("--seed", default=0, show_default=True)
@click.option("--width", default=96, show_default=True)
@click.option("--height", default=64, show_default=True)
@_config_option
@click.pass_context
def gen_synthetic(ctx, **kwargs) -> None:
    """Generate a synthetic band-scene dataset with manifest."""
    _merge_config(ctx)
    p = ctx.params
    _require(p, {"out_dir": "--out"})
    manifest = write_synthetic(
        p["out_dir"], n=p["n"], seed=p["seed"], width=p["width"], height=p["height"]
    )
    click.echo(f"wrote {p['n']} scenes; manifest at {manifest}")


@main.command()
@click.option("--dataset", "manifest", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--model", default="builtin", show_default=True, help="'builtin' or a model command line.")
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False))
@click.option("--grid", default=16, show_default=True, help="Grid points per parameter sweep.")
@click.option("--target", default=0.01, show_default=True, help="Target mean IoU deterioration.")
@click.option("--seed", default=0, show_default=True)
@click.option("--registry", "registry_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--disable", "disable", multiple=True, help="Perturbation to mark disabled (repeatable).")
@click.option("--model-timeout", default=30.0, show_default=True)
@_config_option
@click.pass_context
def calibrate(ctx, **kwargs) -> None:
    """Grid-search per-parameter strength limits on a dataset."""
    _merge_config(ctx)
    p = ctx.params
    _require(p, {"manifest": "--dataset", "out_path": "--out"})
    registry = _load_registry(p["registry_path"], tuple(p["disable"]))
    dataset = load_dataset(p["manifest"])
    pairs = [(item.image, item.mask) for item in dataset]
    model = open_model(p["model"], timeout=p["model_timeout"])
    try:
        cfg = CalibrationConfig(
            pairs, model, grid_points=p["grid"], target=p["target"], seed=p["seed"]
        )
        bounds = calibrate_all(registry, cfg, out_path=p["out_path"])
    finally:
        model.close()
    binding = sum(
        1
        for spec in registry
        for prm in spec.params
        for side, hard in (
            (bounds.get(spec.name, prm.name).hi, prm.hard_max),
            (bounds.get(spec.name, prm.name).lo, prm.hard_min),
        )
        if side != hard and side != prm.neutral
    )
    click.echo(f"calibrated {registry.param_count} parameters ({binding} binding); wrote {p['out_path']}")


@main.command()
@click.option("--dataset", "manifest", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--k", default=30, show_default=True, help="Number of clusters.")
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False))
@click.option("--features", "features_path", default=None, type=click.Path(exists=True, dir_okay=False), help="Externally computed features CSV.")
@click.option("--save-features", default=None, type=click.Path(dir_okay=False), help="Also write the computed features CSV here.")
@click.option("--seed", default=0, show_default=True)
@click.option("--out-dim", default=10, show_default=True, help="Reduced feature dimension.")
@_config_option
@click.pass_context
def cluster(ctx, **kwargs) -> None:
    """Group similar images and write the assignment CSV."""
    _merge_config(ctx)
    p = ctx.params
    _require(p, {"manifest": "--dataset", "out_path": "--out"})
    dataset = load_dataset(p["manifest"])
    if p["features_path"]:
        features = read_features_csv(p["features_path"])
        missing = set(dataset.ids()) - set(features.ids)
        if missing:
            raise click.ClickException(f"features CSV lacks ids: {sorted(missing)[:5]} ...")
    else:
        features = FeatureMatrix(
            dataset.ids(),
            GridFeatureExtractor().transform([item.image for item in dataset]),
        )
    if p["save_features"]:
        write_features_csv(features, p["save_features"])
    model = build_cluster_model(features, k=p["k"], seed=p["seed"], out_dim=p["out_dim"])
    write_assignments_csv(model.assignment, p["out_path"])
    sizes = {}
    for cid in model.assignment.values():
        sizes[cid] = sizes.get(cid, 0) + 1
    click.echo(
        f"assigned {len(model.assignment)} images to {len(sizes)} clusters "
        f"(sizes {min(sizes.values())}..{max(sizes.values())}); wrote {p['out_path']}"
    )


@main.command()
@click.option("--dataset", "manifest", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--model", default="builtin", show_default=True)
@click.option("--bounds", "bounds_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--clusters", "clusters_path", default=None, type=click.Path(exists=True, dir_okay=False), help="Assignment CSV; omitted = one cluster.")
@click.option("--budget", default=5000, show_default=True, help="Objective evaluations per cluster.")
@click.option("--k-chain", default=6, show_default=True, help="Chain length.")
@click.option("--disable", "disable", multiple=True, help="NAME or NAME@cid1,cid2 (repeatable).")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_dir", default=None, type=click.Path(file_okay=False))
@click.option("--population", default=30, show_default=True)
@click.option("--weight", default=0.8, show_default=True, help="Differential weight F.")
@click.option("--subsample", default=None, type=int, help="Evaluate each cluster on a fixed random subset of this size.")
@click.option("--registry", "registry_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--model-timeout", default=30.0, show_default=True)
@_config_option
@click.pass_context
def falsify(ctx, **kwargs) -> None:
    """Search per-cluster perturbation chains maximizing IoU deterioration."""
    _merge_config(ctx)
    p = ctx.params
    _require(p, {"manifest": "--dataset", "bounds_path": "--bounds", "out_dir": "--out"})
    registry = _load_registry(p["registry_path"])
    dataset = load_dataset(p["manifest"])
    bounds = ParamBounds.load(p["bounds_path"])
    bounds.validate(registry)
    assignment = read_assignments_csv(p["clusters_path"]) if p["clusters_path"] else None
    disabled = _parse_disable(tuple(p["disable"]))
    de_cfg = DEConfig(
        population_size=p["population"], weight=p["weight"], budget=p["budget"], seed=p["seed"]
    )
    config_echo = {
        "dataset": str(p["manifest"]),
        "model": p["model"],
        "bounds": str(p["bounds_path"]),
        "clusters": str(p["clusters_path"]) if p["clusters_path"] else None,
        "budget": p["budget"],
        "k_chain": p["k_chain"],
        "population": p["population"],
        "weight": p["weight"],
        "subsample": p["subsample"],
        "seed": p["seed"],
        "disable": sorted(f"{k}@{','.join(map(str, v))}" if v else k for k, v in disabled.items()),
    }
    model = open_model(p["model"], timeout=p["model_timeout"])
    try:
        report = run_campaign(
            dataset,
            model,
            registry,
            bounds,
            assignment,
            de_cfg,
            k=p["k_chain"],
            disabled=disabled,
            subsample=p["subsample"],
            seed=p["seed"],
            config_echo=config_echo,
        )
    finally:
        model.close()
    out = write_report(report, p["out_dir"])
    ok = [c for c in report.clusters if c.status == "ok"]
    failed = len(report.clusters) - len(ok)
    best = max((c.best_deterioration for c in ok), default=float("nan"))
    click.echo(
        f"falsified {len(ok)} clusters ({failed} failed); "
        f"worst-case deterioration {best:.3f}; report at {out}"
    )
    if failed:
        sys.exit(1)


@main.command()
@click.option("--in", "report_dir", default=None, type=click.Path(exists=True, file_okay=False))
@click.option("--format", "fmt", type=click.Choice(["md", "json"]), default="md", show_default=True)
@click.option("--registry", "registry_path", default=None, type=click.Path(exists=True, dir_okay=False))
@_config_option
@click.pass_context
def report(ctx, **kwargs) -> None:
    """Render a falsification report directory to stdout."""
    _merge_config(ctx)
    p = ctx.params
    _require(p, {"report_dir": "--in"})
    registry = _load_registry(p["registry_path"])
    rep = load_report(p["report_dir"], registry)
    if p["fmt"] == "json":
        click.echo(json.dumps(report_to_json(rep), indent=2, sort_keys=True))
    else:
        click.echo(render_markdown(rep), nl=False)


if __name__ == "__main__":
    main()
