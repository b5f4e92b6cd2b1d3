"""Command-line interface: segment, sweep, score, dump-diagnostics, serve."""

from __future__ import annotations

import sys
from pathlib import Path

import click
import numpy as np

from . import evaluation, hsi, synthetic
from .modes import write_diagnostics
from .segmentation import (GroundTruthOracle, Pipeline, RunConfig,
                           export_segmentation)

_DATASET_OPTIONS = [
    click.option("--dataset", required=True, type=click.Path(exists=True),
                 help="Cube payload (flat-binary with .hdr sidecar)."),
    click.option("--labels", type=click.Path(exists=True), default=None,
                 help="Ground-truth label map (flat-binary)."),
    click.option("--format", "cube_format", default="flat-binary",
                 type=click.Choice(["flat-binary", "envi"])),
    click.option("--scope", default="labeled-only",
                 type=click.Choice(["labeled-only", "all"])),
    click.option("--normalization", default="global-max",
                 type=click.Choice(["global-max", "none"])),
]

_CONFIG_OPTIONS = [
    click.option("--neighbors", "-N", type=int, required=True,
                 help="kNN graph neighbor count."),
    click.option("--classes", "-K", type=int, required=True,
                 help="Number of classes in the segmentation."),
    click.option("--sigma0", type=float, required=True,
                 help="Density kernel scale (on normalized spectra)."),
    click.option("--time", "-t", "time_", type=int, required=True,
                 help="Diffusion time."),
    click.option("--purity-runs", type=int, default=100, show_default=True,
                 help="Endmember extraction repeats averaged into purity."),
    click.option("--num-materials", type=int, default=None,
                 help="Skip the material-count estimate and use this m."),
    click.option("--no-normalize-abundances", is_flag=True, default=False,
                 help="Use raw abundance maxima as purity."),
    click.option("--symmetrize", default="mutual-or",
                 type=click.Choice(["mutual-or", "directed"])),
    click.option("--seed", type=int, default=0, show_default=True),
]


def _add_options(options):
    def wrap(func):
        for option in reversed(options):
            func = option(func)
        return func
    return wrap


def _load_points(dataset, labels, cube_format, scope, normalization):
    cube = hsi.load_cube(dataset, format=cube_format)
    label_map = hsi.load_labels(labels) if labels else None
    if scope == "labeled-only" and label_map is None:
        raise click.UsageError("--scope labeled-only requires --labels")
    points = hsi.flatten(cube, label_map, scope=scope,
                         normalization=normalization)
    return cube, points


def _make_config(neighbors, classes, sigma0, time_, purity_runs,
                 num_materials, no_normalize_abundances, symmetrize, seed,
                 budget=0):
    return RunConfig(
        n_neighbors=neighbors,
        n_classes=classes,
        sigma0=sigma0,
        time=time_,
        budget=budget,
        purity_runs=purity_runs,
        seed=seed,
        num_materials=num_materials,
        normalize_abundances=not no_normalize_abundances,
        symmetrize=symmetrize,
    )


@click.group()
@click.version_option()
def main():
    """Diffusion- and VCA-assisted hyperspectral segmentation (D-VIS/ADVIS)."""


@main.command()
@_add_options(_DATASET_OPTIONS)
@_add_options(_CONFIG_OPTIONS)
@click.option("--budget", "-B", type=int, default=0, show_default=True,
              help="Oracle label queries; 0 runs unsupervised D-VIS.")
@click.option("--out", required=True, type=click.Path(),
              help="Output prefix (<out>.raw, <out>.json, <out>.png).")
@click.option("--png/--no-png", default=True, show_default=True)
def segment(dataset, labels, cube_format, scope, normalization, neighbors,
            classes, sigma0, time_, purity_runs, num_materials,
            no_normalize_abundances, symmetrize, seed, budget, out, png):
    """Run one segmentation (ADVIS when --budget > 0, else D-VIS)."""
    cube, points = _load_points(dataset, labels, cube_format, scope,
                                normalization)
    config = _make_config(neighbors, classes, sigma0, time_, purity_runs,
                          num_materials, no_normalize_abundances, symmetrize,
                          seed, budget=budget)
    pipeline = Pipeline(points, config)
    oracle = None
    if budget > 0:
        if points.gt is None:
            raise click.UsageError("--budget needs --labels for the oracle")
        oracle = GroundTruthOracle(points.gt, budget=budget)
        seg = pipeline.run_advis(oracle)
    else:
        seg = pipeline.run_dvis()
    export_segmentation(Path(out), seg, points, (cube.rows, cube.cols),
                        config=config,
                        query_log=oracle.log if oracle else None)
    if png:
        raster = np.zeros((cube.rows, cube.cols), dtype=np.int32)
        raster[points.pixel_index[:, 0], points.pixel_index[:, 1]] = seg.labels
        evaluation.render_labels(raster, evaluation.default_palette(classes),
                                 Path(out).with_suffix(".png"))
    if points.gt is not None:
        score = evaluation.nmi(seg.labels[points.gt > 0],
                               points.gt[points.gt > 0])
        click.echo(f"nmi: {score:.6f}")
    click.echo(f"wrote {out}.raw / {out}.json")


def _parse_budgets(spec: str) -> list[int]:
    """Parse "a..b..step" ranges or comma-separated lists."""
    if ".." in spec:
        parts = spec.split("..")
        if len(parts) != 3:
            raise click.UsageError("budget range must be start..stop..step")
        start, stop, step = (int(p) for p in parts)
        if step <= 0 or stop < start:
            raise click.UsageError("budget range must ascend")
        return list(range(start, stop + 1, step))
    return [int(p) for p in spec.split(",") if p]


@main.command()
@_add_options(_DATASET_OPTIONS)
@_add_options(_CONFIG_OPTIONS)
@click.option("--budgets", default="10..100..10", show_default=True,
              help="Budget grid: start..stop..step or comma list.")
@click.option("--seeds", default="0..9", show_default=True,
              help="Seeds: start..stop or comma list.")
@click.option("--out", required=True, type=click.Path())
@click.option("--runtime/--no-runtime", default=True, show_default=True,
              help="Include per-cell runtimes in the output.")
def sweep(dataset, labels, cube_format, scope, normalization, neighbors,
          classes, sigma0, time_, purity_runs, num_materials,
          no_normalize_abundances, symmetrize, seed, budgets, seeds, out,
          runtime):
    """Score ADVIS against D-VIS over a budget grid (CSV or JSON)."""
    if labels is None:
        raise click.UsageError("sweep requires --labels")
    cube, points = _load_points(dataset, labels, cube_format, scope,
                                normalization)
    config = _make_config(neighbors, classes, sigma0, time_, purity_runs,
                          num_materials, no_normalize_abundances, symmetrize,
                          seed)
    budget_list = _parse_budgets(budgets)
    if ".." in seeds:
        lo, hi = (int(p) for p in seeds.split("..")[:2])
        seed_list = list(range(lo, hi + 1))
    else:
        seed_list = [int(p) for p in seeds.split(",") if p]

    def report(row):
        click.echo(f"seed={row.seed} B={row.budget} "
                   f"advis={row.nmi_advis:.4f} dvis={row.nmi_dvis:.4f}")

    results = evaluation.budget_sweep(points, budget_list, config, seed_list,
                                      progress=report)
    evaluation.write_results(results, Path(out), include_runtime=runtime)
    click.echo(f"wrote {out} ({len(results)} rows)")


@main.command()
@click.argument("predicted", type=click.Path(exists=True))
@click.argument("reference", type=click.Path(exists=True))
@click.option("--normalizer", default="arithmetic", show_default=True,
              type=click.Choice(["arithmetic", "geometric", "max"]))
def score(predicted, reference, normalizer):
    """NMI between two label rasters, on pixels labeled in REFERENCE."""
    a = hsi.load_labels(predicted).labels.ravel()
    b = hsi.load_labels(reference).labels.ravel()
    if a.shape != b.shape:
        raise click.UsageError("label maps have different sizes")
    mask = b > 0
    if not mask.any():
        raise click.UsageError("reference has no labeled pixels")
    if (a[mask] == 0).any():
        raise click.UsageError("predicted map is unlabeled on scored pixels")
    click.echo(f"{evaluation.nmi(a[mask], b[mask], normalizer=normalizer):.6f}")


@main.command("dump-diagnostics")
@_add_options(_DATASET_OPTIONS)
@_add_options(_CONFIG_OPTIONS)
@click.option("--out", required=True, type=click.Path())
def dump_diagnostics(dataset, labels, cube_format, scope, normalization,
                     neighbors, classes, sigma0, time_, purity_runs,
                     num_materials, no_normalize_abundances, symmetrize, seed,
                     out):
    """Write per-pixel density, purity, zeta, dt, and score to CSV."""
    cube, points = _load_points(dataset, labels, cube_format, scope,
                                normalization)
    config = _make_config(neighbors, classes, sigma0, time_, purity_runs,
                          num_materials, no_normalize_abundances, symmetrize,
                          seed)
    pipeline = Pipeline(points, config)
    z, ranking = pipeline.seed_state(seed)
    # recompute eta for the dump (seed_state keeps only zeta/ranking)
    from .unmixing import averaged_purity

    eta = averaged_purity(points, pipeline.num_materials, config.purity_runs,
                          base_seed=seed * config.purity_runs,
                          normalize=config.normalize_abundances)
    write_diagnostics(Path(out), pipeline.density, eta, ranking,
                      pixel_index=points.pixel_index)
    click.echo(f"wrote {out}")


@main.command("make-blobs")
@click.option("--out", required=True, type=click.Path(),
              help="Output prefix (<out>.raw + <out>_gt.raw).")
@click.option("--rows", type=int, default=20, show_default=True)
@click.option("--cols", type=int, default=30, show_default=True)
@click.option("--bands", type=int, default=10, show_default=True)
@click.option("--classes", "-K", type=int, default=3, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--separation", type=float, default=3.0, show_default=True)
@click.option("--spread", type=float, default=0.5, show_default=True)
def make_blobs(out, rows, cols, bands, classes, seed, separation, spread):
    """Write a synthetic Gaussian-blob dataset for demos and smoke tests."""
    cube_path, labels_path = synthetic.write_blob_dataset(
        Path(out), rows=rows, cols=cols, bands=bands, k=classes, seed=seed,
        separation=separation, spread=spread)
    click.echo(f"wrote {cube_path} and {labels_path}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8008, show_default=True)
@click.option("--data-root", type=click.Path(exists=True), required=True,
              help="Directory session datasets are resolved against.")
@click.option("--sessions-dir", type=click.Path(), default=None,
              help="Where session manifests persist (default <data-root>/sessions).")
@click.option("--frontend-dir", type=click.Path(), default=None,
              help="Static labeling UI to serve at / (optional).")
def serve(host, port, data_root, sessions_dir, frontend_dir):
    """Start the label-query HTTP service."""
    import uvicorn

    from .service import create_app

    app = create_app(Path(data_root),
                     Path(sessions_dir) if sessions_dir else None,
                     Path(frontend_dir) if frontend_dir else None)
    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    sys.exit(main())
