"""Scoring and the budget-sweep benchmark harness."""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .segmentation import GroundTruthOracle, Pipeline, RunConfig

__all__ = [
    "nmi",
    "SweepResult",
    "budget_sweep",
    "write_results",
    "read_results",
    "format_results",
    "default_palette",
    "render_labels",
]


def nmi(a, b, normalizer: str = "arithmetic") -> float:
    """Normalized mutual information between two partitions, in [0, 1].

    Mutual information is normalized by the arithmetic mean of the label
    entropies by default; "geometric" and "max" are available for
    comparison.  Identical-up-to-relabeling partitions score exactly 1.0;
    if either partition is constant the score is 0.0 (1.0 when both are
    constant, i.e. identical).
    """
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.size == 0 or a.shape != b.shape:
        raise ValueError("label vectors must be nonempty and equally long")
    if a.min() < 1 or b.min() < 1:
        raise ValueError("labels must be >= 1")
    if normalizer not in ("arithmetic", "geometric", "max"):
        raise ValueError(f"unknown normalizer {normalizer!r}")

    n = a.size
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)

    # One nonzero cell per row and per column means the partitions coincide
    # up to relabeling; score 1.0 without float round-off.
    if ((table > 0).sum(axis=0) == 1).all() and ((table > 0).sum(axis=1) == 1).all():
        return 1.0

    pa = table.sum(axis=1) / n
    pb = table.sum(axis=0) / n
    ha = float(-(pa[pa > 0] * np.log(pa[pa > 0])).sum())
    hb = float(-(pb[pb > 0] * np.log(pb[pb > 0])).sum())
    nz = table > 0
    pij = table[nz] / n
    outer = np.outer(pa, pb)[nz]
    # Summing the cell terms in sorted order makes the score exactly
    # symmetric in (a, b): both orders sum the same multiset of terms.
    info = float(np.sort(pij * np.log(pij / outer)).sum())
    if info <= 0:
        return 0.0
    if normalizer == "arithmetic":
        denom = 0.5 * (ha + hb)
    elif normalizer == "geometric":
        denom = float(np.sqrt(ha * hb))
    else:
        denom = max(ha, hb)
    if denom <= 0:
        return 0.0
    return float(min(1.0, info / denom))


@dataclass(frozen=True)
class SweepResult:
    """One benchmark cell: scores of the active and unsupervised runs."""

    budget: int
    nmi_advis: float
    nmi_dvis: float
    seed: int
    runtime: float  # seconds, ADVIS labeling + propagation + scoring


def budget_sweep(
    points,
    budgets: list[int],
    config: RunConfig,
    seeds: list[int],
    progress=None,
) -> list[SweepResult]:
    """Score ADVIS against D-VIS for every (budget, seed) cell.

    The ground-truth labels of ``points`` drive both the automated oracle
    and the scoring.  The graph, eigendecomposition, density, and per-seed
    purity/ranking are computed once and shared across budgets; D-VIS is
    budget-independent and computed once per seed.
    """
    if not budgets:
        raise ValueError("budgets must be nonempty")
    gt = getattr(points, "gt", None)
    if gt is None:
        raise ValueError("budget sweep needs ground-truth labels")
    gt = np.asarray(gt)
    scored = gt > 0  # score only ground-truth-labeled pixels

    pipeline = Pipeline(points, config)
    results: list[SweepResult] = []
    for seed in seeds:
        dvis_seg = pipeline.run_dvis(seed=seed)
        nmi_dvis = nmi(dvis_seg.labels[scored], gt[scored])
        for budget in budgets:
            tic = time.perf_counter()
            oracle = GroundTruthOracle(gt, budget=budget)
            seg = pipeline.run_advis(oracle, seed=seed, budget=budget)
            score = nmi(seg.labels[scored], gt[scored])
            results.append(
                SweepResult(
                    budget=int(budget),
                    nmi_advis=score,
                    nmi_dvis=nmi_dvis,
                    seed=int(seed),
                    runtime=time.perf_counter() - tic,
                )
            )
            if progress is not None:
                progress(results[-1])
    return results


_COLUMNS = ("budget", "nmi_advis", "nmi_dvis", "seed", "runtime")


def format_results(results: list[SweepResult], fmt: str = "csv",
                   include_runtime: bool = True) -> str:
    """Render sweep rows losslessly (floats via repr round-trip)."""
    columns = _COLUMNS if include_runtime else _COLUMNS[:-1]
    if fmt == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer)
        writer.writerow(columns)
        for row in results:
            writer.writerow([repr(getattr(row, c)) if isinstance(getattr(row, c), float)
                             else getattr(row, c) for c in columns])
        return buffer.getvalue()
    if fmt == "json":
        payload = [{c: getattr(row, c) for c in columns} for row in results]
        return json.dumps(payload, indent=2) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def write_results(results: list[SweepResult], path: str | Path,
                  fmt: str | None = None, include_runtime: bool = True) -> None:
    path = Path(path)
    if fmt is None:
        fmt = "json" if path.suffix == ".json" else "csv"
    path.write_text(format_results(results, fmt, include_runtime))


def read_results(path: str | Path) -> list[SweepResult]:
    path = Path(path)
    if path.suffix == ".json":
        rows = json.loads(path.read_text())
    else:
        with path.open(newline="") as handle:
            rows = list(csv.DictReader(handle))
    out = []
    for row in rows:
        out.append(
            SweepResult(
                budget=int(row["budget"]),
                nmi_advis=float(row["nmi_advis"]),
                nmi_dvis=float(row["nmi_dvis"]),
                seed=int(row["seed"]),
                runtime=float(row.get("runtime", 0.0)),
            )
        )
    return out


# 12 visually-distinct colors; label 0 renders dark gray.
_BASE_COLORS = [
    (31, 119, 180), (255, 127, 14), (44, 160, 44), (214, 39, 40),
    (148, 103, 189), (140, 86, 75), (227, 119, 194), (127, 127, 127),
    (188, 189, 34), (23, 190, 207), (255, 187, 120), (152, 223, 138),
]


def default_palette(n_classes: int) -> list[tuple[int, int, int]]:
    """Colors for labels 0..K (index 0 is the unlabeled color)."""
    palette = [(40, 40, 40)]
    for k in range(n_classes):
        base = _BASE_COLORS[k % len(_BASE_COLORS)]
        fade = 1.0 - 0.35 * (k // len(_BASE_COLORS))
        palette.append(tuple(int(c * fade) for c in base))
    return palette


def render_labels(raster: np.ndarray, palette: list[tuple[int, int, int]],
                  path: str | Path) -> None:
    """Write a label raster as an indexed-color PNG."""
    from PIL import Image

    raster = np.asarray(raster)
    if raster.ndim != 2:
        raise ValueError("raster must be 2-D")
    if raster.max() >= len(palette):
        raise ValueError("palette has fewer entries than label values")
    image = Image.fromarray(raster.astype(np.uint8), mode="P")
    flat = []
    for color in palette:
        flat.extend(color)
    image.putpalette(flat)
    image.save(Path(path))
