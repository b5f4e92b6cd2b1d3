"""Class-mode detection: density, the zeta quality score, and the ranking.

A pixel is a good class-mode candidate when it is dense, spectrally pure,
and far (in diffusion distance) from any better candidate.  ``zeta`` fuses
density and purity; ``dt_values`` measures the distance to the nearest point
of higher zeta (the zeta-maximizer instead gets its farthest distance, so it
always ranks as a mode); their product orders the pixels.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import DiffusionOperator, KnnGraph

__all__ = [
    "DensityVector",
    "ModeRanking",
    "empirical_density",
    "zeta",
    "dt_values",
    "rank_modes",
    "write_diagnostics",
]


@dataclass(frozen=True)
class DensityVector:
    """Kernel-weighted neighbor counts and the scale they were computed at."""

    p: np.ndarray  # (n,) nonnegative
    sigma0: float


@dataclass(frozen=True)
class ModeRanking:
    """Per-pixel scores and the mode ordering (score descending, index
    tie-break)."""

    zeta: np.ndarray
    dt: np.ndarray
    scores: np.ndarray  # zeta * dt
    ordering: np.ndarray  # (n,) int64 permutation

    @property
    def n(self) -> int:
        return len(self.ordering)


def empirical_density(points, graph: KnnGraph, sigma0: float) -> DensityVector:
    """p(x) = sum over the k nearest neighbors y of exp(-||x-y||^2/sigma0^2).

    The sum runs over the graph's stored neighbor lists (self excluded).
    """
    if sigma0 <= 0:
        raise ValueError("sigma0 must be positive")
    n = len(getattr(points, "points", points))
    if n != graph.n:
        raise ValueError("graph was not built on these points")
    p = np.exp(-(graph.distances**2) / sigma0**2).sum(axis=1)
    if p.max() == 0.0:
        raise ValueError(
            "all densities underflowed to zero; increase sigma0 "
            "(or normalize the data)"
        )
    return DensityVector(p=p, sigma0=float(sigma0))


def zeta(density, eta: np.ndarray) -> np.ndarray:
    """Harmonic mean of max-normalized density and purity, in [0, 1]."""
    p = np.asarray(getattr(density, "p", density), dtype=np.float64)
    eta = np.asarray(eta, dtype=np.float64)
    if p.shape != eta.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {eta.shape}")
    if p.max() <= 0 or eta.max() <= 0:
        raise ValueError("density and purity must each have a positive maximum")
    pbar = p / p.max()
    ebar = eta / eta.max()
    total = pbar + ebar
    out = np.zeros_like(total)
    np.divide(2.0 * pbar * ebar, total, out=out, where=total > 0)
    return out


def _zeta_order(zeta_values: np.ndarray) -> np.ndarray:
    """Points sorted by zeta descending, ties by ascending index."""
    n = len(zeta_values)
    return np.lexsort((np.arange(n), -zeta_values))


def dt_values(
    op: DiffusionOperator,
    t: int,
    zeta_values: np.ndarray,
    dists: np.ndarray | None = None,
) -> np.ndarray:
    """Distance from each point to its nearest point of higher zeta.

    "Higher" means strictly larger zeta, or equal zeta with an earlier index
    (the global tie order), so exactly one point, the zeta-maximizer, has no
    candidates; it receives its farthest distance instead.  ``dists`` may
    supply a precomputed diffusion-distance matrix.
    """
    zeta_values = np.asarray(zeta_values, dtype=np.float64)
    n = len(zeta_values)
    if n != op.n:
        raise ValueError("zeta length does not match the operator")
    order = _zeta_order(zeta_values)
    position = np.empty(n, dtype=np.int64)
    position[order] = np.arange(n)

    out = np.empty(n, dtype=np.float64)
    if dists is not None:
        E = None
        block = 1024
    else:
        E = op.embed(t)
        block = max(1, min(256, int(96e6 / (max(1, n * E.shape[1]) * 8))))
    for start in range(0, n, block):
        stop = min(start + block, n)
        if dists is not None:
            rows = np.asarray(dists[start:stop], dtype=np.float64)
        else:
            diff = E[start:stop, None, :] - E[None, :, :]
            rows = np.sqrt((diff**2).sum(axis=2))
        masked = np.where(position[None, :] < position[start:stop, None], rows, np.inf)
        out[start:stop] = masked.min(axis=1)
    top = order[0]
    if dists is not None:
        out[top] = np.asarray(dists[top]).max()
    else:
        diff = E - E[top]
        out[top] = np.sqrt((diff**2).sum(axis=1)).max()
    return out


def rank_modes(zeta_values: np.ndarray, dt: np.ndarray) -> ModeRanking:
    """Order pixels by zeta * dt descending with index tie-break."""
    zeta_values = np.asarray(zeta_values, dtype=np.float64)
    dt = np.asarray(dt, dtype=np.float64)
    if zeta_values.shape != dt.shape:
        raise ValueError("zeta and dt lengths differ")
    scores = zeta_values * dt
    ordering = np.lexsort((np.arange(len(scores)), -scores))
    return ModeRanking(zeta=zeta_values, dt=dt, scores=scores, ordering=ordering)


def write_diagnostics(
    path: str | Path,
    density: DensityVector,
    eta: np.ndarray,
    ranking: ModeRanking,
    pixel_index: np.ndarray | None = None,
) -> None:
    """Dump per-pixel density, purity, zeta, dt, and score to CSV."""
    n = len(ranking.zeta)
    rank_of = np.empty(n, dtype=np.int64)
    rank_of[ranking.ordering] = np.arange(1, n + 1)
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["index", "row", "col", "density", "purity",
                        "zeta", "dt", "score", "rank"])
        for i in range(n):
            row, col = (pixel_index[i] if pixel_index is not None else (-1, -1))
            writer.writerow([
                i, int(row), int(col),
                repr(float(density.p[i])), repr(float(eta[i])),
                repr(float(ranking.zeta[i])), repr(float(ranking.dt[i])),
                repr(float(ranking.scores[i])), int(rank_of[i]),
            ])
