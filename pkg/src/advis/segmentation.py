"""Mode labeling (unsupervised and budgeted-query) and label propagation.

D-VIS assigns labels 1..K to the top-K ranked pixels.  ADVIS instead spends
a budget of B oracle queries on the top-B ranked pixels and, for any class
the answers missed, falls back to unsupervised mode assignment on the next
ranked pixels.  Both then propagate: visiting unlabeled pixels by
non-increasing zeta, each takes the label of its diffusion-nearest
already-labeled pixel of zeta at least its own.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np

from . import hsi, unmixing
from .graph import (DiffusionOperator, build_knn, build_operator,
                    pairwise_diffusion_distances)
from .modes import ModeRanking, empirical_density, rank_modes, zeta as zeta_of
from .modes import dt_values

__all__ = [
    "Provenance",
    "Segmentation",
    "BudgetExceededError",
    "GroundTruthOracle",
    "RunConfig",
    "Pipeline",
    "dvis_label_modes",
    "advis_label_modes",
    "assign_mode_labels",
    "propagate",
    "run_dvis",
    "run_advis",
    "export_segmentation",
]


class Provenance(IntEnum):
    UNLABELED = 0
    MODE = 1  # rank-assigned by D-VIS
    QUERIED = 2  # oracle-labeled by ADVIS
    FALLBACK = 3  # unsupervised fallback for classes the budget missed
    PROPAGATED = 4


@dataclass(frozen=True)
class Segmentation:
    """Per-pixel classes in {0..K} (0 = still unlabeled) with provenance.

    ``parents[i]`` is the pixel whose label pixel i inherited during
    propagation, -1 for seed pixels.
    """

    labels: np.ndarray  # (n,) int32
    provenance: np.ndarray  # (n,) int8
    n_classes: int
    parents: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def complete(self) -> bool:
        return bool((self.labels > 0).all())

    def provenance_counts(self) -> dict[str, int]:
        return {
            kind.name.lower(): int((self.provenance == kind).sum())
            for kind in Provenance
        }


class BudgetExceededError(RuntimeError):
    pass


class GroundTruthOracle:
    """Answers label queries from a ground-truth vector.

    Answers are memoized so repeated queries of the same pixel are free and
    consistent; distinct pixels beyond the budget raise.
    """

    def __init__(self, gt: np.ndarray, budget: int | None = None):
        gt = np.asarray(gt)
        if gt.min() < 1:
            raise ValueError("oracle ground truth must have classes >= 1")
        self._gt = gt.astype(np.int32)
        self._budget = budget
        self._answers: dict[int, int] = {}
        self.log: list[tuple[int, int]] = []

    @property
    def n_queries(self) -> int:
        return len(self._answers)

    def query(self, pixel: int) -> int:
        pixel = int(pixel)
        if pixel in self._answers:
            return self._answers[pixel]
        if self._budget is not None and len(self._answers) >= self._budget:
            raise BudgetExceededError(f"budget of {self._budget} queries exhausted")
        label = int(self._gt[pixel])
        self._answers[pixel] = label
        self.log.append((pixel, label))
        return label


def dvis_label_modes(ranking: ModeRanking, n_classes: int) -> Segmentation:
    """Label the top-K ranked pixels 1..K in rank order; all others 0."""
    n = ranking.n
    if not 1 <= n_classes <= n:
        raise ValueError(f"need 1 <= K <= n, got K={n_classes} with n={n}")
    labels = np.zeros(n, dtype=np.int32)
    provenance = np.zeros(n, dtype=np.int8)
    modes = ranking.ordering[:n_classes]
    labels[modes] = np.arange(1, n_classes + 1)
    provenance[modes] = Provenance.MODE
    return Segmentation(labels=labels, provenance=provenance, n_classes=n_classes)


def assign_mode_labels(
    ranking: ModeRanking, n_classes: int, answers: list[int]
) -> Segmentation:
    """Apply oracle answers to the top-ranked pixels, then cover classes the
    answers missed by labeling the next ranked pixels in ascending class
    order."""
    n = ranking.n
    if not 1 <= n_classes <= n:
        raise ValueError(f"need 1 <= K <= n, got K={n_classes} with n={n}")
    for label in answers:
        if not 1 <= label <= n_classes:
            raise ValueError(f"oracle answer {label} outside 1..{n_classes}")
    q = len(answers)
    missing = sorted(set(range(1, n_classes + 1)) - set(answers))
    if q + len(missing) > n:
        raise ValueError(
            f"{q} queries plus {len(missing)} fallback classes exceed n={n}"
        )
    labels = np.zeros(n, dtype=np.int32)
    provenance = np.zeros(n, dtype=np.int8)
    queried = ranking.ordering[:q]
    labels[queried] = np.asarray(answers, dtype=np.int32)
    provenance[queried] = Provenance.QUERIED
    fallback = ranking.ordering[q : q + len(missing)]
    labels[fallback] = np.asarray(missing, dtype=np.int32)
    provenance[fallback] = Provenance.FALLBACK
    return Segmentation(labels=labels, provenance=provenance, n_classes=n_classes)


def advis_label_modes(
    ranking: ModeRanking, n_classes: int, budget: int, oracle
) -> Segmentation:
    """Query the oracle for the top-B ranked pixels and apply the answers."""
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    q = min(budget, ranking.n)
    answers = [int(oracle.query(int(ranking.ordering[k]))) for k in range(q)]
    return assign_mode_labels(ranking, n_classes, answers)


def propagate(
    partial: Segmentation,
    zeta_values: np.ndarray,
    op: DiffusionOperator,
    t: int,
    dists: np.ndarray | None = None,
) -> Segmentation:
    """Complete a partial labeling.

    Unlabeled pixels are visited by non-increasing zeta (index tie-break);
    each takes the label of the already-labeled pixel y minimizing the
    diffusion distance subject to zeta(y) >= zeta(x), ties in distance by
    ascending index.
    """
    labels = partial.labels.copy()
    provenance = partial.provenance.copy()
    n = len(labels)
    zeta_values = np.asarray(zeta_values, dtype=np.float64)
    if len(zeta_values) != n or op.n != n:
        raise ValueError("zeta/operator sizes do not match the segmentation")
    if not (labels > 0).any():
        raise ValueError("propagation needs at least one labeled pixel")
    parents = np.full(n, -1, dtype=np.int64)

    E = op.embed(t) if dists is None else None
    order = np.lexsort((np.arange(n), -zeta_values))
    for x in order:
        if labels[x] > 0:
            continue
        candidates = (labels > 0) & (zeta_values >= zeta_values[x])
        candidates[x] = False
        idx = np.flatnonzero(candidates)
        if idx.size == 0:
            raise RuntimeError(
                f"no labeled pixel of zeta >= zeta({x}) exists; "
                "mode labeling left the zeta-maximizer unreachable"
            )
        if dists is not None:
            d = np.asarray(dists[x], dtype=np.float64)[idx]
        else:
            d = np.sqrt(((E[idx] - E[x]) ** 2).sum(axis=1))
        best = idx[d == d.min()].min()
        labels[x] = labels[best]
        provenance[x] = Provenance.PROPAGATED
        parents[x] = best
    return Segmentation(
        labels=labels,
        provenance=provenance,
        n_classes=partial.n_classes,
        parents=parents,
    )


# ---------------------------------------------------------------------------
# Full pipeline


@dataclass(frozen=True)
class RunConfig:
    """Parameters of one segmentation run."""

    n_neighbors: int
    n_classes: int
    sigma0: float
    time: int
    budget: int = 0
    purity_runs: int = 100
    seed: int = 0
    num_materials: int | None = None
    normalize_abundances: bool = True
    symmetrize: str = "mutual-or"

    def to_dict(self) -> dict:
        return {
            "n_neighbors": self.n_neighbors,
            "n_classes": self.n_classes,
            "sigma0": self.sigma0,
            "time": self.time,
            "budget": self.budget,
            "purity_runs": self.purity_runs,
            "seed": self.seed,
            "num_materials": self.num_materials,
            "normalize_abundances": self.normalize_abundances,
            "symmetrize": self.symmetrize,
        }


class Pipeline:
    """Caches the seed-independent artifacts (graph, operator, density,
    distance matrix, material count) so budget sweeps and repeated runs
    only recompute what a new seed or budget actually changes."""

    # Above this point count the full distance matrix is skipped and
    # distances are recomputed per query row.
    DISTANCE_MATRIX_LIMIT = 9000

    def __init__(self, points, config: RunConfig):
        self.points = points
        self.config = config
        self.X = np.asarray(getattr(points, "points", points), dtype=np.float64)
        self._graph = None
        self._operator = None
        self._density = None
        self._dists = None
        self._dists_ready = False
        self._m = None
        self._seed_state: dict[int, tuple[np.ndarray, ModeRanking]] = {}

    @property
    def graph(self):
        if self._graph is None:
            self._graph = build_knn(self.X, self.config.n_neighbors)
        return self._graph

    @property
    def operator(self) -> DiffusionOperator:
        if self._operator is None:
            self._operator = build_operator(
                self.graph, symmetrize=self.config.symmetrize, t=self.config.time
            )
        return self._operator

    @property
    def density(self):
        if self._density is None:
            self._density = empirical_density(self.X, self.graph, self.config.sigma0)
        return self._density

    @property
    def dists(self) -> np.ndarray | None:
        if not self._dists_ready:
            if len(self.X) <= self.DISTANCE_MATRIX_LIMIT:
                self._dists = pairwise_diffusion_distances(
                    self.operator, self.config.time
                )
            self._dists_ready = True
        return self._dists

    @property
    def num_materials(self) -> int:
        if self._m is None:
            self._m = self.config.num_materials or unmixing.hysime(self.X)
        return self._m

    def seed_state(self, seed: int) -> tuple[np.ndarray, ModeRanking]:
        """zeta and the mode ranking for one seed (cached)."""
        if seed not in self._seed_state:
            # Disjoint VCA seed blocks per run seed.
            base = seed * self.config.purity_runs
            eta = unmixing.averaged_purity(
                self.X,
                self.num_materials,
                self.config.purity_runs,
                base_seed=base,
                normalize=self.config.normalize_abundances,
            )
            z = zeta_of(self.density, eta)
            dt = dt_values(self.operator, self.config.time, z, dists=self.dists)
            self._seed_state[seed] = (z, rank_modes(z, dt))
        return self._seed_state[seed]

    def run_dvis(self, seed: int | None = None) -> Segmentation:
        z, ranking = self.seed_state(self.config.seed if seed is None else seed)
        partial = dvis_label_modes(ranking, self.config.n_classes)
        return propagate(partial, z, self.operator, self.config.time,
                         dists=self.dists)

    def run_advis(self, oracle, seed: int | None = None,
                  budget: int | None = None) -> Segmentation:
        z, ranking = self.seed_state(self.config.seed if seed is None else seed)
        partial = advis_label_modes(
            ranking,
            self.config.n_classes,
            self.config.budget if budget is None else budget,
            oracle,
        )
        return propagate(partial, z, self.operator, self.config.time,
                         dists=self.dists)


def run_dvis(points, config: RunConfig) -> Segmentation:
    """Unsupervised segmentation: unmix, score, rank, label top-K, propagate."""
    return Pipeline(points, config).run_dvis()


def run_advis(points, config: RunConfig, oracle) -> Segmentation:
    """Budgeted active segmentation: like run_dvis, but the top-B ranked
    pixels are labeled by the oracle before the fallback and propagation."""
    return Pipeline(points, config).run_advis(oracle)


def export_segmentation(
    prefix: str | Path,
    seg: Segmentation,
    points,
    shape: tuple[int, int],
    config: RunConfig | None = None,
    query_log: list | None = None,
) -> None:
    """Write ``<prefix>.raw`` (int32 label raster, 0 outside the scope) plus
    ``<prefix>.json`` with parameters and provenance counts."""
    prefix = Path(prefix)
    raster = np.zeros(shape, dtype=np.int32)
    pixel_index = getattr(points, "pixel_index", None)
    if pixel_index is None:
        raster = seg.labels.reshape(shape).astype(np.int32)
    else:
        raster[pixel_index[:, 0], pixel_index[:, 1]] = seg.labels
    hsi.save_labels(prefix.with_suffix(".raw"), hsi.LabelMap(raster, seg.n_classes))
    manifest = {
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "shape": list(shape),
        "n_classes": seg.n_classes,
        "config": config.to_dict() if config is not None else None,
        "provenance_counts": seg.provenance_counts(),
        "query_log": [list(map(int, q)) for q in (query_log or [])],
    }
    prefix.with_suffix(".json").write_text(json.dumps(manifest, indent=2))
