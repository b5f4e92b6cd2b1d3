"""Synthetic datasets for tests, demos, and service smoke runs."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .hsi import HsiCube, LabelMap, save_cube, save_labels

__all__ = [
    "gaussian_blobs",
    "simplex_mixture",
    "blob_dataset",
    "write_blob_dataset",
]


def gaussian_blobs(
    n: int,
    dim: int,
    k: int,
    seed: int,
    separation: float = 3.0,
    spread: float = 0.5,
) -> tuple[np.ndarray, np.ndarray]:
    """Equal-size isotropic Gaussian blobs with well-separated centers.

    Returns (points, labels) with labels in 1..k.  Centers sit on random
    orthogonal directions scaled by ``separation``; points are shifted to be
    nonnegative so the data behaves like reflectance.
    """
    if n % k:
        raise ValueError("n must be divisible by k for equal-size blobs")
    rng = np.random.default_rng(seed)
    directions = np.linalg.qr(rng.standard_normal((dim, dim)))[0][:, :k].T
    centers = directions * separation
    per = n // k
    points = np.concatenate(
        [centers[j] + spread * rng.standard_normal((per, dim)) for j in range(k)]
    )
    labels = np.repeat(np.arange(1, k + 1), per)
    shuffle = rng.permutation(n)
    points = points[shuffle]
    labels = labels[shuffle]
    points -= points.min()
    return points, labels.astype(np.int32)


def simplex_mixture(
    n: int,
    bands: int,
    m: int,
    seed: int,
    snr_db: float | None = None,
    include_vertices: bool = True,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Convex mixtures of ``m`` random endmember spectra.

    Returns (pixels, abundances, endmembers).  With ``include_vertices`` the
    first m pixels are the pure endmembers themselves.  ``snr_db`` adds white
    Gaussian noise at the requested signal-to-noise ratio; None keeps the
    data noise-free.
    """
    rng = np.random.default_rng(seed)
    endmembers = rng.uniform(0.1, 1.0, size=(m, bands))
    weights = rng.dirichlet(np.ones(m), size=n)
    if include_vertices:
        weights[:m] = np.eye(m)
    pixels = weights @ endmembers
    if snr_db is not None:
        signal_power = float((pixels**2).mean())
        noise_power = signal_power / 10 ** (snr_db / 10.0)
        pixels = pixels + rng.normal(0.0, np.sqrt(noise_power), size=pixels.shape)
    return pixels, weights, endmembers


def blob_dataset(
    rows: int = 20,
    cols: int = 30,
    bands: int = 10,
    k: int = 3,
    seed: int = 0,
    separation: float = 3.0,
    spread: float = 0.5,
) -> tuple[HsiCube, LabelMap]:
    """Blob point cloud arranged as a rows x cols image with full labels."""
    points, labels = gaussian_blobs(
        rows * cols, bands, k, seed, separation=separation, spread=spread
    )
    cube = HsiCube(rows=rows, cols=cols, bands=bands,
                   data=points.reshape(rows, cols, bands))
    label_map = LabelMap(labels=labels.reshape(rows, cols), n_classes=k)
    return cube, label_map


def write_blob_dataset(prefix: str | Path, **kwargs) -> tuple[Path, Path]:
    """Write a blob dataset as ``<prefix>.raw`` + ``<prefix>_gt.raw``."""
    prefix = Path(prefix)
    cube, labels = blob_dataset(**kwargs)
    cube_path = prefix.with_name(prefix.name + ".raw")
    labels_path = prefix.with_name(prefix.name + "_gt.raw")
    save_cube(cube_path, cube)
    save_labels(labels_path, labels)
    return cube_path, labels_path
