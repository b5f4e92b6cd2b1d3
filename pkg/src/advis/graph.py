"""kNN graph construction and the Markov diffusion operator.

The graph is an exact Euclidean kNN graph with ties broken by ascending
point index.  The transition operator P = D^-1 W is analyzed through a
truncated eigendecomposition; with the default mutual-or symmetrization P is
reversible and the stationary distribution is deg/sum(deg) in closed form.
Diffusion distances at time t are Euclidean distances between rows of the
spectral embedding lambda_k^t psi_k, where the right eigenvectors psi_k are
scaled to unit norm under the stationary weights so that the embedding
reproduces the transition-profile distance

    D_t(i, j)^2 = sum_k [(P^t)_ik - (P^t)_jk]^2 / pi_k
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

__all__ = [
    "KnnGraph",
    "DiffusionOperator",
    "DisconnectedGraphError",
    "build_knn",
    "build_operator",
    "pairwise_diffusion_distances",
    "operator_cache_key",
    "save_operator",
    "load_operator",
]

# Pairs whose |lambda|^t falls below this are dropped from the embedding.
SPECTRAL_FLOOR = 1e-12
MAX_EIGENPAIRS = 100


class DisconnectedGraphError(ValueError):
    """The kNN graph is not connected, so no unique stationary distribution."""


def _as_points(points) -> np.ndarray:
    """Accept a PointCloud or a plain (n, d) array."""
    data = getattr(points, "points", points)
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError("points must be a 2-D array or PointCloud")
    return data


@dataclass(frozen=True)
class KnnGraph:
    """Exact kNN lists: row i holds the indices/distances of its neighbors,
    sorted by distance ascending with index tie-break, self excluded."""

    neighbors: np.ndarray  # (n, k) int32
    distances: np.ndarray  # (n, k) float64

    @property
    def n(self) -> int:
        return self.neighbors.shape[0]

    @property
    def n_neighbors(self) -> int:
        return self.neighbors.shape[1]


def build_knn(points, n_neighbors: int, block_size: int | None = None) -> KnnGraph:
    """Exact Euclidean kNN by blocked brute force.

    Candidate ranking uses the squared-norm expansion for speed; the
    surviving candidates are re-scored with exact squared differences so
    reported distances are not polluted by cancellation (coincident points
    get distance 0 exactly) and ties resolve by ascending index.
    """
    X = _as_points(points)
    n = len(X)
    if not 1 <= n_neighbors < n:
        raise ValueError(f"need 1 <= n_neighbors < n, got {n_neighbors} with n={n}")

    sq = np.einsum("ij,ij->i", X, X)
    n_cand = min(n - 1, n_neighbors + 16)
    if block_size is None:
        # Keep the (block, n_cand, dim) rescoring buffer near 100 MB.
        block_size = max(1, min(512, int(96e6 / (n_cand * X.shape[1] * 8))))
    neighbors = np.empty((n, n_neighbors), dtype=np.int32)
    distances = np.empty((n, n_neighbors), dtype=np.float64)

    for start in range(0, n, block_size):
        stop = min(start + block_size, n)
        block = X[start:stop]
        d2 = sq[start:stop, None] + sq[None, :] - 2.0 * (block @ X.T)
        np.maximum(d2, 0.0, out=d2)
        d2[np.arange(stop - start), np.arange(start, stop)] = np.inf
        # Stable sort: exact ties in d2 (bitwise-equal duplicate rows) keep
        # ascending index order.
        cand = np.argsort(d2, axis=1, kind="stable")[:, :n_cand]
        exact = ((block[:, None, :] - X[cand]) ** 2).sum(axis=2)
        order = np.lexsort((cand, exact), axis=1)[:, :n_neighbors]
        rows = np.arange(stop - start)[:, None]
        neighbors[start:stop] = cand[rows, order]
        distances[start:stop] = np.sqrt(exact[rows, order])

    return KnnGraph(neighbors=neighbors, distances=distances)


@dataclass(frozen=True)
class DiffusionOperator:
    """Truncated spectral representation of P = D^-1 W.

    ``eigenvectors`` holds right eigenvectors of P scaled to unit norm under
    the stationary weights; complex pairs (directed mode) are kept complex
    and enter distances through their modulus.
    """

    eigenvalues: np.ndarray  # (m,) float64 or complex128, |l_1| >= |l_2| >= ...
    eigenvectors: np.ndarray  # (n, m)
    stationary: np.ndarray  # (n,) float64, positive, sums to 1
    degrees: np.ndarray  # (n,) float64 row sums of W
    symmetrize: str

    @property
    def n(self) -> int:
        return self.eigenvectors.shape[0]

    @property
    def n_pairs(self) -> int:
        return self.eigenvalues.shape[0]

    def _retained(self, t: int) -> np.ndarray:
        """Indices of eigenpairs that survive the |lambda|^t floor at time t."""
        weights = np.abs(self.eigenvalues) ** t
        return np.flatnonzero(weights >= SPECTRAL_FLOOR)

    def embed(self, t: int) -> np.ndarray:
        """Coordinates lambda_k^t psi_k(i); Euclidean row distances equal
        diffusion distances.  Complex pairs contribute their real and
        imaginary parts as separate coordinates."""
        if t < 0:
            raise ValueError("diffusion time must be a nonnegative integer")
        keep = self._retained(t)
        coords = self.eigenvectors[:, keep] * self.eigenvalues[keep] ** t
        if np.iscomplexobj(coords):
            coords = np.concatenate([coords.real, coords.imag], axis=1)
        return np.ascontiguousarray(coords)

    def diffusion_distance(self, t: int, i: int, j: int) -> float:
        """Diffusion distance at time t between points i and j."""
        n = self.n
        if not (0 <= i < n and 0 <= j < n):
            raise IndexError(f"point index out of range for n={n}")
        keep = self._retained(t)
        scale = self.eigenvalues[keep] ** t
        ei = self.eigenvectors[i, keep] * scale
        ej = self.eigenvectors[j, keep] * scale
        if np.iscomplexobj(ei):
            ei = np.concatenate([ei.real, ei.imag])
            ej = np.concatenate([ej.real, ej.imag])
        return float(np.sqrt(((ei - ej) ** 2).sum()))


def build_operator(
    graph: KnnGraph,
    symmetrize: str = "mutual-or",
    t: int | None = None,
    max_pairs: int = MAX_EIGENPAIRS,
    dense_threshold: int = 1024,
) -> DiffusionOperator:
    """Assemble W from the kNN lists and eigendecompose P = D^-1 W.

    mutual-or sets W_ij = 1 iff j is a neighbor of i or i of j; the
    resulting P is reversible with stationary distribution deg/sum(deg), and
    the eigenproblem is solved through the symmetric conjugation
    D^-1/2 W D^-1/2.  directed keeps the asymmetric W (stationary
    distribution by power iteration, dense eigensolve; intended for
    fidelity experiments at moderate n).

    Eigenpairs are sorted by |lambda| descending and truncated to
    ``max_pairs``; when ``t`` is given, pairs with |lambda|^t below the
    spectral floor are dropped as well.
    """
    if symmetrize not in ("mutual-or", "directed"):
        raise ValueError(f"unknown symmetrization {symmetrize!r}")
    n, k = graph.neighbors.shape
    rows = np.repeat(np.arange(n, dtype=np.int64), k)
    cols = graph.neighbors.ravel().astype(np.int64)
    W = sp.csr_matrix((np.ones(n * k), (rows, cols)), shape=(n, n))
    if symmetrize == "mutual-or":
        W = W.maximum(W.T)

    n_comp, _ = connected_components(
        W, directed=(symmetrize == "directed"), connection="strong"
    )
    if n_comp != 1:
        raise DisconnectedGraphError(
            f"graph has {n_comp} connected components; increase the neighbor count"
        )

    degrees = np.asarray(W.sum(axis=1)).ravel()

    if symmetrize == "mutual-or":
        stationary = degrees / degrees.sum()
        inv_sqrt_d = 1.0 / np.sqrt(degrees)
        S = sp.diags(inv_sqrt_d) @ W @ sp.diags(inv_sqrt_d)
        cap = min(n, max_pairs)
        if n <= dense_threshold or cap >= n - 1:
            evals, evecs = np.linalg.eigh(S.toarray())
        else:
            evals, evecs = sp.linalg.eigsh(S, k=cap, which="LM")
        order = np.lexsort((-evals, -np.abs(evals)))[:cap]
        evals = evals[order]
        evecs = evecs[:, order]
        # Map to right eigenvectors of P with unit stationary-weighted norm:
        # psi_k(i) = v_k(i) / sqrt(pi_i).
        psi = evecs / np.sqrt(stationary)[:, None]
    else:
        P = (W.toarray().astype(np.float64)) / degrees[:, None]
        stationary = _power_iteration(P)
        evals, psi = np.linalg.eig(P)
        order = np.lexsort((-evals.imag, -evals.real, -np.abs(evals)))
        order = order[: min(n, max_pairs)]
        evals = evals[order]
        psi = psi[:, order]
        norms = np.sqrt((stationary[:, None] * np.abs(psi) ** 2).sum(axis=0))
        psi = psi / norms

    if t is not None:
        if t < 0:
            raise ValueError("diffusion time must be a nonnegative integer")
        keep = np.abs(evals) ** t >= SPECTRAL_FLOOR
        evals, psi = evals[keep], psi[:, keep]

    psi = _fix_signs(psi)
    return DiffusionOperator(
        eigenvalues=evals,
        eigenvectors=np.ascontiguousarray(psi),
        stationary=stationary,
        degrees=degrees,
        symmetrize=symmetrize,
    )


def _fix_signs(psi: np.ndarray) -> np.ndarray:
    """Deterministic sign/phase convention: the largest-modulus component of
    each eigenvector is made real and positive."""
    psi = psi.copy()
    for k in range(psi.shape[1]):
        pivot = psi[np.argmax(np.abs(psi[:, k])), k]
        if np.abs(pivot) > 0:
            psi[:, k] *= np.conj(pivot) / np.abs(pivot)
    if not np.iscomplexobj(psi):
        return psi
    if np.abs(psi.imag).max() == 0.0:
        return psi.real.copy()
    return psi


def _power_iteration(P: np.ndarray, tol: float = 1e-12, max_iter: int = 200_000):
    """Stationary distribution of a row-stochastic matrix.

    Iterates the lazy chain (P + I)/2, which shares the fixed point and is
    aperiodic, then verifies the residual against P itself.
    """
    n = P.shape[0]
    pi = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        nxt = 0.5 * (pi @ P + pi)
        nxt /= nxt.sum()
        if np.abs(nxt - pi).max() <= 0.25 * tol:
            pi = nxt
            break
        pi = nxt
    else:
        raise RuntimeError("stationary distribution power iteration did not converge")
    residual = np.abs(pi @ P - pi).max()
    if residual > tol:
        raise RuntimeError(f"stationary residual {residual:.3e} exceeds {tol:.0e}")
    return pi


def pairwise_diffusion_distances(
    op: DiffusionOperator,
    t: int,
    block_size: int | None = None,
    max_bytes: int | None = 2_000_000_000,
) -> np.ndarray:
    """Full (n, n) diffusion-distance matrix, computed blockwise from the
    embedding with explicit differences (bit-identical to the pairwise
    ``diffusion_distance`` entries)."""
    E = op.embed(t)
    n = len(E)
    if max_bytes is not None and n * n * 8 > max_bytes:
        raise MemoryError(
            f"distance matrix for n={n} exceeds {max_bytes} bytes; "
            "compute rows on the fly instead"
        )
    if block_size is None:
        # Keep the (block, n, m) difference buffer near 100 MB.
        block_size = max(1, min(256, int(96e6 / (max(1, n * E.shape[1]) * 8))))
    out = np.empty((n, n), dtype=np.float64)
    for start in range(0, n, block_size):
        stop = min(start + block_size, n)
        diff = E[start:stop, None, :] - E[None, :, :]
        np.sqrt((diff**2).sum(axis=2), out=out[start:stop])
    return out


# ---------------------------------------------------------------------------
# Optional on-disk cache of the eigendecomposition.


def operator_cache_key(points, n_neighbors: int, symmetrize: str,
                       t: int | None = None, max_pairs: int = MAX_EIGENPAIRS) -> str:
    X = _as_points(points)
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(X).tobytes())
    digest.update(f"|{n_neighbors}|{symmetrize}|{t}|{max_pairs}".encode())
    return digest.hexdigest()


def save_operator(path: str | Path, op: DiffusionOperator) -> None:
    np.savez_compressed(
        Path(path),
        eigenvalues=op.eigenvalues,
        eigenvectors=op.eigenvectors,
        stationary=op.stationary,
        degrees=op.degrees,
        symmetrize=np.array(op.symmetrize),
    )


def load_operator(path: str | Path) -> DiffusionOperator:
    with np.load(Path(path), allow_pickle=False) as bundle:
        return DiffusionOperator(
            eigenvalues=bundle["eigenvalues"],
            eigenvectors=bundle["eigenvectors"],
            stationary=bundle["stationary"],
            degrees=bundle["degrees"],
            symmetrize=str(bundle["symmetrize"]),
        )
