"""Linear spectral unmixing: material count, endmembers, abundances, purity.

The material count m comes from HySime (noise estimation by per-band
multiple regression, then signal-subspace selection by mean-squared-error
minimization).  Endmembers come from VCA (iterative orthogonal-subspace
projection onto random directions, picking the pixel with the largest
projection), so every endmember is an observed pixel spectrum.  Abundances
solve a nonnegative least-squares problem per pixel with an active-set
iteration on the precomputed Gram matrix.  Purity is the largest entry of
the (row-normalized) abundance row.

All stochasticity flows from explicit seeds; nothing touches global RNG
state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "EndmemberSet",
    "hysime",
    "estimate_noise",
    "vca",
    "nnls_gram",
    "abundances",
    "purity",
    "averaged_purity",
]


def _as_points(points) -> np.ndarray:
    data = getattr(points, "points", points)
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError("points must be a 2-D array or PointCloud")
    return data


@dataclass(frozen=True)
class EndmemberSet:
    """Endmember spectra, one material per row; ``indices`` are the source
    pixels the spectra were taken from."""

    U: np.ndarray  # (m, bands) float64
    indices: np.ndarray  # (m,) int64

    @property
    def m(self) -> int:
        return self.U.shape[0]


# ---------------------------------------------------------------------------
# HySime


def estimate_noise(X: np.ndarray) -> np.ndarray:
    """Per-pixel noise estimate by regressing each band on all others.

    Uses the shared inverse of the band correlation matrix so the full set
    of leave-one-band-out regressions costs one matrix inversion.
    """
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if d < 2:
        raise ValueError("noise estimation needs at least two bands")
    Y = X.T  # (d, n)
    R = Y @ Y.T
    ridge = 1e-6 * np.trace(R) / d
    Ri = np.linalg.inv(R + ridge * np.eye(d))
    noise = np.empty_like(Y)
    for i in range(d):
        # Inverse of R with band i removed, via the partitioned-inverse
        # identity on the shared Ri.
        XX = Ri - np.outer(Ri[:, i], Ri[i, :]) / Ri[i, i]
        target = R[:, i].copy()
        target[i] = 0.0
        beta = XX @ target
        beta[i] = 0.0
        noise[i] = Y[i] - beta @ Y
    return noise.T


def hysime(points) -> int:
    """Estimate the number of materials from the signal-subspace dimension.

    Chooses, over eigenvectors of the signal correlation matrix, the subset
    whose inclusion decreases the projection mean-squared error: directions
    with signal power exceeding twice the projected noise power.
    """
    X = _as_points(points)
    n, d = X.shape
    if not np.any(X):
        raise ValueError("cannot estimate materials from all-zero data")
    noise = estimate_noise(X)
    signal = X - noise

    Ry = (X.T @ X) / n
    Rn = np.diag(np.diag((noise.T @ noise) / n))
    Rx = (signal.T @ signal) / n

    evals, E = np.linalg.eigh(Rx)
    E = E[:, np.argsort(evals)[::-1]]

    Rn = Rn + (np.trace(Rx) / d / 1e5) * np.eye(d)
    p_signal = np.einsum("ij,jk,ki->i", E.T, Ry, E)
    p_noise = np.einsum("ij,jk,ki->i", E.T, Rn, E)
    return max(1, int(np.count_nonzero(p_signal > 2.0 * p_noise)))


# ---------------------------------------------------------------------------
# VCA


def _numerical_rank(sing_values: np.ndarray, n: int, d: int) -> int:
    if sing_values.size == 0 or sing_values[0] <= 0:
        return 0
    tol = sing_values[0] * max(n, d) * np.finfo(np.float64).eps
    return int(np.count_nonzero(sing_values > tol))


def vca(points, m: int, seed: int) -> EndmemberSet:
    """Vertex component analysis with the SNR-dependent projection choice.

    High-SNR data is projectively projected onto the m leading directions of
    the uncentered correlation matrix; low-SNR data is projected onto the
    m-1 leading directions of the centered one and lifted with a constant
    coordinate.  Each iteration draws a random direction orthogonal to the
    span of the selected vertices and picks the pixel maximizing the
    projection.  Returned spectra are rows of the input data.
    """
    X = _as_points(points)
    n, d = X.shape
    if not 1 <= m <= min(n, d):
        raise ValueError(f"need 1 <= m <= min(n, bands), got m={m}")
    rng = np.random.default_rng(seed)
    Y = X.T  # (d, n)

    if m == 1:
        corr = (Y @ Y.T) / n
        evals_u, evecs_u = np.linalg.eigh(corr)
        if evals_u.max() <= 0.0:
            raise ValueError("data rank is below m=1")
        lead = evecs_u[:, int(np.argmax(evals_u))]
        idx = np.array([int(np.argmax(np.abs(lead @ Y)))], dtype=np.int64)
        return EndmemberSet(U=X[idx].copy(), indices=idx)

    mean = Y.mean(axis=1, keepdims=True)
    Yc = Y - mean
    corr_c = (Yc @ Yc.T) / n
    evals_c, evecs_c = np.linalg.eigh(corr_c)
    order = np.argsort(evals_c)[::-1]
    evals_c, evecs_c = evals_c[order], evecs_c[:, order]
    if _numerical_rank(np.sqrt(np.maximum(evals_c, 0.0)), n, d) + 1 < m:
        raise ValueError(f"data rank is below m={m}")

    # SNR estimate from the energy captured by the m leading centered
    # directions.
    proj = evecs_c[:, :m].T @ Yc
    p_total = float((Y**2).sum()) / n
    p_proj = float((proj**2).sum()) / n + float((mean**2).sum())
    denom = p_total - p_proj
    if denom <= 0:
        snr = np.inf
    else:
        snr = 10.0 * np.log10(max(p_proj - (m / d) * p_total, 0.0) / denom)
    snr_threshold = 15.0 + 10.0 * np.log10(m)

    if snr > snr_threshold:
        # Projective projection onto the uncentered subspace.
        corr = (Y @ Y.T) / n
        evals_u, evecs_u = np.linalg.eigh(corr)
        basis = evecs_u[:, np.argsort(evals_u)[::-1][:m]]
        x = basis.T @ Y
        u = x.mean(axis=1)
        denoms = x.T @ u
        if np.any(denoms == 0.0):
            raise ValueError("projective projection hit a zero denominator")
        simplex = x / denoms
    else:
        basis = evecs_c[:, : m - 1]
        x = basis.T @ Yc
        c = np.sqrt((x**2).sum(axis=0).max())
        simplex = np.vstack([x, np.full((1, n), c)])

    indices = np.zeros(m, dtype=np.int64)
    A = np.zeros((m, m))
    A[-1, 0] = 1.0
    for i in range(m):
        w = rng.standard_normal((m, 1))
        f = w - A @ (np.linalg.pinv(A) @ w)
        f = f / np.sqrt((f**2).sum())
        projections = (f.T @ simplex).ravel()
        k = int(np.argmax(np.abs(projections)))
        indices[i] = k
        A[:, i] = simplex[:, k]

    U = X[indices].copy()
    if len(np.unique(U, axis=0)) != m:
        raise ValueError("selected endmembers are not pairwise distinct; "
                         "data rank is likely below m")
    return EndmemberSet(U=U, indices=indices)


# ---------------------------------------------------------------------------
# Nonnegative least squares


def nnls_gram(G: np.ndarray, f: np.ndarray, tol: float = 1e-10,
              max_iter: int | None = None) -> np.ndarray:
    """Solve min_{a >= 0} 1/2 a'Ga - f'a by active-set iteration.

    G is the endmember Gram matrix U U' and f = U x, so this minimizes
    ||x - U'a|| over a >= 0 without touching the full-band data again.
    """
    m = len(f)
    if max_iter is None:
        max_iter = 3 * m
    a = np.zeros(m)
    passive = np.zeros(m, dtype=bool)
    grad = f.copy()  # f - G a at a = 0
    iterations = 0
    while True:
        candidates = np.flatnonzero(~passive)
        if candidates.size == 0 or grad[candidates].max() <= tol:
            return a
        iterations += 1
        if iterations > max_iter:
            raise RuntimeError(f"NNLS failed to converge in {max_iter} iterations")
        passive[candidates[np.argmax(grad[candidates])]] = True
        while True:
            free = np.flatnonzero(passive)
            trial = np.zeros(m)
            trial[free] = np.linalg.solve(G[np.ix_(free, free)], f[free])
            if trial[free].min() > 0.0:
                a = trial
                break
            blocking = free[trial[free] <= 0.0]
            steps = a[blocking] / (a[blocking] - trial[blocking])
            a = a + steps.min() * (trial - a)
            a[a < 0.0] = 0.0
            passive &= a > 0.0
        grad = f - G @ a
    # unreachable


def abundances(points, endmembers: EndmemberSet) -> np.ndarray:
    """Nonnegative abundance rows: row i solves min_{a>=0} ||x_i - U'a||."""
    X = _as_points(points)
    U = endmembers.U
    if U.shape[1] != X.shape[1]:
        raise ValueError("endmember and data band counts differ")
    if np.linalg.matrix_rank(U) < U.shape[0]:
        raise ValueError("endmember matrix is rank deficient")
    G = U @ U.T
    F = X @ U.T
    # Unconstrained solve first: rows that land nonnegative are already
    # optimal, the active-set iteration only runs on the violators.
    A = np.linalg.solve(G, F.T).T
    for i in np.flatnonzero(A.min(axis=1) < 0.0):
        A[i] = nnls_gram(G, F[i])
    return A


def purity(A: np.ndarray, normalize: bool = True) -> np.ndarray:
    """Largest abundance per pixel after sum-to-one row normalization.

    With ``normalize=False`` (sensitivity checks) the raw row maximum is
    returned instead and may exceed 1.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.min() < 0:
        raise ValueError("abundances must be nonnegative")
    if normalize:
        sums = A.sum(axis=1)
        zero = np.flatnonzero(sums == 0.0)
        if zero.size:
            raise ValueError(f"abundance row {zero[0]} is all zero")
        return A.max(axis=1) / sums
    eta = A.max(axis=1)
    if np.any(eta == 0.0):
        raise ValueError(f"abundance row {int(np.argmin(eta))} is all zero")
    return eta


def averaged_purity(points, m: int, runs: int, base_seed: int,
                    normalize: bool = True) -> np.ndarray:
    """Mean purity over ``runs`` endmember extractions with seeds
    base_seed .. base_seed + runs - 1, accumulated in seed order."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    X = _as_points(points)
    total = np.zeros(len(X))
    for r in range(runs):
        ends = vca(X, m, seed=base_seed + r)
        total += purity(abundances(X, ends), normalize=normalize)
    return total / runs
