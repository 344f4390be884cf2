"""Leapfrog distances.

The leapfrog distance between two data points is the cost of the cheapest
path between them on the complete graph over all points, where each edge
costs the *squared* Euclidean distance between its endpoints.  Squaring
makes many short hops through dense regions cheaper than one long hop, so
the metric concentrates inside dense clusters and stays large across gaps.

Exact distances are computed with a dense Dijkstra sweep per source: the
graph is complete, so a linear scan for the next settled vertex beats a
heap.  Edge costs are formed on the fly from the coordinates; the full
cost matrix is never materialised.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import InputError

_BINARY_MAGIC = b"LFD1"

try:  # pragma: no cover - exercised implicitly everywhere
    if os.environ.get("LEAPSON_NO_NUMBA"):
        raise ImportError("numba disabled via LEAPSON_NO_NUMBA")
    import numba
    from numba import njit, prange

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False


def as_point_array(points) -> np.ndarray:
    """Validate and convert input to an (n, d) float64 coordinate array.

    Accepts anything array-like; 1-D input is treated as n points in R^1.
    Raises InputError for empty input or non-finite coordinates.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise InputError(f"points must be a 2-d array, got shape {pts.shape}")
    if pts.shape[0] < 1 or pts.shape[1] < 1:
        raise InputError(f"need at least one point and one dimension, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise InputError("points contain non-finite coordinates")
    return np.ascontiguousarray(pts)


# ---------------------------------------------------------------------------
# Dijkstra kernels.  The numba and numpy variants implement the identical
# algorithm; the numpy one exists as a fallback and as a cross-check target.
# ---------------------------------------------------------------------------

def _lf_source_numpy(pts: np.ndarray, source: int) -> np.ndarray:
    n = pts.shape[0]
    dist = np.full(n, np.inf)
    dist[source] = 0.0
    done = np.zeros(n, dtype=bool)
    scan = dist.copy()
    for _ in range(n):
        u = int(np.argmin(scan))
        if scan[u] == np.inf:
            break
        done[u] = True
        scan[u] = np.inf
        diff = pts - pts[u]
        cost = np.einsum("ij,ij->i", diff, diff)
        np.minimum(dist, dist[u] + cost, out=dist)
        # settled vertices already hold their final value; keep them out of
        # the scan array only
        scan = np.where(done, np.inf, dist)
    return dist


if _HAVE_NUMBA:

    @njit(cache=True)
    def _lf_source_kernel(pts, source, dist, done, cbuf):  # pragma: no cover - compiled
        n, d = pts.shape
        for j in range(n):
            dist[j] = np.inf
            done[j] = False
        dist[source] = 0.0
        for _ in range(n):
            u = -1
            best = np.inf
            for j in range(n):
                if not done[j] and dist[j] < best:
                    best = dist[j]
                    u = j
            if u < 0:
                break
            done[u] = True
            du = dist[u]
            for j in range(n):
                c = 0.0
                for k in range(d):
                    t = pts[u, k] - pts[j, k]
                    c += t * t
                cbuf[j] = c
            # relaxing settled vertices is a no-op: du >= their final value
            for j in range(n):
                nd = du + cbuf[j]
                if nd < dist[j]:
                    dist[j] = nd

    @njit(parallel=True, cache=True)
    def _lf_all_kernel(pts):  # pragma: no cover - compiled
        n = pts.shape[0]
        out = np.empty((n, n))
        for s in prange(n):
            dist = np.empty(n)
            done = np.empty(n, numba.boolean)
            cbuf = np.empty(n)
            _lf_source_kernel(pts, s, dist, done, cbuf)
            out[s, :] = dist
        return out


def lf_from_source(points, source: int) -> np.ndarray:
    """Leapfrog distances from one source point to all points.

    Returns a length-n vector whose entry j is LF(points[source], points[j]);
    the source entry is exactly 0.
    """
    pts = as_point_array(points)
    n = pts.shape[0]
    if not 0 <= source < n:
        raise IndexError(f"source index {source} out of range for {n} points")
    if _HAVE_NUMBA:
        dist = np.empty(n)
        done = np.empty(n, dtype=bool)
        cbuf = np.empty(n)
        _lf_source_kernel(pts, source, dist, done, cbuf)
        return dist
    return _lf_source_numpy(pts, source)


def lf_all_pairs(points) -> np.ndarray:
    """All-pairs leapfrog distance matrix.

    Runs one dense Dijkstra sweep per source.  Sources are independent, so
    the sweeps may execute on multiple threads; each writes a disjoint row
    and the result does not depend on the thread count.  The matrix is
    symmetrised entrywise with `min`, which resolves last-ulp disagreements
    between the (i,j) and (j,i) sweeps in favour of the cheaper path sum.
    """
    pts = as_point_array(points)
    n = pts.shape[0]
    if _HAVE_NUMBA:
        out = _lf_all_kernel(pts)
    else:
        out = np.empty((n, n))
        for s in range(n):
            out[s, :] = _lf_source_numpy(pts, s)
    out = np.minimum(out, out.T)
    np.fill_diagonal(out, 0.0)
    return out


def lf_1d_closed_form(sorted_points) -> np.ndarray:
    """Leapfrog distance matrix for strictly sorted 1-D data.

    On the line the shortest path between two points visits every sample
    between them, so LF(a_i, a_j) is just the sum of squared consecutive
    gaps, computed here from one prefix sum.
    """
    x = np.asarray(sorted_points, dtype=np.float64).ravel()
    if x.size < 1:
        raise InputError("need at least one point")
    if not np.all(np.isfinite(x)):
        raise InputError("points contain non-finite coordinates")
    gaps = np.diff(x)
    if np.any(gaps <= 0):
        raise InputError("input must be strictly sorted ascending")
    prefix = np.concatenate([[0.0], np.cumsum(gaps * gaps)])
    out = np.abs(prefix[:, None] - prefix[None, :])
    np.fill_diagonal(out, 0.0)
    return out


def validate_distance_matrix(D, atol: float = 0.0) -> np.ndarray:
    """Check the distance-matrix contract: square, finite, nonnegative,
    symmetric, and hollow.  Returns the validated float64 array."""
    M = np.asarray(D, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InputError(f"distance matrix must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InputError("distance matrix contains non-finite entries")
    if np.any(M < 0):
        raise InputError("distance matrix contains negative entries")
    if not np.allclose(M, M.T, rtol=0.0, atol=atol):
        raise InputError("distance matrix is not symmetric")
    if np.any(np.abs(np.diag(M)) > atol):
        raise InputError("distance matrix has a nonzero diagonal")
    return M


# ---------------------------------------------------------------------------
# Serialisation
# ---------------------------------------------------------------------------

def write_distance_csv(D, path) -> None:
    """Write the full symmetric matrix, one row per line, %.17g entries."""
    M = np.asarray(D, dtype=np.float64)
    with open(path, "w") as fh:
        for row in M:
            fh.write(",".join(f"{v:.17g}" for v in row))
            fh.write("\n")


def read_distance_csv(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(tok) for tok in line.split(",")])
            except ValueError as exc:
                raise InputError(f"{path}: line {lineno}: {exc}") from exc
    if not rows:
        raise InputError(f"{path}: empty distance matrix")
    if len({len(r) for r in rows}) != 1:
        raise InputError(f"{path}: ragged rows")
    return validate_distance_matrix(np.asarray(rows), atol=0.0)


def write_distance_binary(D, path) -> None:
    """Binary layout: magic 'LFD1', u64 n, then n*n little-endian float64."""
    M = np.ascontiguousarray(D, dtype="<f8")
    n = M.shape[0]
    with open(path, "wb") as fh:
        fh.write(_BINARY_MAGIC)
        fh.write(np.uint64(n).astype("<u8").tobytes())
        fh.write(M.tobytes())


def read_distance_binary(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _BINARY_MAGIC:
            raise InputError(f"{path}: bad magic {magic!r}, expected {_BINARY_MAGIC!r}")
        n = int(np.frombuffer(fh.read(8), dtype="<u8")[0])
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n * n:
        raise InputError(f"{path}: expected {n * n} values, found {data.size}")
    return data.reshape(n, n).astype(np.float64)
