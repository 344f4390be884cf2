"""Sum-of-norms clustering.

Solves

    min over x_1..x_n   1/2 sum_i ||x_i - a_i||^2  +  lambda * sum_{i<j} ||x_i - x_j||

with uniform pair weights.  Optimal centroids that coincide define the
clusters; lambda trades data fidelity against fusion, and the model merges
clusters monotonically as lambda grows.

The solver is ADMM on the splitting z_ij = x_i - x_j over all pairs.  Each
iteration shrinks the pair differences (a group soft-threshold at
lambda/rho), solves the x update in closed form via Sherman-Morrison (the
pair-difference operator on the complete graph has Gram matrix
n*I - 1*1^T), and takes a dual ascent step.  The shrink step runs first so
that every recorded iterate x^k is the exact minimiser of the augmented
Lagrangian given the freshest duals; in practice this makes the recorded
objective non-increasing.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InputError

try:  # pragma: no cover
    if os.environ.get("LEAPSON_NO_NUMBA"):
        raise ImportError("numba disabled via LEAPSON_NO_NUMBA")
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False


@dataclass(frozen=True)
class SonParams:
    """Solver configuration; `lam` is the fusion strength lambda >= 0."""

    lam: float
    primal_tol: float = 1e-6
    dual_tol: float = 1e-6
    max_iters: int = 10000
    admm_rho: float = 1.0

    def __post_init__(self):
        if self.lam < 0 or not np.isfinite(self.lam):
            raise InputError(f"lambda must be finite and >= 0, got {self.lam}")
        if self.primal_tol <= 0 or self.dual_tol <= 0:
            raise InputError("tolerances must be positive")
        if self.max_iters < 1:
            raise InputError("max_iters must be >= 1")
        if self.admm_rho <= 0:
            raise InputError("admm_rho must be positive")

    def with_lambda(self, lam: float) -> "SonParams":
        return replace(self, lam=lam)


@dataclass
class SonSolution:
    centroids: np.ndarray  # (n, d)
    lam: float
    iterations: int
    converged: bool
    primal_residual: float
    dual_residual: float
    objective: float
    objective_trace: np.ndarray = field(repr=False, default=None)


@dataclass
class ClusterAssignment:
    """Labels in 0..n_clusters-1, numbered by first occurrence."""

    labels: np.ndarray
    n_clusters: int

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)


def _as_data(data) -> np.ndarray:
    """Accept an (n, d) array, a 1-d array, or anything with `.points`."""
    pts = getattr(data, "points", data)
    pts = np.asarray(pts, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] < 1:
        raise InputError(f"data must be an (n, d) array, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise InputError("data contains non-finite values")
    return np.ascontiguousarray(pts)


def data_diameter(data) -> float:
    """Largest pairwise Euclidean distance in the data."""
    pts = _as_data(data)
    sq = np.einsum("ij,ij->i", pts, pts)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (pts @ pts.T)
    return float(np.sqrt(max(d2.max(), 0.0)))


def default_merge_tol(data) -> float:
    """Centroid merge tolerance: 1e-3 times the data diameter."""
    return 1e-3 * data_diameter(data)


# ---------------------------------------------------------------------------
# ADMM core (numba kernel with an equivalent numpy fallback)
# ---------------------------------------------------------------------------

if _HAVE_NUMBA:

    @njit(cache=True)
    def _admm_kernel(A, I, J, lam, rho, ptol, dtol, max_iters, X, U, obj_out):  # pragma: no cover
        n, d = A.shape
        m = I.shape[0]
        c = 1.0 + rho * n
        kappa = lam / rho
        Z = np.zeros((m, d))
        Zprev = np.zeros((m, d))
        adj = np.zeros((n, d))
        S = np.zeros(d)
        pres = np.inf
        dres = np.inf
        it = 0
        for it in range(1, max_iters + 1):
            # shrink pair differences at the current duals
            for l in range(m):
                wsq = 0.0
                for k in range(d):
                    w = X[I[l], k] - X[J[l], k] + U[l, k]
                    Z[l, k] = w
                    wsq += w * w
                wn = np.sqrt(wsq)
                scale = 0.0
                if wn > 0.0 and wn > kappa:
                    scale = 1.0 - kappa / wn
                for k in range(d):
                    Z[l, k] *= scale
            # closed-form x update
            for i in range(n):
                for k in range(d):
                    adj[i, k] = 0.0
            for l in range(m):
                for k in range(d):
                    v = Z[l, k] - U[l, k]
                    adj[I[l], k] += v
                    adj[J[l], k] -= v
            for k in range(d):
                S[k] = 0.0
            for i in range(n):
                for k in range(d):
                    y = A[i, k] + rho * adj[i, k]
                    X[i, k] = y
                    S[k] += y
            for i in range(n):
                for k in range(d):
                    X[i, k] = (X[i, k] + rho * S[k]) / c
            # dual ascent, residuals, objective
            pres_sq = 0.0
            pen = 0.0
            dres_sq = 0.0
            for l in range(m):
                rsq = 0.0
                dxsq = 0.0
                zdsq = 0.0
                for k in range(d):
                    dx = X[I[l], k] - X[J[l], k]
                    r = dx - Z[l, k]
                    U[l, k] += r
                    rsq += r * r
                    dxsq += dx * dx
                    zd = Z[l, k] - Zprev[l, k]
                    zdsq += zd * zd
                    Zprev[l, k] = Z[l, k]
                if rsq > pres_sq:
                    pres_sq = rsq
                if zdsq > dres_sq:
                    dres_sq = zdsq
                pen += np.sqrt(dxsq)
            fit = 0.0
            for i in range(n):
                for k in range(d):
                    t = X[i, k] - A[i, k]
                    fit += t * t
            obj_out[it - 1] = 0.5 * fit + lam * pen
            pres = np.sqrt(pres_sq)
            dres = rho * np.sqrt(dres_sq)
            if it > 1 and pres <= ptol and dres <= dtol:
                break
        return it, pres, dres


def _admm_numpy(A, I, J, lam, rho, ptol, dtol, max_iters, X, U, obj_out):
    n, d = A.shape
    c = 1.0 + rho * n
    kappa = lam / rho
    Zprev = np.zeros((I.size, d))
    pres = dres = np.inf
    it = 0
    for it in range(1, max_iters + 1):
        W = X[I] - X[J] + U
        wn = np.sqrt(np.einsum("ij,ij->i", W, W))
        scale = np.maximum(0.0, 1.0 - kappa / np.maximum(wn, np.finfo(float).tiny))
        Z = scale[:, None] * W
        V = Z - U
        Y = A.copy()
        for k in range(d):
            Y[:, k] += rho * (
                np.bincount(I, weights=V[:, k], minlength=n)
                - np.bincount(J, weights=V[:, k], minlength=n)
            )
        X[:] = (Y + rho * Y.sum(axis=0)) / c
        DX = X[I] - X[J]
        R = DX - Z
        U += R
        pres = float(np.sqrt(np.einsum("ij,ij->i", R, R).max()))
        dres = rho * float(np.sqrt(np.einsum("ij,ij->i", Z - Zprev, Z - Zprev).max()))
        Zprev = Z
        dxn = np.sqrt(np.einsum("ij,ij->i", DX, DX))
        obj_out[it - 1] = 0.5 * float(np.sum((X - A) ** 2)) + lam * float(dxn.sum())
        if it > 1 and pres <= ptol and dres <= dtol:
            break
    return it, pres, dres


def son_objective(data, centroids, lam: float) -> float:
    """Value of the sum-of-norms objective at the given centroids."""
    A = _as_data(data)
    X = _as_data(centroids)
    I, J = np.triu_indices(A.shape[0], 1)
    pen = float(np.sqrt(((X[I] - X[J]) ** 2).sum(axis=1)).sum()) if I.size else 0.0
    return 0.5 * float(np.sum((X - A) ** 2)) + lam * pen


def solve_son(data, params: SonParams, init=None) -> SonSolution:
    """Solve the clustering problem for one lambda.

    init, when given, is an (X0, U0) pair used to warm-start the iteration
    (U0 holds the scaled duals, one row per point pair).  The solver is
    deterministic for fixed inputs.  If max_iters is reached first, the
    best iterate is returned with converged=False; this is never silent.
    """
    A = _as_data(data)
    n, d = A.shape

    if n == 1 or params.lam == 0.0:
        X = A.copy()
        return SonSolution(
            centroids=X,
            lam=params.lam,
            iterations=0,
            converged=True,
            primal_residual=0.0,
            dual_residual=0.0,
            objective=son_objective(A, X, params.lam),
            objective_trace=np.empty(0),
        )

    I, J = np.triu_indices(n, 1)
    if init is None:
        X = A.copy()
        U = np.zeros((I.size, d))
    else:
        X0, U0 = init
        X = np.array(X0, dtype=np.float64, copy=True)
        U = np.array(U0, dtype=np.float64, copy=True)
        if X.shape != (n, d) or U.shape != (I.size, d):
            raise InputError("warm-start arrays have wrong shape")

    obj = np.empty(params.max_iters)
    rho = params.admm_rho
    core = _admm_kernel if _HAVE_NUMBA else _admm_numpy
    iters, pres, dres = core(
        A, I, J, params.lam, rho,
        params.primal_tol, params.dual_tol, params.max_iters, X, U, obj,
    )
    converged = pres <= params.primal_tol and dres <= params.dual_tol
    return SonSolution(
        centroids=X,
        lam=params.lam,
        iterations=int(iters),
        converged=bool(converged),
        primal_residual=float(pres),
        dual_residual=float(dres),
        objective=float(obj[iters - 1]),
        objective_trace=obj[:iters].copy(),
    )


def extract_clusters(solution, merge_tol: float) -> ClusterAssignment:
    """Connected components of the centroid graph with edges ||xi - xj|| <= merge_tol.

    `solution` may be a SonSolution or a raw centroid array.  Labels are
    numbered by first occurrence in point order.
    """
    if merge_tol <= 0:
        raise InputError(f"merge_tol must be positive, got {merge_tol}")
    X = solution.centroids if isinstance(solution, SonSolution) else np.asarray(solution, float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    sq = np.einsum("ij,ij->i", X, X)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    adj = d2 <= merge_tol * merge_tol
    labels = np.full(n, -1, dtype=np.int64)
    k = 0
    for i in range(n):
        if labels[i] >= 0:
            continue
        stack = [i]
        labels[i] = k
        while stack:
            u = stack.pop()
            nbrs = np.where(adj[u] & (labels < 0))[0]
            labels[nbrs] = k
            stack.extend(nbrs.tolist())
        k += 1
    return ClusterAssignment(labels=labels, n_clusters=k)


def lambda_max(data, params: SonParams | None = None, merge_tol: float | None = None,
               max_probes: int = 50) -> float:
    """Smallest lambda (to 1% relative width) that fuses everything.

    Bisects on the cluster count: the returned value yields a single
    cluster while half of it still yields more than one.  The bracket
    starts at diameter/n, which provably fuses all points.
    """
    A = _as_data(data)
    n = A.shape[0]
    diam = data_diameter(A)
    if diam == 0.0 or n < 2:
        return 0.0
    if merge_tol is None:
        merge_tol = 1e-3 * diam
    base = params if params is not None else SonParams(lam=0.0)

    probes = 0

    def n_clusters(lam: float) -> int:
        nonlocal probes
        probes += 1
        sol = solve_son(A, base.with_lambda(lam))
        return extract_clusters(sol, merge_tol).n_clusters

    hi = diam / n
    while n_clusters(hi) > 1 and probes < max_probes:
        hi *= 2.0
    lo = 0.0
    while hi - lo > 0.01 * hi and probes < max_probes:
        mid = 0.5 * (lo + hi)
        if n_clusters(mid) == 1:
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# Lambda grid search
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    """A lambda grid: geometric or linear range, or explicit values."""

    kind: str
    lo: float = 0.0
    hi: float = 0.0
    count: int = 0
    step: float = 0.0
    explicit: tuple = ()

    @staticmethod
    def geometric(lo: float, hi: float, count: int) -> "GridSpec":
        if not (0 < lo <= hi) or count < 1:
            raise InputError("geometric grid needs 0 < lo <= hi and count >= 1")
        return GridSpec(kind="geometric", lo=lo, hi=hi, count=count)

    @staticmethod
    def linear(lo: float, hi: float, step: float) -> "GridSpec":
        if step <= 0:
            raise InputError(f"grid step must be positive, got {step}")
        if hi < lo:
            raise InputError("linear grid needs hi >= lo")
        return GridSpec(kind="linear", lo=lo, hi=hi, step=step)

    @staticmethod
    def explicit_values(values) -> "GridSpec":
        vals = tuple(float(v) for v in values)
        if not vals:
            raise InputError("explicit grid is empty")
        return GridSpec(kind="explicit", explicit=vals)

    def lambdas(self) -> np.ndarray:
        if self.kind == "geometric":
            return np.geomspace(self.lo, self.hi, self.count)
        if self.kind == "linear":
            count = int(np.floor((self.hi - self.lo) / self.step + 1e-12)) + 1
            return self.lo + self.step * np.arange(count)
        if self.kind == "explicit":
            return np.asarray(self.explicit, dtype=np.float64)
        raise InputError(f"unknown grid kind {self.kind!r}")


@dataclass
class GridSearchResult:
    best_lambda: float
    best_rand: float
    lambdas: np.ndarray
    rand_values: np.ndarray
    cluster_counts: np.ndarray


def lambda_grid_search(data, truth, grid: GridSpec, params: SonParams | None = None,
                       merge_tol: float | None = None, warm_start: bool = True,
                       rho_for=None) -> GridSearchResult:
    """Scan lambda over a grid, scoring each clustering by Rand index.

    Returns the lambda with the highest Rand index against `truth` (ties go
    to the smallest lambda).  Consecutive solves are warm-started from the
    previous solution, which does not change any optimum, only the path to
    it.  `rho_for`, if given, maps lambda to the ADMM step used at that
    grid point (deterministically).
    """
    from .evaluation import rand_index  # local import to avoid a module cycle

    A = _as_data(data)
    truth_labels = truth.labels if isinstance(truth, ClusterAssignment) else np.asarray(truth)
    if truth_labels.shape[0] != A.shape[0]:
        raise InputError("truth labels length does not match data")
    lambdas = np.sort(grid.lambdas())
    if lambdas.size == 0:
        raise InputError("lambda grid is empty")
    if merge_tol is None:
        merge_tol = default_merge_tol(A)
    base = params if params is not None else SonParams(lam=0.0)

    best_lam, best_rand = float(lambdas[0]), -1.0
    rand_values = np.empty(lambdas.size)
    counts = np.empty(lambdas.size, dtype=np.int64)
    state = None
    prev_rho = None
    for pos, lam in enumerate(lambdas):
        rho = float(rho_for(lam)) if rho_for is not None else base.admm_rho
        p = replace(base, lam=float(lam), admm_rho=rho)
        init = None
        if warm_start and state is not None:
            X0, U0 = state
            # duals are stored scaled by rho; rescale if rho changed
            U0 = U0 * (prev_rho / rho) if prev_rho != rho else U0
            init = (X0, U0)
        sol, state_out = _solve_keep_state(A, p, init)
        state, prev_rho = state_out, rho
        labels = extract_clusters(sol, merge_tol)
        ri = rand_index(labels.labels, truth_labels)
        rand_values[pos] = ri
        counts[pos] = labels.n_clusters
        if ri > best_rand:
            best_rand, best_lam = float(ri), float(lam)
    return GridSearchResult(
        best_lambda=best_lam,
        best_rand=best_rand,
        lambdas=lambdas,
        rand_values=rand_values,
        cluster_counts=counts,
    )


def _solve_keep_state(A, params: SonParams, init):
    """solve_son plus the raw (X, U) pair for warm-starting the next call."""
    n, d = A.shape
    I, J = np.triu_indices(n, 1)
    if params.lam == 0.0 or n == 1:
        sol = solve_son(A, params)
        return sol, (A.copy(), np.zeros((I.size, d)))
    if init is None:
        X = A.copy()
        U = np.zeros((I.size, d))
    else:
        X = np.array(init[0], dtype=np.float64, copy=True)
        U = np.array(init[1], dtype=np.float64, copy=True)
    obj = np.empty(params.max_iters)
    core = _admm_kernel if _HAVE_NUMBA else _admm_numpy
    iters, pres, dres = core(
        A, I, J, params.lam, params.admm_rho,
        params.primal_tol, params.dual_tol, params.max_iters, X, U, obj,
    )
    sol = SonSolution(
        centroids=X.copy(),
        lam=params.lam,
        iterations=int(iters),
        converged=bool(pres <= params.primal_tol and dres <= params.dual_tol),
        primal_residual=float(pres),
        dual_residual=float(dres),
        objective=float(obj[iters - 1]),
        objective_trace=obj[:iters].copy(),
    )
    return sol, (X, U)


def solution_to_json(solution: SonSolution, assignment: ClusterAssignment | None = None) -> str:
    """Serialise a solution (and optional labels) to a JSON document."""
    doc = {
        "lambda": solution.lam,
        "iterations": solution.iterations,
        "converged": solution.converged,
        "objective": solution.objective,
        "residuals": {
            "primal": solution.primal_residual,
            "dual": solution.dual_residual,
        },
        "centroids": solution.centroids.tolist(),
        "labels": assignment.labels.tolist() if assignment is not None else None,
    }
    return json.dumps(doc, sort_keys=True)
