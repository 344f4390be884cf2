"""Distance-to-coordinates re-embedding.

The squared leapfrog distance matrix is turned into a Gram-like matrix by
subtracting its first row from every row and every column (the first point
acts as the anchor; no global double-centering and no -1/2 factor).  The
re-embedded coordinates are read off the top eigenpairs by magnitude:

    B = Diag(sqrt|lambda_1|, ..., sqrt|lambda_L|) @ Q_L.T

Column i of B is the new coordinate vector of point i.  When the squared
distances happen to be exactly Euclidean, the construction reproduces the
original configuration up to a rigid motion and a global sqrt(2) scale
(the omitted -1/2 shows up as a factor 2 inside the Gram matrix).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, SolverError
from .leapfrog import validate_distance_matrix


@dataclass(frozen=True)
class Fixed:
    """Dimension policy: always embed into `dim` coordinates."""

    dim: int


@dataclass(frozen=True)
class EigengapRatio:
    """Dimension policy: cut the spectrum at the first relative eigengap.

    Chooses the smallest L with |lambda_{L+1}| / |lambda_1| < ratio; if no
    eigenvalue falls below the threshold the dimension is capped at n - 1.
    """

    ratio: float = 0.05


DimPolicy = Fixed | EigengapRatio


@dataclass
class EigenSpectrum:
    """Full symmetric eigendecomposition, sorted by |eigenvalue| descending.

    eigenvalues: (n,) sorted by magnitude, ties broken by signed value then
        by position in the LAPACK output.
    eigenvectors: (n, n), column l pairs with eigenvalues[l]; each column is
        flipped so its largest-magnitude entry is positive.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]


@dataclass
class Embedding:
    """Re-embedded coordinates; column i of `coords` is point i in R^L."""

    coords: np.ndarray  # (L, n)

    def __post_init__(self):
        self.coords = np.atleast_2d(np.asarray(self.coords, dtype=np.float64))
        if not np.all(np.isfinite(self.coords)):
            raise InputError("embedding contains non-finite values")

    @property
    def dim(self) -> int:
        return self.coords.shape[0]

    @property
    def n(self) -> int:
        return self.coords.shape[1]

    @property
    def points(self) -> np.ndarray:
        """(n, L) view, one row per point."""
        return self.coords.T


def gram_from_lf(D) -> np.ndarray:
    """Anchored Gram matrix of a leapfrog distance matrix.

    With d the entrywise square of D, returns G with
    G[i, j] = d[i, j] - d[0, i] - d[0, j].  Row and column 0 are identically
    zero by construction.
    """
    D = validate_distance_matrix(D)
    d = D * D
    anchor = d[0]
    return d - anchor[None, :] - anchor[:, None]


def eig_sym(G, residual_tol: float = 1e-8) -> EigenSpectrum:
    """Eigendecomposition of a symmetric matrix, magnitude-sorted.

    Verifies the solution: each eigenpair must satisfy
    ||G q - lambda q|| <= residual_tol * (1 + |lambda|) and the eigenvector
    columns must be orthonormal to the same tolerance, otherwise a
    SolverError carrying the worst residual is raised.
    """
    G = np.asarray(G, dtype=np.float64)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise InputError(f"matrix must be square, got shape {G.shape}")
    if not np.allclose(G, G.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(G).max())):
        raise InputError("matrix is not symmetric")
    sym = 0.5 * (G + G.T)
    try:
        vals, vecs = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"eigendecomposition failed to converge: {exc}") from exc

    n = vals.shape[0]
    order = np.lexsort((np.arange(n), -vals, -np.abs(vals)))
    vals = vals[order]
    vecs = vecs[:, order]

    # deterministic sign: largest-magnitude entry of each eigenvector positive
    amax = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[amax, np.arange(n)])
    signs[signs == 0] = 1.0
    vecs = vecs * signs[None, :]

    resid = sym @ vecs - vecs * vals[None, :]
    resid_norm = np.sqrt(np.einsum("ij,ij->j", resid, resid))
    allowed = residual_tol * (1.0 + np.abs(vals))
    ortho = np.abs(vecs.T @ vecs - np.eye(n)).max()
    if np.any(resid_norm > allowed) or ortho > residual_tol:
        worst = float(max((resid_norm / allowed).max(), ortho / residual_tol) * residual_tol)
        raise SolverError("eigendecomposition residual exceeds tolerance", residual=worst)
    return EigenSpectrum(eigenvalues=vals, eigenvectors=vecs)


def select_dim(spectrum: EigenSpectrum, n: int, policy: DimPolicy) -> int:
    """Pick the embedding dimension from the sorted spectrum."""
    if isinstance(policy, Fixed):
        if not 1 <= policy.dim <= n - 1:
            raise InputError(f"fixed dimension {policy.dim} not in [1, {n - 1}]")
        return policy.dim
    if isinstance(policy, EigengapRatio):
        if not 0 < policy.ratio < 1:
            raise InputError(f"eigengap ratio must be in (0, 1), got {policy.ratio}")
        mags = np.abs(spectrum.eigenvalues)
        if mags[0] == 0.0:
            return 1
        for dim in range(1, n):
            if mags[dim] < policy.ratio * mags[0]:
                return dim
        return n - 1
    raise InputError(f"unknown dimension policy {policy!r}")


def embed(spectrum: EigenSpectrum, L: int) -> Embedding:
    """Coordinates from the top-L eigenpairs, rows scaled by sqrt|lambda|."""
    n = spectrum.n
    if not 1 <= L <= n:
        raise InputError(f"embedding dimension {L} not in [1, {n}]")
    scale = np.sqrt(np.abs(spectrum.eigenvalues[:L]))
    coords = scale[:, None] * spectrum.eigenvectors[:, :L].T
    return Embedding(coords=coords)


def embed_distance_matrix(D, policy: DimPolicy) -> tuple[Embedding, EigenSpectrum, int]:
    """Convenience: gram_from_lf -> eig_sym -> select_dim -> embed."""
    G = gram_from_lf(D)
    spectrum = eig_sym(G)
    L = select_dim(spectrum, spectrum.n, policy)
    return embed(spectrum, L), spectrum, L


# ---------------------------------------------------------------------------
# Serialisation
# ---------------------------------------------------------------------------

def write_embedding_csv(embedding: Embedding, path) -> None:
    """One point per line, L columns, with a '# L=.. n=..' header."""
    with open(path, "w") as fh:
        fh.write(f"# L={embedding.dim} n={embedding.n}\n")
        for row in embedding.points:
            fh.write(",".join(f"{v:.17g}" for v in row))
            fh.write("\n")


def read_embedding_csv(path) -> Embedding:
    rows = []
    header = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                header = line
                continue
            try:
                rows.append([float(tok) for tok in line.split(",")])
            except ValueError as exc:
                raise InputError(f"{path}: line {lineno}: {exc}") from exc
    if not rows:
        raise InputError(f"{path}: empty embedding")
    if len({len(r) for r in rows}) != 1:
        raise InputError(f"{path}: ragged rows")
    pts = np.asarray(rows, dtype=np.float64)
    if header is not None:
        try:
            fields = dict(tok.split("=") for tok in header[1:].split())
            if int(fields["n"]) != pts.shape[0] or int(fields["L"]) != pts.shape[1]:
                raise InputError(f"{path}: header does not match data shape {pts.shape}")
        except (KeyError, ValueError) as exc:
            raise InputError(f"{path}: malformed embedding header {header!r}") from exc
    return Embedding(coords=pts.T)
