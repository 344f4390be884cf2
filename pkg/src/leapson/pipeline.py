"""Pipeline orchestration and file formats.

One run chains: load or generate points -> all-pairs leapfrog distances ->
anchored Gram matrix -> eigendecomposition -> dimension choice ->
re-embedding -> clustering (sum-of-norms or a baseline) -> scoring against
the truth labels when they exist.  Every stage output can be written to
disk and re-read, and running the stages through separate subcommands
produces byte-identical artifacts to the one-shot run.
"""

from __future__ import annotations

import csv as _csv
import hashlib
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import bounds, datagen, evaluation, leapfrog, mds, son
from .errors import InputError

TABLE1_ROWS = (
    ((0.5, 0.5), (0.4, 0.4), 1.0),
    ((0.5, 0.5), (0.3, 0.3), 1.0),
    ((0.5, 0.5), (0.3, 0.3), 0.5),
    ((0.5, 0.5), (0.2, 0.2), 1.0),
    ((0.5, 0.5), (0.2, 0.2), 0.5),
    ((0.5, 0.5), (0.1, 0.1), 2.0),
    ((0.5, 0.5), (0.1, 0.1), 1.0),
    ((0.5, 0.5), (0.1, 0.1), 0.5),
    ((0.9, 0.1), (0.3, 0.3), 1.0),
    ((0.9, 0.1), (0.2, 0.2), 1.0),
    ((0.9, 0.1), (0.1, 0.1), 1.0),
)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass
class PipelineConfig:
    """Fully describes one pipeline run; serialisable to/from JSON.

    input: {"kind": "csv", "path": ...} or
           {"kind": "generator", "name": ..., "params": {...}}
    embedding: {"policy": "fixed", "dim": L} or
               {"policy": "eigengap", "ratio": r}
    clusterer: {"method": "son", ...} with optional "lambda", solver fields
               and "admm_rho" (null selects the scale heuristic), or
               {"method": "kmeans"|"dbscan"|"single_linkage", ...}
    lambda_grid: null, "default", or a grid dict
               {"kind": "geometric"|"linear"|"explicit", ...}
    """

    input: dict
    seed: int = 0
    embedding: dict = field(default_factory=lambda: {"policy": "eigengap", "ratio": 0.05})
    clusterer: dict = field(default_factory=lambda: {"method": "son", "lambda": 0.0})
    lambda_grid: object = None
    merge_tol: float | None = None
    output_dir: str | None = None

    @staticmethod
    def from_json(text: str) -> "PipelineConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"bad config JSON: {exc}") from exc
        known = {"input", "seed", "embedding", "clusterer", "lambda_grid", "merge_tol", "output_dir"}
        unknown = set(doc) - known
        if unknown:
            raise InputError(f"unknown config fields: {sorted(unknown)}")
        if "input" not in doc:
            raise InputError("config needs an 'input' section")
        return PipelineConfig(**doc)

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _dim_policy(embedding: dict) -> mds.DimPolicy:
    policy = embedding.get("policy", "eigengap")
    if policy == "fixed":
        return mds.Fixed(int(embedding["dim"]))
    if policy == "eigengap":
        return mds.EigengapRatio(float(embedding.get("ratio", 0.05)))
    raise InputError(f"unknown embedding policy {policy!r}")


def _grid_spec(grid, lambda_hat: float | None) -> son.GridSpec:
    if grid is None or grid == "default":
        if lambda_hat is None or lambda_hat <= 0:
            raise InputError("cannot build the default lambda grid: lambda_max is 0")
        return son.GridSpec.geometric(1e-6 * lambda_hat, 2.0 * lambda_hat, 200)
    if isinstance(grid, son.GridSpec):
        return grid
    kind = grid.get("kind")
    if kind == "geometric":
        return son.GridSpec.geometric(float(grid["lo"]), float(grid["hi"]), int(grid["count"]))
    if kind == "linear":
        lo = float(grid.get("lo", grid["step"]))
        if "hi" in grid:
            hi = float(grid["hi"])
        else:
            if lambda_hat is None or lambda_hat <= 0:
                raise InputError("linear grid without 'hi' needs a computable lambda_max")
            hi = 2.0 * lambda_hat
        return son.GridSpec.linear(lo, hi, float(grid["step"]))
    if kind == "explicit":
        return son.GridSpec.explicit_values(grid["values"])
    raise InputError(f"unknown grid kind {kind!r}")


def auto_rho(diameter: float, lam: float) -> float:
    """Deterministic ADMM step heuristic for a given data scale and lambda."""
    if diameter <= 0:
        return 1.0
    return float(np.clip(lam / (0.05 * diameter), 0.02, 100.0))


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

def ingest_csv(path):
    """Read a rectangular numeric CSV into points plus optional labels.

    A header row is detected by its non-numeric cells; a column named
    'label' (any case) becomes the truth assignment.  Ragged or
    non-numeric data rows raise InputError with the offending line number.
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"input file {path} does not exist")
    rows = []
    header = None
    label_col = None
    with open(path, newline="") as fh:
        reader = _csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if header is None and rows == []:
                try:
                    [float(cell) for cell in row]
                except ValueError:
                    header = [cell.strip() for cell in row]
                    lowered = [h.lower() for h in header]
                    if "label" in lowered:
                        label_col = lowered.index("label")
                    continue
            try:
                rows.append([float(cell) for cell in row])
            except ValueError as exc:
                raise InputError(f"{path}: line {lineno}: non-numeric cell ({exc})") from exc
            if len(rows) > 1 and len(rows[-1]) != len(rows[0]):
                raise InputError(f"{path}: line {lineno}: ragged row "
                                 f"({len(rows[-1])} cells, expected {len(rows[0])})")
    if not rows:
        raise InputError(f"{path}: no data rows")
    data = np.asarray(rows, dtype=np.float64)
    if header is not None and len(header) != data.shape[1]:
        raise InputError(f"{path}: header has {len(header)} columns, data has {data.shape[1]}")
    truth = None
    if label_col is not None:
        labels = data[:, label_col]
        if not np.allclose(labels, np.round(labels)):
            raise InputError(f"{path}: label column contains non-integer values")
        truth = np.round(labels).astype(np.int64)
        data = np.delete(data, label_col, axis=1)
    if data.shape[1] == 0:
        raise InputError(f"{path}: no coordinate columns")
    points = leapfrog.as_point_array(data)
    return points, truth


def write_labels_csv(labels, path) -> None:
    labels = labels.labels if isinstance(labels, son.ClusterAssignment) else np.asarray(labels)
    with open(path, "w") as fh:
        for lab in labels:
            fh.write(f"{int(lab)}\n")


def read_labels_csv(path) -> np.ndarray:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(int(line))
            except ValueError as exc:
                raise InputError(f"{path}: line {lineno}: bad label ({exc})") from exc
    if not out:
        raise InputError(f"{path}: no labels")
    return np.asarray(out, dtype=np.int64)


# ---------------------------------------------------------------------------
# SVG scatter
# ---------------------------------------------------------------------------

_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
            "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def write_scatter_svg(points, labels, path, width: int = 640, height: int = 480) -> None:
    """Static scatter plot of 2-d points coloured by label."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise InputError(f"scatter wants (n, 2) points, got shape {pts.shape}")
    labels = np.asarray(labels, dtype=np.int64)
    margin = 40.0
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)

    def sx(v):
        return margin + (v - lo[0]) / span[0] * (width - 2 * margin)

    def sy(v):
        return height - margin - (v - lo[1]) / span[1] * (height - 2 * margin)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for p, lab in zip(pts, labels):
        colour = _PALETTE[int(lab) % len(_PALETTE)]
        parts.append(f'<circle cx="{sx(p[0]):.2f}" cy="{sy(p[1]):.2f}" r="3" '
                     f'fill="{colour}" fill-opacity="0.8"/>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
        fh.write("\n")


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------

@dataclass
class RunReport:
    config: dict
    config_hash: str
    seed: int
    n: int
    dim: int
    chosen_L: int
    spectrum_over_n: list
    clustering: dict
    rand_index: float | None
    cluster_sizes: list
    outputs: list
    stage_seconds: dict

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"


def _load_input(config: PipelineConfig):
    spec = config.input
    kind = spec.get("kind")
    if kind == "csv":
        points, truth = ingest_csv(spec["path"])
        return points, truth
    if kind == "generator":
        name = spec.get("name")
        if name not in datagen.GENERATORS:
            raise InputError(f"unknown generator {name!r}; have {sorted(datagen.GENERATORS)}")
        params = dict(spec.get("params", {}))
        params.setdefault("seed", config.seed)
        dataset = _call_generator(name, params)
        return dataset.points, dataset.truth.labels
    raise InputError(f"unknown input kind {kind!r}")


def _call_generator(name: str, params: dict) -> datagen.LabeledDataset:
    params = dict(params)
    if name == "gaussian_mixture":
        spec = datagen.MixtureSpec(
            weights=tuple(params.pop("weights")),
            means=tuple(tuple(m) for m in params.pop("means")),
            sigmas=tuple(params.pop("sigmas")),
        )
        return datagen.gen_gaussian_mixture(spec, int(params.pop("n")), int(params.pop("seed")))
    if name == "uniform_intervals":
        ivs = datagen.IntervalSet(tuple(tuple(iv) for iv in params.pop("intervals")))
        return datagen.gen_uniform_intervals(ivs, int(params.pop("n")), int(params.pop("seed")))
    if name == "moons":
        return datagen.gen_moons(int(params.pop("n")), float(params.pop("noise")),
                                 int(params.pop("seed")))
    if name == "circles":
        return datagen.gen_circles(int(params.pop("n")), float(params.pop("noise")),
                                   float(params.pop("factor")), int(params.pop("seed")))
    if name == "aniso_blobs":
        return datagen.gen_aniso_blobs(int(params.pop("n")), int(params.pop("seed")))
    raise InputError(f"unknown generator {name!r}")


def _son_params_from(clusterer: dict, lam: float, diameter: float) -> son.SonParams:
    rho = clusterer.get("admm_rho")
    return son.SonParams(
        lam=lam,
        primal_tol=float(clusterer.get("primal_tol", 1e-6)),
        dual_tol=float(clusterer.get("dual_tol", 1e-6)),
        max_iters=int(clusterer.get("max_iters", 10000)),
        admm_rho=float(rho) if rho is not None else auto_rho(diameter, lam),
    )


def cluster_points(points, clusterer: dict, seed: int, lambda_grid=None,
                   merge_tol: float | None = None, truth=None):
    """Run the configured clusterer on a coordinate array.

    Returns (assignment, info dict).  For sum-of-norms with a grid the
    search needs truth labels; the winning lambda is then re-solved from
    the cold start so the result does not depend on the search path.
    """
    method = clusterer.get("method")
    pts = np.asarray(points, dtype=np.float64)
    if method == "son":
        diam = son.data_diameter(pts)
        tol = merge_tol if merge_tol is not None else son.default_merge_tol(pts)
        if tol <= 0:
            tol = np.finfo(float).tiny
        if lambda_grid is not None and pts.shape[0] > 1:
            if truth is None:
                raise InputError("a lambda grid search needs truth labels to score against")
            lam_hat = None
            if lambda_grid == "default" or (
                    isinstance(lambda_grid, dict) and lambda_grid.get("kind") == "linear"
                    and "hi" not in lambda_grid):
                lam_hat = son.lambda_max(pts, merge_tol=tol)
            grid = _grid_spec(lambda_grid, lam_hat)
            rho_fixed = clusterer.get("admm_rho")
            rho_for = (None if rho_fixed is not None
                       else (lambda lam: auto_rho(diam, lam)))
            base = _son_params_from(clusterer, 0.0, diam)
            search = son.lambda_grid_search(pts, truth, grid, params=base,
                                            merge_tol=tol, rho_for=rho_for)
            lam = search.best_lambda
        else:
            search = None
            lam = float(clusterer.get("lambda", 0.0))
        params = _son_params_from(clusterer, lam, diam)
        solution = son.solve_son(pts, params)
        assignment = son.extract_clusters(solution, tol)
        info = {
            "method": "son",
            "lambda": lam,
            "iterations": solution.iterations,
            "converged": solution.converged,
            "objective": solution.objective,
            "primal_residual": solution.primal_residual,
            "dual_residual": solution.dual_residual,
            "merge_tol": tol,
        }
        if search is not None:
            info["grid"] = {
                "count": int(search.lambdas.size),
                "best_lambda": search.best_lambda,
                "best_rand": search.best_rand,
            }
        return assignment, info, solution
    if method == "kmeans":
        params = evaluation.KMeansParams(
            k=int(clusterer["k"]),
            max_iters=int(clusterer.get("max_iters", 100)),
            restarts=int(clusterer.get("restarts", 10)),
            seed=int(clusterer.get("seed", seed)),
        )
        return evaluation.kmeans(pts, params), {"method": "kmeans", "k": params.k}, None
    if method == "dbscan":
        params = evaluation.DbscanParams(eps=float(clusterer["eps"]),
                                         min_pts=int(clusterer["min_pts"]))
        return evaluation.dbscan(pts, params), {
            "method": "dbscan", "eps": params.eps, "min_pts": params.min_pts}, None
    if method == "single_linkage":
        k = int(clusterer["k"])
        return evaluation.single_linkage(pts, k), {"method": "single_linkage", "k": k}, None
    raise InputError(f"unknown clusterer method {method!r}")


def run_pipeline(config: PipelineConfig) -> RunReport:
    """Execute the full pipeline for one configuration."""
    outdir = Path(config.output_dir) if config.output_dir else None
    if outdir is not None:
        outdir.mkdir(parents=True, exist_ok=True)
    timings = {}

    t0 = time.perf_counter()
    points, truth = _load_input(config)
    timings["load"] = time.perf_counter() - t0
    n = points.shape[0]

    t0 = time.perf_counter()
    distances = leapfrog.lf_all_pairs(points)
    timings["distances"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    policy = _dim_policy(config.embedding)
    if n == 1:
        embedding = mds.Embedding(coords=np.zeros((1, 1)))
        spectrum_over_n = [0.0]
        chosen = 1
    else:
        embedding, spectrum, chosen = mds.embed_distance_matrix(distances, policy)
        spectrum_over_n = (spectrum.eigenvalues[: min(n, 32)] / n).tolist()
    timings["embed"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    assignment, info, solution = cluster_points(
        embedding.points, config.clusterer, config.seed,
        lambda_grid=config.lambda_grid, merge_tol=config.merge_tol, truth=truth)
    timings["cluster"] = time.perf_counter() - t0

    rand = None
    if truth is not None:
        rand = evaluation.rand_index(assignment.labels, truth)
    sizes = np.bincount(assignment.labels, minlength=assignment.n_clusters).tolist()

    outputs = []
    if outdir is not None:
        dist_path = outdir / "distances.csv"
        leapfrog.write_distance_csv(distances, dist_path)
        outputs.append(dist_path.name)
        emb_path = outdir / "embedding.csv"
        mds.write_embedding_csv(embedding, emb_path)
        outputs.append(emb_path.name)
        lab_path = outdir / "labels.csv"
        write_labels_csv(assignment, lab_path)
        outputs.append(lab_path.name)
        if solution is not None:
            sol_path = outdir / "solution.json"
            sol_path.write_text(son.solution_to_json(solution, assignment) + "\n")
            outputs.append(sol_path.name)
        if points.shape[1] == 2:
            svg = outdir / "scatter_original.svg"
            write_scatter_svg(points, assignment.labels, svg)
            outputs.append(svg.name)
        if embedding.dim == 2:
            svg = outdir / "scatter_embedded.svg"
            write_scatter_svg(embedding.points, assignment.labels, svg)
            outputs.append(svg.name)

    report = RunReport(
        config=config.to_dict(),
        config_hash=config.config_hash(),
        seed=config.seed,
        n=n,
        dim=points.shape[1],
        chosen_L=chosen,
        spectrum_over_n=spectrum_over_n,
        clustering=info,
        rand_index=rand,
        cluster_sizes=sizes,
        outputs=outputs,
        stage_seconds=timings,
    )
    if outdir is not None:
        (outdir / "report.json").write_text(report.to_json())
    return report


# ---------------------------------------------------------------------------
# Lambda-bound tables
# ---------------------------------------------------------------------------

def run_table1(convention: str = bounds.GAUSS_MASS) -> list[dict]:
    """Evaluate the lambda windows for the 11 two-component benchmark rows.

    All rows use means 0 and 1; the returned dicts carry the n^2-scaled
    bounds under the requested mass convention.
    """
    rows = []
    for weights, sigmas, theta in TABLE1_ROWS:
        spec = datagen.MixtureSpec(weights=weights, means=((0.0,), (1.0,)), sigmas=sigmas)
        report = bounds.recovery_range_1d(spec, theta, n=1000, convention=convention)
        lo, hi = report.n2_lambda_range
        rows.append({
            "weights": list(weights),
            "sigmas": list(sigmas),
            "theta": theta,
            "lower_n2_lambda": lo,
            "upper_n2_lambda": hi,
            "nonempty": bool(lo < hi),
        })
    return rows


def table1_csv(rows: list[dict]) -> str:
    out = ["w1,w2,sigma1,sigma2,theta,lower_n2_lambda,upper_n2_lambda,nonempty"]
    for r in rows:
        out.append(",".join([
            f"{r['weights'][0]:g}", f"{r['weights'][1]:g}",
            f"{r['sigmas'][0]:g}", f"{r['sigmas'][1]:g}", f"{r['theta']:g}",
            f"{r['lower_n2_lambda']:.17g}", f"{r['upper_n2_lambda']:.17g}",
            "1" if r["nonempty"] else "0",
        ]))
    return "\n".join(out) + "\n"


def run_table1_json() -> str:
    """Both mass conventions side by side, one object per table row."""
    per = {conv: run_table1(conv) for conv in bounds.ERF_CONVENTIONS}
    rows = []
    for idx in range(len(TABLE1_ROWS)):
        base = {k: per[bounds.GAUSS_MASS][idx][k] for k in ("weights", "sigmas", "theta")}
        base["conventions"] = {
            conv: {k: per[conv][idx][k]
                   for k in ("lower_n2_lambda", "upper_n2_lambda", "nonempty")}
            for conv in bounds.ERF_CONVENTIONS
        }
        rows.append(base)
    return json.dumps(rows, sort_keys=True, indent=2) + "\n"
