"""Command-line interface.

Subcommands mirror the pipeline stages so that any intermediate artifact
can be produced, inspected, and fed back in:

    leapson gen        write a synthetic dataset CSV (+ JSON manifest)
    leapson distances  all-pairs leapfrog distances for a dataset CSV
    leapson embed      re-embed a distance matrix
    leapson cluster    cluster a coordinate CSV (son / kmeans / dbscan /
                       single_linkage)
    leapson pipeline   run everything from a JSON config
    leapson bounds     lambda windows for 1-D Gaussian mixtures (or the
                       11-row benchmark table)
    leapson eval       Rand index between two label CSVs

Exit codes: 0 on success, 2 on input errors, 3 when --strict is set and
the solver did not converge.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bounds, datagen, evaluation, leapfrog, mds, pipeline, son
from .errors import InputError, SolverError


def _parse_dim_policy(text: str) -> dict:
    kind, _, arg = text.partition(":")
    if kind == "fixed":
        return {"policy": "fixed", "dim": int(arg)}
    if kind in ("ratio", "eigengap"):
        return {"policy": "eigengap", "ratio": float(arg) if arg else 0.05}
    raise InputError(f"bad --dim value {text!r}; use fixed:<L> or eigengap[:<ratio>]")


def _parse_grid(text: str):
    if text == "default":
        return "default"
    kind, _, args = text.partition(":")
    fields = {}
    if args:
        for tok in args.split(","):
            key, _, val = tok.partition("=")
            if not val:
                raise InputError(f"bad --grid field {tok!r}")
            fields[key] = val
    if kind == "geometric":
        return {"kind": "geometric", "lo": float(fields["lo"]), "hi": float(fields["hi"]),
                "count": int(fields.get("count", 200))}
    if kind == "linear":
        out = {"kind": "linear", "step": float(fields["step"])}
        if "lo" in fields:
            out["lo"] = float(fields["lo"])
        if "hi" in fields:
            out["hi"] = float(fields["hi"])
        return out
    if kind == "explicit":
        return {"kind": "explicit", "values": [float(v) for v in fields["values"].split(";")]}
    raise InputError(f"bad --grid value {text!r}")


def _cmd_gen(args) -> int:
    params = json.loads(args.params) if args.params else {}
    params.setdefault("seed", args.seed)
    if args.n is not None:
        params.setdefault("n", args.n)
    if args.noise is not None:
        params.setdefault("noise", args.noise)
    if args.factor is not None:
        params.setdefault("factor", args.factor)
    dataset = pipeline._call_generator(args.generator, params)
    datagen.write_dataset_csv(dataset, args.out)
    print(f"wrote {dataset.n} points to {args.out}")
    return 0


def _cmd_distances(args) -> int:
    points, _truth = pipeline.ingest_csv(args.input)
    D = leapfrog.lf_all_pairs(points)
    if args.format == "csv":
        leapfrog.write_distance_csv(D, args.out)
    else:
        leapfrog.write_distance_binary(D, args.out)
    print(f"wrote {D.shape[0]}x{D.shape[0]} distance matrix to {args.out}")
    return 0


def _cmd_embed(args) -> int:
    path = Path(args.distances)
    if path.suffix == ".bin" or args.format == "bin":
        D = leapfrog.read_distance_binary(path)
    else:
        D = leapfrog.read_distance_csv(path)
    policy = pipeline._dim_policy(_parse_dim_policy(args.dim))
    embedding, spectrum, chosen = mds.embed_distance_matrix(D, policy)
    mds.write_embedding_csv(embedding, args.out)
    top = ", ".join(f"{v:.4g}" for v in spectrum.eigenvalues[:6] / D.shape[0])
    print(f"L={chosen}; leading eigenvalues over n: {top}")
    print(f"wrote embedding to {args.out}")
    return 0


def _cmd_cluster(args) -> int:
    path = Path(args.input)
    first = path.read_text().lstrip().splitlines()[0] if path.exists() else ""
    if first.startswith("#"):
        coords = mds.read_embedding_csv(path).points
        truth = None
    else:
        coords, truth = pipeline.ingest_csv(path)
    if args.truth:
        truth_points, truth = pipeline.ingest_csv(args.truth)
        if truth is None:
            raise InputError(f"{args.truth} has no label column")

    clusterer = {"method": args.method}
    if args.method == "son":
        if args.lam is not None:
            clusterer["lambda"] = args.lam
        if args.admm_rho is not None:
            clusterer["admm_rho"] = args.admm_rho
    elif args.method in ("kmeans", "single_linkage"):
        if args.k is None:
            raise InputError(f"--k is required for {args.method}")
        clusterer["k"] = args.k
        if args.method == "kmeans":
            clusterer["seed"] = args.seed
    elif args.method == "dbscan":
        if args.eps is None or args.min_pts is None:
            raise InputError("--eps and --min-pts are required for dbscan")
        clusterer["eps"] = args.eps
        clusterer["min_pts"] = args.min_pts

    grid = _parse_grid(args.grid) if args.grid else None
    assignment, info, solution = pipeline.cluster_points(
        coords, clusterer, args.seed, lambda_grid=grid,
        merge_tol=args.merge_tol, truth=truth)
    pipeline.write_labels_csv(assignment, args.out)
    if truth is not None:
        info["rand_index"] = evaluation.rand_index(assignment.labels, truth)
    print(json.dumps(info, sort_keys=True))
    print(f"wrote {assignment.n_clusters} clusters to {args.out}")
    if args.strict and solution is not None and not solution.converged:
        print("solver did not converge within max_iters", file=sys.stderr)
        return 3
    return 0


def _cmd_pipeline(args) -> int:
    config = pipeline.PipelineConfig.from_json(Path(args.config).read_text())
    if args.out:
        config.output_dir = args.out
    if args.seed is not None:
        config.seed = args.seed
    report = pipeline.run_pipeline(config)
    print(report.to_json(), end="")
    if args.strict and not report.clustering.get("converged", True):
        print("solver did not converge within max_iters", file=sys.stderr)
        return 3
    return 0


def _cmd_bounds(args) -> int:
    if args.table1:
        rows = pipeline.run_table1(convention=args.convention)
        text = pipeline.table1_csv(rows)
        if args.out:
            Path(args.out).write_text(text)
            Path(args.out).with_suffix(".json").write_text(pipeline.run_table1_json())
            print(f"wrote {args.out} and {Path(args.out).with_suffix('.json')}")
        else:
            print(text, end="")
        return 0
    if args.w is None or args.sigma is None:
        raise InputError("either --table1 or both --w and --sigma are required")
    weights = tuple(float(v) for v in args.w.split(","))
    sigmas = tuple(float(v) for v in args.sigma.split(","))
    if args.mu:
        means = tuple((float(v),) for v in args.mu.split(","))
    else:
        means = tuple((float(i),) for i in range(len(weights)))
    spec = datagen.MixtureSpec(weights=weights, means=means, sigmas=sigmas)
    report = bounds.recovery_range_1d(spec, args.theta, args.n, convention=args.convention)
    lo, hi = report.n2_lambda_range
    doc = {
        "theta": args.theta,
        "n": args.n,
        "convention": args.convention,
        "n2_lambda_range": [lo, hi],
        "lambda_range": [report.lambda_range.lower, report.lambda_range.upper],
        "nonempty": report.lambda_range.nonempty,
    }
    print(json.dumps(doc, sort_keys=True))
    return 0


def _cmd_eval(args) -> int:
    a = pipeline.read_labels_csv(args.labels)
    b = pipeline.read_labels_csv(args.truth)
    print(f"{evaluation.rand_index(a, b):.17g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="leapson", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    p.add_argument("--generator", required=True, choices=sorted(datagen.GENERATORS))
    p.add_argument("--n", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--factor", type=float)
    p.add_argument("--params", help="extra generator parameters as JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("distances", help="all-pairs leapfrog distances")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=("csv", "bin"), default="csv")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_distances)

    p = sub.add_parser("embed", help="re-embed a distance matrix")
    p.add_argument("--distances", required=True)
    p.add_argument("--format", choices=("csv", "bin"), default="csv")
    p.add_argument("--dim", default="eigengap:0.05", help="fixed:<L> or eigengap[:<ratio>]")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("cluster", help="cluster a coordinate CSV")
    p.add_argument("--input", required=True, help="embedding CSV or dataset CSV")
    p.add_argument("--method", default="son",
                   choices=("son", "kmeans", "dbscan", "single_linkage"))
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--admm-rho", type=float)
    p.add_argument("--grid", help="default | geometric:lo=..,hi=..,count=.. | "
                                  "linear:step=..[,lo=..,hi=..] | explicit:values=v1;v2")
    p.add_argument("--merge-tol", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--min-pts", type=int)
    p.add_argument("--truth", help="dataset CSV with a label column to score against")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--strict", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("pipeline", help="run the full pipeline from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--seed", type=int)
    p.add_argument("--strict", action="store_true")
    p.set_defaults(func=_cmd_pipeline)

    p = sub.add_parser("bounds", help="lambda windows for 1-D Gaussian mixtures")
    p.add_argument("--table1", action="store_true", help="run the 11-row benchmark table")
    p.add_argument("--w", help="comma-separated component weights")
    p.add_argument("--sigma", help="comma-separated component sigmas")
    p.add_argument("--mu", help="comma-separated component means (default 0,1,...)")
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--convention", choices=bounds.ERF_CONVENTIONS,
                   default=bounds.GAUSS_MASS)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("eval", help="Rand index between two label files")
    p.add_argument("--labels", required=True)
    p.add_argument("--truth", required=True)
    p.set_defaults(func=_cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
