"""Seeded synthetic dataset generators.

All generators draw from a Philox counter-based generator keyed by the
user-visible seed (via numpy's SeedSequence); normal variates are produced
by the Box-Muller transform on Philox uniforms.  This keeps every dataset
bit-reproducible for a given (generator, parameters, seed) triple,
independent of platform RNG defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .son import ClusterAssignment


def rng_for(seed: int, *stream: int) -> np.random.Generator:
    """Philox generator for a master seed and an optional substream id."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((int(seed),) + tuple(int(s) for s in stream))))


def box_muller(gen: np.random.Generator, size: int) -> np.ndarray:
    """Standard normal variates from uniforms via Box-Muller."""
    half = (size + 1) // 2
    u1 = gen.random(half)
    u2 = gen.random(half)
    radius = np.sqrt(-2.0 * np.log1p(-u1))  # 1-u1 in (0, 1], so the log is finite
    angle = 2.0 * np.pi * u2
    return np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])[:size]


# ---------------------------------------------------------------------------
# Parameter records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MixtureSpec:
    """Isotropic Gaussian mixture: weights, (K, d) means, per-component sigma."""

    weights: tuple
    means: tuple  # K tuples of d floats
    sigmas: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        mu = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        sig = np.asarray(self.sigmas, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise InputError("weights must be a nonempty vector")
        if np.any(w <= 0):
            raise InputError("weights must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise InputError(f"weights must sum to 1, got {w.sum()!r}")
        if mu.shape[0] != w.size or sig.shape != w.shape:
            raise InputError("weights, means and sigmas must have matching K")
        if np.any(sig <= 0):
            raise InputError("sigmas must be positive")
        object.__setattr__(self, "weights", tuple(float(x) for x in w))
        object.__setattr__(self, "means", tuple(tuple(float(x) for x in row) for row in mu))
        object.__setattr__(self, "sigmas", tuple(float(x) for x in sig))

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return len(self.means[0])

    def weight_array(self) -> np.ndarray:
        return np.asarray(self.weights)

    def mean_array(self) -> np.ndarray:
        return np.asarray(self.means)

    def sigma_array(self) -> np.ndarray:
        return np.asarray(self.sigmas)


@dataclass(frozen=True)
class IntervalSet:
    """Disjoint finite intervals (lo, hi) with lo < hi, sorted ascending."""

    intervals: tuple

    def __post_init__(self):
        ivs = tuple((float(lo), float(hi)) for lo, hi in self.intervals)
        if not ivs:
            raise InputError("interval set is empty")
        for lo, hi in ivs:
            if not (np.isfinite(lo) and np.isfinite(hi)) or lo >= hi:
                raise InputError(f"bad interval ({lo}, {hi})")
        ivs = tuple(sorted(ivs))
        for (_, hi_prev), (lo_next, _) in zip(ivs, ivs[1:]):
            if lo_next < hi_prev:
                raise InputError("intervals overlap")
        object.__setattr__(self, "intervals", ivs)

    @property
    def total_length(self) -> float:
        return float(sum(hi - lo for lo, hi in self.intervals))


@dataclass
class LabeledDataset:
    points: np.ndarray  # (n, d)
    truth: ClusterAssignment
    seed: int
    generator_name: str
    params: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def _dataset(points, labels, seed, name, params) -> LabeledDataset:
    labels = np.asarray(labels, dtype=np.int64)
    return LabeledDataset(
        points=np.ascontiguousarray(points, dtype=np.float64),
        truth=ClusterAssignment(labels=labels, n_clusters=int(labels.max()) + 1),
        seed=int(seed),
        generator_name=name,
        params=params,
    )


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

def gen_gaussian_mixture(spec: MixtureSpec, n: int, seed: int) -> LabeledDataset:
    """n draws from the mixture; the truth label is the component index.

    Components are sampled first (n uniforms against the cumulative
    weights), then all coordinates in one Box-Muller batch, so the stream
    layout is stable.
    """
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    gen = rng_for(seed)
    cum = np.cumsum(spec.weight_array())
    comp = np.searchsorted(cum, gen.random(n), side="right")
    comp = np.minimum(comp, spec.n_components - 1)  # guard the fp edge cum[-1] < 1
    z = box_muller(gen, n * spec.dim).reshape(n, spec.dim)
    pts = spec.mean_array()[comp] + spec.sigma_array()[comp][:, None] * z
    return _dataset(pts, comp, seed, "gaussian_mixture",
                    {"weights": list(spec.weights), "means": [list(m) for m in spec.means],
                     "sigmas": list(spec.sigmas), "n": n})


def gen_uniform_intervals(intervals: IntervalSet, n: int, seed: int) -> LabeledDataset:
    """Uniform draws over a union of intervals; truth = interval index."""
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    gen = rng_for(seed)
    u = gen.random(n) * intervals.total_length
    lengths = np.asarray([hi - lo for lo, hi in intervals.intervals])
    offsets = np.concatenate([[0.0], np.cumsum(lengths)])
    idx = np.minimum(np.searchsorted(offsets, u, side="right") - 1, len(lengths) - 1)
    los = np.asarray([lo for lo, _ in intervals.intervals])
    pts = (los[idx] + (u - offsets[idx]))[:, None]
    return _dataset(pts, idx, seed, "uniform_intervals",
                    {"intervals": [list(iv) for iv in intervals.intervals], "n": n})


def gen_moons(n: int, noise: float, seed: int) -> LabeledDataset:
    """Two interleaved half-circles with isotropic Gaussian jitter.

    The first moon is the upper unit semicircle around the origin, the
    second is its reflection shifted to (1, 0.5); angles are evenly spaced
    along each arc and the noise standard deviation applies per coordinate.
    """
    if n < 2:
        raise InputError(f"n must be >= 2, got {n}")
    if noise < 0:
        raise InputError(f"noise must be >= 0, got {noise}")
    n_out = n // 2
    n_in = n - n_out
    t_out = np.linspace(0.0, np.pi, n_out)
    t_in = np.linspace(0.0, np.pi, n_in)
    pts = np.vstack([
        np.column_stack([np.cos(t_out), np.sin(t_out)]),
        np.column_stack([1.0 - np.cos(t_in), 0.5 - np.sin(t_in)]),
    ])
    if noise > 0:
        gen = rng_for(seed)
        pts = pts + noise * box_muller(gen, 2 * n).reshape(n, 2)
    labels = np.concatenate([np.zeros(n_out, dtype=np.int64), np.ones(n_in, dtype=np.int64)])
    return _dataset(pts, labels, seed, "moons", {"n": n, "noise": noise})


def gen_circles(n: int, noise: float, factor: float, seed: int) -> LabeledDataset:
    """Two concentric circles of radius 1 and `factor`, with Gaussian jitter."""
    if n < 2:
        raise InputError(f"n must be >= 2, got {n}")
    if noise < 0:
        raise InputError(f"noise must be >= 0, got {noise}")
    if not 0.0 < factor < 1.0:
        raise InputError(f"factor must be in (0, 1), got {factor}")
    n_out = n // 2
    n_in = n - n_out
    t_out = np.linspace(0.0, 2.0 * np.pi, n_out, endpoint=False)
    t_in = np.linspace(0.0, 2.0 * np.pi, n_in, endpoint=False)
    pts = np.vstack([
        np.column_stack([np.cos(t_out), np.sin(t_out)]),
        factor * np.column_stack([np.cos(t_in), np.sin(t_in)]),
    ])
    if noise > 0:
        gen = rng_for(seed)
        pts = pts + noise * box_muller(gen, 2 * n).reshape(n, 2)
    labels = np.concatenate([np.zeros(n_out, dtype=np.int64), np.ones(n_in, dtype=np.int64)])
    return _dataset(pts, labels, seed, "circles", {"n": n, "noise": noise, "factor": factor})


ANISO_CENTERS = ((-6.0, -7.0), (5.0, -1.0), (0.0, 6.0))
ANISO_TRANSFORM = ((0.6, -0.6), (-0.4, 0.8))


def gen_aniso_blobs(n: int, seed: int) -> LabeledDataset:
    """Three unit-variance blobs sheared by a fixed linear map.

    Blob centers and the 2x2 transform are module constants; each point x
    becomes A @ x.  Counts split as evenly as n allows, extras going to the
    earlier blobs.
    """
    if n < 3:
        raise InputError(f"n must be >= 3, got {n}")
    centers = np.asarray(ANISO_CENTERS)
    counts = [n // 3 + (1 if i < n % 3 else 0) for i in range(3)]
    gen = rng_for(seed)
    chunks, labels = [], []
    for i, (center, m) in enumerate(zip(centers, counts)):
        z = box_muller(gen, 2 * m).reshape(m, 2)
        chunks.append(center + z)
        labels.append(np.full(m, i, dtype=np.int64))
    pts = np.vstack(chunks)
    A = np.asarray(ANISO_TRANSFORM)
    return _dataset(pts @ A.T, np.concatenate(labels), seed, "aniso_blobs", {"n": n})


# ---------------------------------------------------------------------------
# Serialisation: CSV with a label column plus a JSON manifest
# ---------------------------------------------------------------------------

def write_dataset_csv(dataset: LabeledDataset, path, manifest_path=None) -> None:
    path = str(path)
    with open(path, "w") as fh:
        cols = [f"x{k}" for k in range(dataset.dim)] + ["label"]
        fh.write(",".join(cols) + "\n")
        for row, lab in zip(dataset.points, dataset.truth.labels):
            fh.write(",".join(f"{v:.17g}" for v in row) + f",{int(lab)}\n")
    if manifest_path is None:
        manifest_path = path + ".manifest.json"
    manifest = {
        "generator": dataset.generator_name,
        "seed": dataset.seed,
        "params": dataset.params,
        "n": dataset.n,
        "dim": dataset.dim,
    }
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")


GENERATORS = {
    "gaussian_mixture": gen_gaussian_mixture,
    "uniform_intervals": gen_uniform_intervals,
    "moons": gen_moons,
    "circles": gen_circles,
    "aniso_blobs": gen_aniso_blobs,
}
