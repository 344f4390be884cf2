"""Recovery theory, numerically.

Three groups of tools:

* expected leapfrog distances for 1-D samples: E[LF(a, b)] is
  (2/n) * integral of 1/f over [a, b] for a density f positive there, and
  a Monte-Carlo probe of how tightly LF concentrates around it;
* lambda ranges for 1-D Gaussian mixtures: fusion needs
  lambda >= 2*int_{S_m}(1/f)/(rho_m n^2) per component, separation needs
  lambda < min_m int_{T_m}(1/f)/n^2 over the gaps, where S_m is the
  theta-sigma window around mean m and T_m the gap to the next window;
* per-dataset certificates: with cluster sizes |C_k|, fusing class k is
  guaranteed once lambda >= max_{i,j in C_k} ||b_i-b_j|| / |C_k|, and two
  classes stay apart while lambda < ||b_i-b_j|| / (2(n-1)) for some cross
  pair.

All integrals use adaptive Gauss-Kronrod quadrature (abs/rel tolerance
1e-10/1e-8); the integrands 1/f are smooth and positive wherever they are
evaluated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .datagen import IntervalSet, MixtureSpec, box_muller, rng_for
from .errors import InputError
from .son import ClusterAssignment

_QUAD_EPSABS = 1e-10
_QUAD_EPSREL = 1e-8

GAUSS_MASS = "gauss_mass"      # rho_m = w_m * P(|N(0,1)| <= theta)
LITERAL_ERF = "literal_erf"    # rho_m = w_m * erf(theta)
ERF_CONVENTIONS = (GAUSS_MASS, LITERAL_ERF)


# ---------------------------------------------------------------------------
# Densities
# ---------------------------------------------------------------------------

class Density1D:
    """A 1-D probability density with sampling and support structure."""

    def pdf(self, x):
        raise NotImplementedError

    def sample(self, gen: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def support_components(self) -> list[tuple[float, float]]:
        """Maximal intervals on which the density is positive."""
        raise NotImplementedError

    def breakpoints(self) -> list[float]:
        """Interior points worth handing to the quadrature (peaks, gaps)."""
        return []

    def positive_on(self, a: float, b: float) -> bool:
        return any(lo <= a and b <= hi for lo, hi in self.support_components())


class GaussianMixtureDensity(Density1D):
    """Mixture of 1-D Gaussians; positive on the whole line."""

    def __init__(self, spec: MixtureSpec):
        if spec.dim != 1:
            raise InputError(f"need a 1-d mixture, got dimension {spec.dim}")
        self.spec = spec
        self._w = spec.weight_array()
        self._mu = spec.mean_array().ravel()
        self._sigma = spec.sigma_array()

    def pdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        z = (x[..., None] - self._mu) / self._sigma
        comps = np.exp(-0.5 * z * z) / (self._sigma * math.sqrt(2.0 * math.pi))
        return comps @ self._w

    def sample(self, gen, n):
        comp = np.minimum(np.searchsorted(np.cumsum(self._w), gen.random(n), side="right"),
                          self._w.size - 1)
        z = box_muller(gen, n)
        return self._mu[comp] + self._sigma[comp] * z

    def support_components(self):
        return [(-np.inf, np.inf)]

    def breakpoints(self):
        pts = sorted(self._mu)
        mids = [0.5 * (a + b) for a, b in zip(pts, pts[1:])]
        return sorted(pts + mids)


class UniformIntervalsDensity(Density1D):
    """Uniform density over a union of disjoint intervals."""

    def __init__(self, intervals: IntervalSet):
        self.intervals = intervals
        self._height = 1.0 / intervals.total_length

    def pdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        inside = np.zeros(x.shape, dtype=bool)
        for lo, hi in self.intervals.intervals:
            inside |= (x >= lo) & (x <= hi)
        return np.where(inside, self._height, 0.0)

    def sample(self, gen, n):
        u = gen.random(n) * self.intervals.total_length
        lengths = np.asarray([hi - lo for lo, hi in self.intervals.intervals])
        offsets = np.concatenate([[0.0], np.cumsum(lengths)])
        idx = np.minimum(np.searchsorted(offsets, u, side="right") - 1, lengths.size - 1)
        los = np.asarray([lo for lo, _ in self.intervals.intervals])
        return los[idx] + (u - offsets[idx])

    def support_components(self):
        return list(self.intervals.intervals)

    def breakpoints(self):
        return [v for iv in self.intervals.intervals for v in iv]


def integrate_inverse_density(density: Density1D, a: float, b: float) -> float:
    """Adaptive integral of 1/f over [a, b]; f must be positive there."""
    if not a < b:
        raise InputError(f"need a < b, got a={a}, b={b}")
    if not density.positive_on(a, b):
        raise InputError(f"density vanishes somewhere on [{a}, {b}]; 1/f is singular")
    pts = [p for p in density.breakpoints() if a < p < b] or None
    value, _err = quad(
        lambda x: 1.0 / float(density.pdf(x)),
        a, b, points=pts, epsabs=_QUAD_EPSABS, epsrel=_QUAD_EPSREL, limit=500,
    )
    return float(value)


def expected_lf(density: Density1D, a: float, b: float, n: int) -> float:
    """Asymptotic expected leapfrog distance between samples at a and b."""
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    return (2.0 / n) * integrate_inverse_density(density, a, b)


# ---------------------------------------------------------------------------
# Lambda ranges for 1-D Gaussian mixtures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LambdaRange:
    """A [lower, upper) window of workable lambda values.

    `scale` records the natural normalisation of the bounds: 'n2_lambda'
    ranges shrink like 1/n^2, 'n_lambda' like 1/n, and 'lambda' is
    unscaled.  `upper` may be +inf when nothing constrains it.
    """

    lower: float
    upper: float
    scale: str = "lambda"

    def __post_init__(self):
        if self.lower < 0 or (np.isfinite(self.upper) and self.upper < 0):
            raise InputError("lambda bounds must be nonnegative")

    @property
    def nonempty(self) -> bool:
        return self.lower < self.upper


@dataclass
class ComponentBound:
    index: int
    window: tuple[float, float]
    inv_density_integral: float
    rho_hat: float
    fusion_n2_lambda: float


@dataclass
class GapBound:
    index: int
    gap: tuple[float, float]
    inv_density_integral: float
    separation_n2_lambda: float


@dataclass
class MixtureRangeReport:
    theta: float
    n: int
    convention: str
    components: list[ComponentBound]
    gaps: list[GapBound]
    lambda_range: LambdaRange

    @property
    def n2_lambda_range(self) -> tuple[float, float]:
        return (self.lambda_range.lower * self.n ** 2, self.lambda_range.upper * self.n ** 2)


def _rho_hat(weight: float, theta: float, convention: str) -> float:
    if convention == GAUSS_MASS:
        return weight * math.erf(theta / math.sqrt(2.0))
    if convention == LITERAL_ERF:
        return weight * math.erf(theta)
    raise InputError(f"unknown erf convention {convention!r}; use one of {ERF_CONVENTIONS}")


def recovery_range_1d(spec: MixtureSpec, theta: float, n: int,
                      convention: str = GAUSS_MASS) -> MixtureRangeReport:
    """Fusion/separation lambda window for a 1-D Gaussian mixture.

    The windows S_m = [mu_m - theta*sigma_m, mu_m + theta*sigma_m] must be
    pairwise disjoint.  Per component the fusion bound uses the closed-form
    lower bound rho_hat on the window mass (see the module conventions);
    the separation bound integrates 1/f over each gap between consecutive
    windows.  Both bounds scale exactly as 1/n^2.
    """
    if spec.dim != 1:
        raise InputError(f"need a 1-d mixture, got dimension {spec.dim}")
    if theta <= 0:
        raise InputError(f"theta must be positive, got {theta}")
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    density = GaussianMixtureDensity(spec)
    mu = spec.mean_array().ravel()
    order = np.argsort(mu)
    windows = [(mu[i] - theta * spec.sigmas[i], mu[i] + theta * spec.sigmas[i]) for i in order]
    for (lo1, hi1), (lo2, hi2) in zip(windows, windows[1:]):
        if hi1 >= lo2:
            raise InputError(
                f"theta={theta} makes windows [{lo1}, {hi1}] and [{lo2}, {hi2}] overlap")

    components = []
    for pos, i in enumerate(order):
        lo, hi = windows[pos]
        integral = integrate_inverse_density(density, lo, hi)
        rho = _rho_hat(spec.weights[i], theta, convention)
        components.append(ComponentBound(
            index=int(i), window=(lo, hi), inv_density_integral=integral,
            rho_hat=rho, fusion_n2_lambda=2.0 * integral / rho,
        ))
    gaps = []
    for pos in range(len(windows) - 1):
        lo, hi = windows[pos][1], windows[pos + 1][0]
        integral = integrate_inverse_density(density, lo, hi)
        gaps.append(GapBound(
            index=pos, gap=(lo, hi), inv_density_integral=integral,
            separation_n2_lambda=integral,
        ))

    lower = max(c.fusion_n2_lambda for c in components) / n ** 2
    upper = (min(g.separation_n2_lambda for g in gaps) / n ** 2) if gaps else np.inf
    return MixtureRangeReport(
        theta=theta, n=n, convention=convention,
        components=components, gaps=gaps,
        lambda_range=LambdaRange(lower=lower, upper=upper, scale="n2_lambda"),
    )


# ---------------------------------------------------------------------------
# Per-dataset recovery certificates
# ---------------------------------------------------------------------------

@dataclass
class RecoveryCertificate:
    lam: float
    fusion_thresholds: dict        # class -> max intra distance / |C_k|
    separation_bounds: dict        # (k, k') -> best cross distance / (2(n-1))
    separation_gaps: dict          # (k, k') -> min cross distance / (2(n-1))
    certified_fusion: dict         # class -> bool at `lam`
    certified_separation: dict     # (k, k') -> bool at `lam`
    feasible_lambda: LambdaRange

    @property
    def certifies(self) -> bool:
        return (all(self.certified_fusion.values())
                and all(self.certified_separation.values()))


def certificate(embedding, truth, lam: float) -> RecoveryCertificate:
    """Evaluate the fusion/separation conditions on actual coordinates.

    `embedding` is an (n, d) array or an Embedding; `truth` the reference
    classes.  The feasible window pairs the binding fusion threshold with
    the most conservative separation bound (the one built from the minimum
    cross-class distance), so any lambda inside it satisfies every
    condition simultaneously.
    """
    pts = np.asarray(getattr(embedding, "points", embedding), dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    labels = truth.labels if isinstance(truth, ClusterAssignment) else np.asarray(truth)
    n = pts.shape[0]
    if labels.shape[0] != n:
        raise InputError("truth labels length does not match embedding")
    classes = np.unique(labels)
    dist = np.sqrt(np.maximum(
        np.einsum("ij,ij->i", pts, pts)[:, None]
        + np.einsum("ij,ij->i", pts, pts)[None, :]
        - 2.0 * (pts @ pts.T), 0.0))

    fusion, cert_fusion = {}, {}
    for k in classes:
        members = np.where(labels == k)[0]
        diam = float(dist[np.ix_(members, members)].max()) if members.size > 1 else 0.0
        thr = diam / members.size
        fusion[int(k)] = thr
        cert_fusion[int(k)] = lam >= thr

    sep_best, sep_gap, cert_sep = {}, {}, {}
    denom = 2.0 * (n - 1) if n > 1 else 1.0
    for a_pos, ka in enumerate(classes):
        for kb in classes[a_pos + 1:]:
            cross = dist[np.ix_(np.where(labels == ka)[0], np.where(labels == kb)[0])]
            key = (int(ka), int(kb))
            sep_best[key] = float(cross.max()) / denom
            sep_gap[key] = float(cross.min()) / denom
            cert_sep[key] = lam < sep_best[key]

    lower = max(fusion.values()) if fusion else 0.0
    upper = min(sep_gap.values()) if sep_gap else np.inf
    return RecoveryCertificate(
        lam=lam,
        fusion_thresholds=fusion,
        separation_bounds=sep_best,
        separation_gaps=sep_gap,
        certified_fusion=cert_fusion,
        certified_separation=cert_sep,
        feasible_lambda=LambdaRange(lower=lower, upper=upper, scale="lambda"),
    )


# ---------------------------------------------------------------------------
# Monte-Carlo concentration probe
# ---------------------------------------------------------------------------

@dataclass
class ConcentrationProbe:
    n: int
    trials: int
    intra_lf: np.ndarray          # (trials,) max LF between extremes of one support block
    expected_intra: np.ndarray    # matching (2/n) * integral predictions
    scaled_deviations: np.ndarray  # |LF - E| * n^1.04, flattened over blocks
    min_inter_lf: np.ndarray      # (trials,) min cross-block LF; empty if one block

    @property
    def mean_lf(self) -> float:
        return float(self.intra_lf.mean())

    @property
    def std_lf(self) -> float:
        return float(self.intra_lf.std())


def lf_concentration_probe(density: Density1D, n: int, trials: int, seed: int) -> ConcentrationProbe:
    """Sample the density repeatedly and compare leapfrog distances with
    their expected values.

    Per trial: draw n points, sort them, and within every support block
    take the leapfrog distance between that block's extreme samples (on
    the line this is the sum of squared consecutive gaps).  The reported
    intra distance is the max over blocks, the expectation is evaluated by
    quadrature between the realized extremes, and deviations are scaled by
    n^1.04.  For multi-block supports the minimum cross-block distance
    (the squared gap between neighbouring blocks) is recorded too.
    """
    if n < 100:
        raise InputError(f"n must be >= 100, got {n}")
    if trials < 10:
        raise InputError(f"trials must be >= 10, got {trials}")
    blocks = density.support_components()
    intra = np.empty(trials)
    expected = np.empty(trials)
    deviations = []
    inter = []
    for t in range(trials):
        gen = rng_for(seed, t)
        x = np.sort(density.sample(gen, n))
        gaps_sq = np.diff(x) ** 2
        prefix = np.concatenate([[0.0], np.cumsum(gaps_sq)])

        block_stats = []
        block_edges = []
        for lo, hi in blocks:
            a_idx = np.searchsorted(x, lo, side="left") if np.isfinite(lo) else 0
            b_idx = np.searchsorted(x, hi, side="right") if np.isfinite(hi) else x.size
            if b_idx - a_idx < 2:
                continue
            a, b = x[a_idx], x[b_idx - 1]
            lf = prefix[b_idx - 1] - prefix[a_idx]
            exp_lf = expected_lf(density, a, b, n)
            block_stats.append((lf, exp_lf))
            block_edges.append((a_idx, b_idx - 1))
        if not block_stats:
            raise InputError("no support block captured two samples; increase n")
        lfs = np.asarray([s[0] for s in block_stats])
        exps = np.asarray([s[1] for s in block_stats])
        pos = int(np.argmax(lfs))
        intra[t] = lfs[pos]
        expected[t] = exps[pos]
        deviations.extend(np.abs(lfs - exps) * n ** 1.04)
        if len(block_edges) > 1:
            cross = [
                (x[block_edges[b + 1][0]] - x[block_edges[b][1]]) ** 2
                for b in range(len(block_edges) - 1)
            ]
            inter.append(min(cross))
    return ConcentrationProbe(
        n=n,
        trials=trials,
        intra_lf=intra,
        expected_intra=expected,
        scaled_deviations=np.asarray(deviations),
        min_inter_lf=np.asarray(inter),
    )
