"""Random-matrix bases.

A random basis is an ordered set of ``n x m`` matrices whose elements are
i.i.d. deviates of a chosen distribution.  Distinct members are orthogonal
in expectation under the Frobenius product, the set satisfies an
approximate completeness relation, and weighted sums of members can
synthesize arbitrary matrices.  This module provides the generator and the
associated statistics: orthogonality moments, completeness maps, synthesis
with its variance law, SNR predictions, and an ergodicity diagnostic.

Generation is counter-based: element streams are keyed by the pair
(seed, member-block), so any sub-range of members regenerates
bit-identically no matter how the work is chunked or parallelized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox
from scipy import stats
from scipy.special import ndtri

from .errors import ParameterError, ShapeError
from .grid import ImageGrid

__all__ = [
    "DistributionSpec",
    "RandomBasis",
    "BasisStats",
    "SnrPrediction",
    "ErgodicityReport",
    "gen_random_basis",
    "member_block",
    "frobenius",
    "orthogonality_stats",
    "completeness_map",
    "synthesize",
    "synthesis_variance",
    "predict_snr",
    "ergodicity_check",
]

# Members are laid out in fixed blocks of this many per Philox key.  The
# block size is part of the stream definition: changing it changes every
# generated basis, so it is a constant, not a tuning knob.
MEMBERS_PER_KEY = 64

_MAX_SEED = 2**64


def _check_seed(seed):
    if not isinstance(seed, (int, np.integer)) or not 0 <= int(seed) < _MAX_SEED:
        raise ParameterError(f"seed must be an integer in [0, 2**64), got {seed!r}")
    return int(seed)


@dataclass(frozen=True)
class DistributionSpec:
    """Element distribution for random-matrix members.

    ``kind`` is one of ``uniform`` (p1=lo, p2=hi), ``gaussian`` (p1=mean,
    p2=sd) or ``poisson`` (p1=rate).  When ``zero_centered`` is set every
    realized deviate is shifted by the distribution mean, so the generated
    elements satisfy E[R] = 0; the orthogonality and completeness
    predictions assume this.
    """

    kind: str
    p1: float
    p2: float = 0.0
    zero_centered: bool = False

    @classmethod
    def uniform(cls, lo: float, hi: float, zero_centered: bool = False) -> "DistributionSpec":
        return cls("uniform", float(lo), float(hi), zero_centered)

    @classmethod
    def gaussian(cls, mean: float, sd: float, zero_centered: bool = False) -> "DistributionSpec":
        return cls("gaussian", float(mean), float(sd), zero_centered)

    @classmethod
    def poisson(cls, rate: float, zero_centered: bool = False) -> "DistributionSpec":
        return cls("poisson", float(rate), 0.0, zero_centered)

    def validate(self) -> "DistributionSpec":
        if self.kind == "uniform":
            if not self.p1 < self.p2:
                raise ParameterError(f"uniform requires lo < hi, got lo={self.p1}, hi={self.p2}")
        elif self.kind == "gaussian":
            if not self.p2 > 0:
                raise ParameterError(f"gaussian requires sd > 0, got sd={self.p2}")
        elif self.kind == "poisson":
            if not self.p1 > 0:
                raise ParameterError(f"poisson requires rate > 0, got rate={self.p1}")
        else:
            raise ParameterError(f"unknown distribution kind {self.kind!r}")
        return self

    @property
    def raw_mean(self) -> float:
        """Mean of the distribution before any zero-centering shift."""
        if self.kind == "uniform":
            return 0.5 * (self.p1 + self.p2)
        return self.p1  # gaussian mean / poisson rate

    @property
    def mean(self) -> float:
        """E[R] of the realized deviate."""
        return 0.0 if self.zero_centered else self.raw_mean

    @property
    def var(self) -> float:
        """Var[R]; unaffected by centering."""
        if self.kind == "uniform":
            return (self.p2 - self.p1) ** 2 / 12.0
        if self.kind == "gaussian":
            return self.p2**2
        return self.p1

    @property
    def var_sq(self) -> float:
        """Var[R**2] of the realized deviate, in closed form."""
        if self.kind == "uniform":
            lo, hi = self.p1, self.p2
            if self.zero_centered:
                half = 0.5 * (hi - lo)
                lo, hi = -half, half
            m2 = _uniform_moment(lo, hi, 2)
            m4 = _uniform_moment(lo, hi, 4)
            return m4 - m2 * m2
        if self.kind == "gaussian":
            mu = 0.0 if self.zero_centered else self.p1
            sd = self.p2
            return 4.0 * mu**2 * sd**2 + 2.0 * sd**4
        lam = self.p1
        if self.zero_centered:
            # central moments of Poisson: mu2 = lam, mu4 = lam + 3 lam^2
            return lam + 2.0 * lam**2
        return lam + 6.0 * lam**2 + 4.0 * lam**3

    def deviates_from_uniform(self, u: np.ndarray) -> np.ndarray:
        """Map uniform(0,1) stream values to deviates via the inverse CDF."""
        if self.kind == "uniform":
            out = self.p1 + (self.p2 - self.p1) * u
        elif self.kind == "gaussian":
            # guard the open interval; the clip alters < 2**-52 of the mass
            eps = 2.0**-53
            out = self.p1 + self.p2 * ndtri(np.clip(u, eps, 1.0 - eps))
        else:
            out = stats.poisson.ppf(u, self.p1)
        if self.zero_centered:
            out = out - self.raw_mean
        return out


def _uniform_moment(lo: float, hi: float, k: int) -> float:
    return (hi ** (k + 1) - lo ** (k + 1)) / ((k + 1) * (hi - lo))


@dataclass(frozen=True)
class RandomBasis:
    """An ordered stack of N random matrices plus its generation metadata.

    Regenerating with the same ``(n, m, N, dist, seed)`` reproduces the
    members bit-identically.
    """

    members: np.ndarray  # (N, n, m)
    dist: DistributionSpec
    seed: int | None
    pitch: float = 1.0

    def __post_init__(self):
        arr = np.ascontiguousarray(self.members, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[0] < 1:
            raise ParameterError(f"members must be a (N, n, m) stack, got shape {np.shape(self.members)}")
        object.__setattr__(self, "members", arr)

    @property
    def N(self) -> int:
        return self.members.shape[0]

    @property
    def n(self) -> int:
        return self.members.shape[1]

    @property
    def m(self) -> int:
        return self.members.shape[2]

    @property
    def nm(self) -> int:
        return self.n * self.m

    def member(self, k: int) -> ImageGrid:
        return ImageGrid(self.members[k], self.pitch)


def _uniform_stream_block(seed: int, first: int, count: int, values_per_member: int) -> np.ndarray:
    """Uniform(0,1) stream values for members [first, first+count)."""
    out = np.empty((count, values_per_member))
    k, pos = first, 0
    while pos < count:
        block = k // MEMBERS_PER_KEY
        block_start = block * MEMBERS_PER_KEY
        take = min(first + count, block_start + MEMBERS_PER_KEY) - k
        gen = Generator(Philox(key=[seed, block]))
        vals = gen.random((k - block_start + take) * values_per_member)
        out[pos : pos + take] = vals[(k - block_start) * values_per_member :].reshape(take, values_per_member)
        pos += take
        k += take
    return out


def member_block(n: int, m: int, dist: DistributionSpec, seed: int, first: int, last: int) -> np.ndarray:
    """Members [first, last) of the basis identified by (n, m, dist, seed).

    Stateless: any sub-range regenerates bit-identically, so generation can
    be chunked or distributed without affecting the result.
    """
    if n < 1 or m < 1:
        raise ParameterError(f"grid dimensions must be >= 1, got {n} x {m}")
    if not 0 <= first <= last:
        raise ParameterError(f"invalid member range [{first}, {last})")
    dist.validate()
    seed = _check_seed(seed)
    u = _uniform_stream_block(seed, first, last - first, n * m)
    return dist.deviates_from_uniform(u).reshape(last - first, n, m)


def gen_random_basis(n: int, m: int, N: int, dist: DistributionSpec, seed: int, pitch: float = 1.0) -> RandomBasis:
    """Generate N matrices of i.i.d. deviates, deterministic under ``seed``."""
    if N < 1:
        raise ParameterError(f"member count must be >= 1, got {N}")
    members = member_block(n, m, dist, seed, 0, N)
    return RandomBasis(members=members, dist=dist, seed=int(seed), pitch=pitch)


def _as_array(g) -> np.ndarray:
    return g.data if isinstance(g, ImageGrid) else np.asarray(g, dtype=np.float64)


def frobenius(a, b) -> float:
    """Frobenius inner product: sum over pixels of the elementwise product."""
    A, B = _as_array(a), _as_array(b)
    if A.shape != B.shape:
        raise ShapeError(f"shape mismatch {A.shape} vs {B.shape}")
    return float(np.sum(A * B))


@dataclass(frozen=True)
class BasisStats:
    """Empirical Frobenius-product moments of a basis, with predictions.

    The predictions hold for zero-mean elements: the expected product is
    ``nm Var[R]`` on the diagonal and 0 off it, with variances
    ``nm Var[R**2]`` and ``nm Var[R]**2`` respectively.
    """

    offdiag_mean: float
    offdiag_var: float
    diag_mean: float
    diag_var: float
    predicted_offdiag_mean: float
    predicted_offdiag_var: float
    predicted_diag_mean: float
    predicted_diag_var: float


def orthogonality_stats(basis: RandomBasis) -> BasisStats:
    """Frobenius-product statistics over all member pairs."""
    if basis.N < 2:
        raise ParameterError("orthogonality statistics need at least two members")
    v = basis.members.reshape(basis.N, -1)
    gram = v @ v.T
    off = gram[np.triu_indices(basis.N, k=1)]
    diag = np.diagonal(gram)
    nm = basis.nm
    var, var_sq = basis.dist.var, basis.dist.var_sq
    return BasisStats(
        offdiag_mean=float(off.mean()),
        offdiag_var=float(off.var(ddof=1)),
        diag_mean=float(diag.mean()),
        diag_var=float(diag.var(ddof=1)),
        predicted_offdiag_mean=0.0,
        predicted_offdiag_var=nm * var**2,
        predicted_diag_mean=nm * var,
        predicted_diag_var=nm * var_sq,
    )


def _require_zero_mean(dist: DistributionSpec, what: str):
    if dist.mean != 0.0:
        raise ParameterError(f"{what} requires a zero-centered distribution (E[R] = 0)")


def completeness_map(basis: RandomBasis, i: int, j: int) -> ImageGrid:
    """Finite-N completeness sum anchored at pixel (i, j).

    Returns the grid ``(1/(N Var[R])) sum_k R_k(i,j) R_k(i',j')`` over all
    (i', j'), which approximates a Kronecker delta at (i, j): unit mean at
    the anchor, variance Var[R**2]/(N Var[R]**2) there and 1/N elsewhere.
    """
    if not (0 <= i < basis.n and 0 <= j < basis.m):
        raise IndexError(f"pixel ({i}, {j}) outside {basis.n} x {basis.m} grid")
    _require_zero_mean(basis.dist, "the completeness relation")
    anchor = basis.members[:, i, j]
    out = np.einsum("k,kab->ab", anchor, basis.members) / (basis.N * basis.dist.var)
    return ImageGrid(out, basis.pitch)


def synthesize(f: ImageGrid, basis: RandomBasis):
    """Approximate ``f`` as a weighted sum of the basis members.

    The weights are the Frobenius products ``w_k = <f, R_k>`` and the
    synthesis is ``(1/(N Var[R])) sum_k w_k R_k``.  Returns the synthesized
    grid and the weight vector.
    """
    if (basis.n, basis.m) != (f.n, f.m):
        raise ShapeError(f"basis members are {basis.n} x {basis.m}, target is {f.n} x {f.m}")
    _require_zero_mean(basis.dist, "random-basis synthesis")
    if not basis.dist.var > 0:
        raise ParameterError("degenerate distribution: Var[R] must be positive")
    v = basis.members.reshape(basis.N, -1)
    w = v @ f.data.ravel()
    rec = (w @ v).reshape(f.n, f.m) / (basis.N * basis.dist.var)
    return ImageGrid(rec, f.pitch), w


def synthesis_variance(f: ImageGrid, dist: DistributionSpec, N: int):
    """Predicted per-pixel variance of an N-member synthesis of ``f``.

    Returns the exact variance map
    ``( <f^2> - f^2 + f^2 Var[R^2]/Var[R]^2 ) / N`` together with the
    distribution-independent large-N approximation ``<f^2>/N``.
    """
    if N < 1:
        raise ParameterError(f"member count must be >= 1, got {N}")
    dist.validate()
    f2 = f.data**2
    total = float(np.sum(f2))
    ratio = dist.var_sq / dist.var**2
    exact = (total - f2 + f2 * ratio) / N
    return ImageGrid(exact, f.pitch), total / N


@dataclass(frozen=True)
class SnrPrediction:
    """Predicted reconstruction SNR for an N-member synthesis.

    ``uncertainty_product`` is snr_global**2 * nm, which equals N: the
    trade-off between pixel count and measurement count.
    """

    snr_map: ImageGrid
    snr_global: float
    uncertainty_product: float


def predict_snr(f: ImageGrid, N: int) -> SnrPrediction:
    """Local and global SNR of an N-member non-orthogonal synthesis."""
    if N < 1:
        raise ParameterError(f"member count must be >= 1, got {N}")
    total = float(np.sum(f.data**2))
    if total == 0.0:
        raise ParameterError("SNR is undefined for an identically zero target")
    noise = math.sqrt(total / N)
    snr_global = math.sqrt(N / f.nm)
    return SnrPrediction(
        snr_map=ImageGrid(f.data / noise, f.pitch),
        snr_global=snr_global,
        # exactly N by the identity (N/nm) * nm; kept in float for reporting
        uncertainty_product=float(N),
    )


@dataclass(frozen=True)
class ErgodicityReport:
    """Worst deviations of member statistics from the analytic moments.

    ``*_se`` values are in units of the corresponding standard error,
    ``*_abs`` are raw.  A zero-variance (atomic) distribution with exactly
    constant members reports all deviations as 0.
    """

    spatial_mean_se: float
    spatial_var_se: float
    ensemble_mean_se: float
    ensemble_var_se: float
    spatial_mean_abs: float
    spatial_var_abs: float
    ensemble_mean_abs: float
    ensemble_var_abs: float

    @property
    def max_se(self) -> float:
        return max(self.spatial_mean_se, self.spatial_var_se, self.ensemble_mean_se, self.ensemble_var_se)


def _se_score(max_abs_dev: float, se: float) -> float:
    if max_abs_dev == 0.0:
        return 0.0
    if se == 0.0:
        return math.inf
    return max_abs_dev / se


def ergodicity_check(basis: RandomBasis) -> ErgodicityReport:
    """Compare spatial and ensemble moments of the members to the analytic ones.

    Spatial statistics are taken over the pixels of each member, ensemble
    statistics over the members at each pixel; both should estimate the same
    E[R] and Var[R].
    """
    if basis.N < 2 or basis.nm < 2:
        raise ParameterError("ergodicity check needs N >= 2 members and nm >= 2 pixels")
    dist = basis.dist
    mu, var, var_sq = dist.mean, dist.var, dist.var_sq
    v = basis.members.reshape(basis.N, -1)

    sp_mean = np.abs(v.mean(axis=1) - mu).max()
    sp_var = np.abs(v.var(axis=1) - var).max()
    en_mean = np.abs(v.mean(axis=0) - mu).max()
    en_var = np.abs(v.var(axis=0) - var).max()

    se_mean_sp = math.sqrt(var / basis.nm)
    se_var_sp = math.sqrt(var_sq / basis.nm)
    se_mean_en = math.sqrt(var / basis.N)
    se_var_en = math.sqrt(var_sq / basis.N)

    return ErgodicityReport(
        spatial_mean_se=_se_score(sp_mean, se_mean_sp),
        spatial_var_se=_se_score(sp_var, se_var_sp),
        ensemble_mean_se=_se_score(en_mean, se_mean_en),
        ensemble_var_se=_se_score(en_var, se_var_en),
        spatial_mean_abs=float(sp_mean),
        spatial_var_abs=float(sp_var),
        ensemble_mean_abs=float(en_mean),
        ensemble_var_abs=float(en_var),
    )
