"""Strictly orthonormal bases derived from realized random ones.

Orthonormalization runs through Householder-reflector QR on the matrix of
vectorized members (classical Gram-Schmidt is kept only as a test oracle
in the test suite, since it is less stable).  The triangular factor is
retained so weights measured against the source members can be transformed
into weights against the orthonormal members without re-measuring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DependenceError, ParameterError, ShapeError
from .grid import ImageGrid
from .randbasis import DistributionSpec, RandomBasis, member_block

__all__ = [
    "OrthonormalBasis",
    "orthonormalize",
    "transform_weights",
    "project_weights",
    "reconstruct_gs",
    "predict_variance_gs",
]

# Columns whose residual against the span of earlier columns is below this
# multiple of their input norm are flagged as dependent.
RANK_TOLERANCE = 1e-12


@dataclass(frozen=True)
class OrthonormalBasis:
    """An ordered orthonormal stack under the Frobenius product.

    Member k is a combination of input columns 1..k only.  When
    ``augmented``, member 0 is the constant ``1/sqrt(nm)`` grid that was
    prepended before orthonormalization, so a single measurement against it
    captures the spatial mean of a target.  ``rfactor`` is the triangular
    QR factor mapping input columns to members.
    """

    members: np.ndarray  # (N, n, m)
    augmented: bool
    source_dist: DistributionSpec | None = None
    source_seed: int | None = None
    pitch: float = 1.0
    rfactor: np.ndarray | None = None

    def __post_init__(self):
        arr = np.ascontiguousarray(self.members, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[0] < 1:
            raise ParameterError(f"members must be a (N, n, m) stack, got shape {np.shape(self.members)}")
        if arr.shape[0] > arr.shape[1] * arr.shape[2]:
            raise ParameterError(f"cannot have more than nm = {arr.shape[1] * arr.shape[2]} orthonormal members")
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


def _member_stack(basis) -> np.ndarray:
    if isinstance(basis, RandomBasis):
        return basis.members
    arr = np.ascontiguousarray(basis, dtype=np.float64)
    if arr.ndim != 3:
        raise ParameterError(f"expected a RandomBasis or a (N, n, m) stack, got shape {np.shape(basis)}")
    return arr


def orthonormalize(basis, augment_constant: bool = False) -> OrthonormalBasis:
    """Orthonormalize a realized basis, optionally prepending the constant.

    Order-preserving: output member k lies in the span of inputs 1..k.
    With ``augment_constant`` the constant ``1/sqrt(nm)`` grid becomes
    member 0 and the inputs may number at most nm - 1.

    Raises :class:`DependenceError` naming the offending column when an
    input is numerically dependent on earlier ones.
    """
    members = _member_stack(basis)
    n_in, n, m = members.shape
    nm = n * m
    cap = nm - 1 if augment_constant else nm
    if n_in > cap:
        raise ParameterError(f"at most {cap} input members fit an orthonormal set on {n} x {m}"
                             + (" with the constant prepended" if augment_constant else ""))

    cols = members.reshape(n_in, nm).T
    if augment_constant:
        cols = np.column_stack([np.full(nm, nm**-0.5), cols])
    norms = np.linalg.norm(cols, axis=0)

    q, r = np.linalg.qr(cols, mode="reduced")
    sign = np.sign(np.diagonal(r)).copy()
    sign[sign == 0] = 1.0
    q = q * sign
    r = sign[:, None] * r

    residual = np.abs(np.diagonal(r)) / np.where(norms > 0, norms, 1.0)
    dependent = np.flatnonzero(residual < RANK_TOLERANCE)
    if dependent.size:
        k = int(dependent[0])
        raise DependenceError(k, f"input member {k} is linearly dependent on earlier members "
                                 f"(residual {residual[k]:.3e} of its norm)")

    out = np.ascontiguousarray(q.T.reshape(-1, n, m))
    if augment_constant:
        out[0] = nm**-0.5  # exact constant member

    if isinstance(basis, RandomBasis):
        dist, seed, pitch = basis.dist, basis.seed, basis.pitch
    else:
        dist, seed, pitch = None, None, 1.0
    return OrthonormalBasis(out, augment_constant, dist, seed, pitch, rfactor=r)


def project_weights(onb: OrthonormalBasis, weights) -> np.ndarray:
    """Weights against the orthonormal members, from weights against the inputs.

    ``weights[k]`` must be the Frobenius product of the target with input
    column k (the constant column first for augmented sets).
    """
    if onb.rfactor is None:
        raise ParameterError("this basis carries no triangular factor; recompute via orthonormalize()")
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (onb.N,):
        raise ShapeError(f"expected {onb.N} weights (constant column first for augmented sets), got {w.shape}")
    return solve_triangular(onb.rfactor, w, trans="T", lower=False)


def transform_weights(weights, basis, onb: OrthonormalBasis) -> np.ndarray:
    """Transform source-basis weights ``<f, R_k>`` into orthonormal weights.

    The result equals the direct projections ``<f, Rt_k>`` of the same
    target onto the orthonormal members.  For augmented sets the constant
    column's weight ``<f, 1/sqrt(nm)>`` leads the vector.
    """
    w = np.asarray(weights, dtype=np.float64)
    if basis is not None:
        expected_cols = basis.N + 1 if onb.augmented else basis.N
        if expected_cols != onb.N:
            raise ShapeError(f"basis has {basis.N} members but the orthonormal set was built from {onb.N} columns")
    if w.ndim != 1 or w.size != onb.N:
        raise ShapeError(f"expected {onb.N} weights, got {w.size}"
                         + (" (prepend the constant column's weight)" if onb.augmented else ""))
    return project_weights(onb, w)


def reconstruct_gs(f: ImageGrid, onb: OrthonormalBasis, N: int | None = None,
                   *, trials: int = 1, trial_seed: int = 0) -> ImageGrid:
    """Project ``f`` onto the first N orthonormal members.

    With N = nm the reconstruction is exact.  For incomplete sets the
    result depends on the order in which the source members were
    orthonormalized; ``trials > 1`` averages reconstructions over that many
    random orderings of the regenerated source members (requires generation
    metadata on the basis), which reduces the projection noise.
    """
    N = onb.N if N is None else int(N)
    if not 1 <= N <= onb.N:
        raise ParameterError(f"N must be in [1, {onb.N}], got {N}")
    if (onb.n, onb.m) != (f.n, f.m):
        raise ShapeError(f"basis members are {onb.n} x {onb.m}, target is {f.n} x {f.m}")
    if trials == 1:
        v = onb.members[:N].reshape(N, -1)
        coeffs = v @ f.data.ravel()
        return ImageGrid((coeffs @ v).reshape(f.n, f.m), f.pitch)

    if onb.source_dist is None or onb.source_seed is None:
        raise ParameterError("ordering trials require a basis built from generated members")
    n_inputs = onb.N - 1 if onb.augmented else onb.N
    source = member_block(onb.n, onb.m, onb.source_dist, onb.source_seed, 0, n_inputs)
    rng = np.random.default_rng(trial_seed)
    acc = np.zeros((f.n, f.m))
    for _ in range(trials):
        perm = rng.permutation(n_inputs)
        shuffled = orthonormalize(source[perm], augment_constant=onb.augmented)
        acc += reconstruct_gs(f, shuffled, N).data
    return ImageGrid(acc / trials, f.pitch)


def predict_variance_gs(f: ImageGrid, N: int):
    """Variance model for an N-member orthonormal reconstruction of ``f``.

    Interpolates linearly between the single-constant-member case, whose
    per-pixel deviation power is the spatial variance Var[f], and the
    complete case with zero deviation.  Returns ``(variance, snr)`` with
    ``snr = sqrt(<f^2> / (Var[f] (nm - N)))``; at N = nm the variance is 0
    and the SNR is reported as infinity.
    """
    nm = f.nm
    if not 1 <= N <= nm:
        raise ParameterError(f"N must be in [1, nm = {nm}], got {N}")
    fbar = f.data.mean()
    var_f = float(np.mean((f.data - fbar) ** 2))
    var = var_f * (1.0 - N / nm)
    if N == nm or var_f == 0.0:
        return 0.0 if N == nm else var, math.inf
    total = float(np.sum(f.data**2))
    snr = math.sqrt(total / (var_f * (nm - N)))
    return var, snr
