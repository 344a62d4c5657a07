"""Ghost-imaging core: masks, bucket acquisition, reconstruction formulas.

A bucket detector records the Frobenius product of the target with an
illumination mask; an image is synthesized by correlating the bucket
series against the known masks (standard formula) or by expanding it over
an orthonormal mask basis (exact with a complete set).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ShapeError
from .grid import ImageGrid
from .orthonorm import OrthonormalBasis
from .randbasis import frobenius

__all__ = [
    "MaskSet",
    "BucketSeries",
    "to_masks",
    "bucket",
    "bucket_series",
    "gi_standard",
    "gi_orthonormal",
]

# Fixed chunk length for parallel bucket acquisition; results are identical
# for any worker count because chunk boundaries never depend on it.
BUCKET_CHUNK = 256


@dataclass(frozen=True)
class MaskSet:
    """Non-negative intensity masks in [0, 1] plus their mapping metadata.

    For basis-mapped sets each mask is the affine image
    ``(member - min) / xi`` of the corresponding orthonormal member, with
    ``min``/``max`` the global extremes over all members, ``xi = max - min``
    and ``eta = min / (1/sqrt(nm) - min)`` when the source set carries the
    constant first member.
    """

    masks: np.ndarray  # (N, n, m)
    min: float
    max: float
    xi: float
    eta: float | None
    source: str
    pitch: float = 1.0

    def __post_init__(self):
        arr = np.ascontiguousarray(self.masks, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[0] < 1:
            raise ParameterError(f"masks must be a (N, n, m) stack, got shape {np.shape(self.masks)}")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ParameterError(f"mask values must lie in [0, 1], got [{arr.min()}, {arr.max()}]")
        if not self.xi > 0:
            raise ParameterError(f"xi must be positive, got {self.xi}")
        object.__setattr__(self, "masks", arr)

    @property
    def N(self) -> int:
        return self.masks.shape[0]

    @property
    def n(self) -> int:
        return self.masks.shape[1]

    @property
    def m(self) -> int:
        return self.masks.shape[2]

    @property
    def nm(self) -> int:
        return self.n * self.m

    def mask(self, k: int) -> ImageGrid:
        return ImageGrid(self.masks[k], self.pitch)


@dataclass(frozen=True)
class BucketSeries:
    """One bucket reading per mask; ``lambda_tilde`` is the imaging-quanta
    scale of the acquisition (None for ideal, noise-free readings)."""

    values: np.ndarray
    lambda_tilde: float | None = None
    seed: int | None = None

    def __post_init__(self):
        arr = np.ascontiguousarray(self.values, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise ParameterError("bucket series must be a non-empty vector")
        if not np.all(np.isfinite(arr)):
            raise ParameterError("bucket readings must be finite")
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.values.size


def to_masks(onb: OrthonormalBasis) -> MaskSet:
    """Map orthonormal members to [0, 1] intensity masks.

    The affine map uses the global min/max over all members, so it is
    invertible from the recorded metadata: ``xi * mask + min`` reproduces
    the member.
    """
    lo = float(onb.members.min())
    hi = float(onb.members.max())
    if not hi > lo:
        raise ParameterError("degenerate member range: max must exceed min")
    xi = hi - lo
    masks = (onb.members - lo) / xi
    eta = lo / (onb.nm**-0.5 - lo) if onb.augmented else None
    return MaskSet(masks=masks, min=lo, max=hi, xi=xi, eta=eta,
                   source="orthonormal-basis-mapped", pitch=onb.pitch)


def bucket(f: ImageGrid, mask: ImageGrid) -> float:
    """Ideal bucket reading: the Frobenius product of target and mask."""
    return frobenius(f, mask)


def bucket_series(f: ImageGrid, masks: MaskSet, workers: int = 1) -> BucketSeries:
    """Ideal bucket readings for every mask in the set.

    Acquisition is embarrassingly parallel over masks; chunks are fixed so
    the result is bitwise independent of ``workers``.
    """
    if (masks.n, masks.m) != (f.n, f.m):
        raise ShapeError(f"masks are {masks.n} x {masks.m}, target is {f.n} x {f.m}")
    flat = masks.masks.reshape(masks.N, -1)
    target = f.data.ravel()
    out = np.empty(masks.N)
    starts = range(0, masks.N, BUCKET_CHUNK)

    def run(start):
        stop = min(start + BUCKET_CHUNK, masks.N)
        out[start:stop] = flat[start:stop] @ target

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, starts))
    else:
        for start in starts:
            run(start)
    return BucketSeries(out)


def gi_standard(buckets: BucketSeries, masks: MaskSet, normalization: float) -> ImageGrid:
    """Standard correlation reconstruction.

    ``(1/(N normalization)) sum_k (B_k - mean(B)) I_k``, with the empirical
    mean of the acquired series standing in for the bucket expectation.
    The normalization constant is context-dependent and supplied by the
    caller (e.g. the variance of the mask-intensity ensemble).
    """
    if len(buckets) != masks.N:
        raise ShapeError(f"{len(buckets)} buckets for {masks.N} masks")
    if masks.N < 2:
        raise ParameterError("mean subtraction needs at least two buckets")
    if not normalization > 0:
        raise ParameterError(f"normalization must be positive, got {normalization}")
    centered = buckets.values - buckets.values.mean()
    img = (centered @ masks.masks.reshape(masks.N, -1)).reshape(masks.n, masks.m)
    return ImageGrid(img / (masks.N * normalization), masks.pitch)


def gi_orthonormal(buckets: BucketSeries, onb: OrthonormalBasis, eta: float) -> ImageGrid:
    """Orthonormal-basis reconstruction from basis-mapped mask buckets.

    ``U = sum_k (B_k + eta B_1) Rt_k``; the eta term restores the spatial
    mean swallowed by the affine mask mapping, so with ideal buckets and a
    complete set U reproduces the target exactly.
    """
    if not onb.augmented:
        raise ParameterError("orthonormal reconstruction requires the augmented constant first member")
    if len(buckets) != onb.N:
        raise ShapeError(f"{len(buckets)} buckets for {onb.N} members")
    coeffs = buckets.values + eta * buckets.values[0]
    img = (coeffs @ onb.members.reshape(onb.N, -1)).reshape(onb.n, onb.m)
    return ImageGrid(img, onb.pitch)
