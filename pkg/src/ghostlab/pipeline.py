"""End-to-end simulation drivers.

The streaming standard-formula reconstruction accumulates the correlation
sums chunk by chunk, so acquisitions with hundreds of thousands of masks
run in bounded memory.  Chunk boundaries are fixed constants, which keeps
every run bit-reproducible for a given seed regardless of how the work is
scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox

from .errors import ParameterError, ShapeError
from .grid import ImageGrid

__all__ = ["StandardRun", "standard_ghost_stream"]

STREAM_CHUNK = 2048


@dataclass(frozen=True)
class StandardRun:
    """Streaming standard-formula reconstruction and its acquisition stats."""

    recon: ImageGrid
    mask_count: int
    intensity_variance: float
    bucket_mean: float
    lambda_tilde: float | None


def standard_ghost_stream(target: ImageGrid, mask_block, count: int, *,
                          lambda_tilde: float | None = None,
                          noise_seed: int = 0) -> StandardRun:
    """Standard-formula ghost reconstruction without realizing all masks.

    ``mask_block(k0, k1)`` must return the intensity masks [k0, k1) as a
    stack in [0, 1].  Buckets are the Frobenius products with ``target``;
    with ``lambda_tilde`` set they are Poisson-degraded at the per-mask
    quanta scale ``lambda_tilde * <I_k>``.  The reconstruction is
    ``(1/(N var[I])) sum_k (B_k - mean B) I_k`` with the empirical
    mask-intensity variance as normalization, identical to the in-memory
    formula.
    """
    if count < 2:
        raise ParameterError("streaming reconstruction needs at least two masks")
    flat_target = target.data.ravel()
    nm = flat_target.size

    sum_bi = np.zeros(nm)
    sum_i = np.zeros(nm)
    sum_b = 0.0
    sum_i1 = 0.0
    sum_i2 = 0.0

    for chunk_index, k0 in enumerate(range(0, count, STREAM_CHUNK)):
        k1 = min(k0 + STREAM_CHUNK, count)
        masks = np.asarray(mask_block(k0, k1), dtype=np.float64)
        if masks.shape[1:] != target.data.shape:
            raise ShapeError(f"mask block is {masks.shape[1:]}, target is {target.data.shape}")
        flat = masks.reshape(masks.shape[0], nm)
        buckets = flat @ flat_target
        if lambda_tilde is not None:
            scale = lambda_tilde * flat.sum(axis=1)
            rng = Generator(Philox(key=[int(noise_seed), chunk_index]))
            buckets = rng.poisson(buckets * scale) / scale
        sum_bi += buckets @ flat
        sum_i += flat.sum(axis=0)
        sum_b += float(buckets.sum())
        sum_i1 += float(flat.sum())
        sum_i2 += float((flat * flat).sum())

    total = count * nm
    mean_i = sum_i1 / total
    var_i = sum_i2 / total - mean_i * mean_i
    if not var_i > 0:
        raise ParameterError("degenerate mask ensemble: zero intensity variance")
    bucket_mean = sum_b / count
    recon = (sum_bi - bucket_mean * sum_i) / (count * var_i)
    return StandardRun(
        recon=ImageGrid(recon.reshape(target.data.shape), target.pitch),
        mask_count=count,
        intensity_variance=float(var_i),
        bucket_mean=float(bucket_mean),
        lambda_tilde=lambda_tilde,
    )
