import numpy as np
import pytest

from ghostlab import (ImageGrid, IndependentMaskSource, ParameterError, SpeckleMaskSource,
                      bucket_series, gi_standard, standard_ghost_stream)
from conftest import make_texture


class TestStandardStream:
    def test_matches_in_memory_formula(self):
        target = make_texture(8, 8)
        source = IndependentMaskSource(8, 8, seed=2)
        count = 500
        masks = source.realize(count)
        run = standard_ghost_stream(target, source.block, count)
        reference = gi_standard(bucket_series(target, masks), masks,
                                float(np.var(masks.masks)))
        assert np.abs(run.recon.data - reference.data).max() < 1e-10
        assert run.intensity_variance == pytest.approx(float(np.var(masks.masks)), rel=1e-12)

    def test_chunking_invisible(self):
        # counts straddling the fixed chunk length agree with a small rerun
        target = make_texture(4, 4)
        source = IndependentMaskSource(4, 4, seed=5)
        a = standard_ghost_stream(target, source.block, 2048 + 13)
        b = standard_ghost_stream(target, source.block, 2048 + 13)
        assert a.recon.data.tobytes() == b.recon.data.tobytes()

    def test_noise_seed_deterministic(self):
        target = make_texture(4, 4)
        source = SpeckleMaskSource.build(4, 4, 64, seed=3, pad=8)
        a = standard_ghost_stream(target, source.block, 64, lambda_tilde=1e4, noise_seed=9)
        b = standard_ghost_stream(target, source.block, 64, lambda_tilde=1e4, noise_seed=9)
        c = standard_ghost_stream(target, source.block, 64, lambda_tilde=1e4, noise_seed=10)
        assert a.recon.data.tobytes() == b.recon.data.tobytes()
        assert a.recon.data.tobytes() != c.recon.data.tobytes()

    def test_noisy_run_converges_to_ideal(self):
        target = make_texture(6, 6)
        source = IndependentMaskSource(6, 6, seed=7)
        ideal = standard_ghost_stream(target, source.block, 400)
        nearly = standard_ghost_stream(target, source.block, 400,
                                       lambda_tilde=1e12, noise_seed=1)
        assert np.abs(ideal.recon.data - nearly.recon.data).max() < 1e-3

    def test_needs_two_masks(self):
        target = make_texture(4, 4)
        source = IndependentMaskSource(4, 4, seed=0)
        with pytest.raises(ParameterError):
            standard_ghost_stream(target, source.block, 1)
