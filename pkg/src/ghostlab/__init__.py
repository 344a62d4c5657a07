"""Random-matrix-basis signal synthesis and x-ray differential
phase-contrast computational ghost imaging."""

__version__ = "0.1.0"

from .errors import (DependenceError, FormatError, GhostLabError, ParameterError,
                     ShapeError)
from .grid import ImageGrid, constant_grid, diff_x_periodic, pixel_centers
from .randbasis import (BasisStats, DistributionSpec, ErgodicityReport, RandomBasis,
                        SnrPrediction, completeness_map, ergodicity_check, frobenius,
                        gen_random_basis, member_block, orthogonality_stats,
                        predict_snr, synthesis_variance, synthesize)
from .orthonorm import (OrthonormalBasis, orthonormalize, predict_variance_gs,
                        project_weights, reconstruct_gs, transform_weights)
from .ghostcore import (BucketSeries, MaskSet, bucket, bucket_series, gi_orthonormal,
                        gi_standard, to_masks)
from .dose import (DoseReport, GhostVariance, acquire_ideal_buckets,
                   acquire_noisy_buckets, bucket_noisy,
                   direct_image_noisy, direct_variance, dose_inequality,
                   ghost_variance, incident_illumination)
from .xpci import (MATERIALS, EllipsoidSpec, IndependentMaskSource, LinearityWarning,
                   Material, PCCGIConstants, Phantom, RockingCurve, SpeckleMaskSource,
                   bucket_shot_noise, expected_pccgi, forward_intensity,
                   independent_masks, linearize_rocking, load_materials_csv,
                   mask_upstream_bucket, material_delta, pccgi_bucket,
                   pccgi_reconstruct, pearson_vii, phantom_ellipsoids, speckle_masks,
                   thickness_from_intensity)
from .inverse import FilterSpec, InversionResult, filter_image, filter_response, invert_pccgi
from .pipeline import StandardRun, standard_ghost_stream
from .cliio import load_grid, save_grid, sha256_array, sha256_file, write_manifest
