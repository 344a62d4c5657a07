"""X-ray differential phase-contrast ghost-imaging physics.

Forward chain: a single-material sample of projected thickness T (mm)
refracts the beam by ``delta dT/dx`` radians; an analyzer crystal with a
linearized rocking curve converts that angle to intensity
``I0 exp(-mu T)(alpha + beta delta dT/dx)``; a known speckle mask then
attenuates the field before a bucket detector integrates it.

Units: thicknesses and pitches in mm, attenuation in 1/mm, rocking-curve
angles in microradians with the slope ``beta`` stored per radian so the
phase term ``beta * delta * dT/dx`` is dimensionless.
"""

from __future__ import annotations

import csv as _csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox
from scipy.ndimage import gaussian_filter

from .errors import FormatError, ParameterError, ShapeError
from .ghostcore import BucketSeries, MaskSet, gi_standard
from .grid import ImageGrid, diff_x_periodic, pixel_centers
from .orthonorm import orthonormalize, project_weights
from .randbasis import DistributionSpec, member_block

__all__ = [
    "Material",
    "MATERIALS",
    "load_materials_csv",
    "material_delta",
    "RockingCurve",
    "pearson_vii",
    "linearize_rocking",
    "EllipsoidSpec",
    "Phantom",
    "phantom_ellipsoids",
    "PCCGIConstants",
    "LinearityWarning",
    "forward_intensity",
    "SpeckleMaskSource",
    "IndependentMaskSource",
    "speckle_masks",
    "independent_masks",
    "thickness_from_intensity",
    "pccgi_bucket",
    "bucket_shot_noise",
    "expected_pccgi",
    "pccgi_reconstruct",
    "mask_upstream_bucket",
]

# Physical constants (one table, shared by every computation).
R0_ELECTRON_M = 2.8179403e-15     # classical electron radius
AVOGADRO = 6.0221408e23           # 1/mol
HC_KEV_NM = 1.23984193            # photon energy-wavelength product

# The built-in material table mixes two tabulation energies on purpose:
# mass attenuation is listed at 40 keV while the form factors f1 were read
# at the nearby tabulation point below.  Both energies are recorded here.
F1_TABLE_ENERGY_KEV = 39.19543
MU_TABLE_ENERGY_KEV = 40.0


@dataclass(frozen=True)
class Material:
    """Tabulated constants of a uniform material at hard-x-ray energies."""

    name: str
    Z: int
    M_A: float          # molar mass, g/mol
    mu_over_rho: float  # mass attenuation, cm^2/g
    rho: float          # density, g/cm^3
    f1: float           # atomic form factor, dimensionless

    @property
    def mu_mm(self) -> float:
        """Linear attenuation coefficient in 1/mm."""
        return self.mu_over_rho * self.rho / 10.0

    def delta(self, energy_keV: float = F1_TABLE_ENERGY_KEV) -> float:
        return material_delta(self, energy_keV)


MATERIALS = {
    "carbon": Material("carbon", 6, 12.011, 0.2076, 1.700, 6.00115),
    "aluminium": Material("aluminium", 13, 26.982, 0.5685, 2.699, 13.0206),
    "copper": Material("copper", 29, 63.546, 4.862, 8.960, 29.2497),
    "gold": Material("gold", 79, 196.966, 12.98, 19.32, 79.1108),
}


def load_materials_csv(path) -> dict:
    """Material table from a CSV with columns name,Z,M_A,mu_over_rho,rho,f1."""
    required = ["name", "Z", "M_A", "mu_over_rho", "rho", "f1"]
    out = {}
    with open(path, newline="") as fh:
        reader = _csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != required:
            raise FormatError(f"{path}: expected columns {','.join(required)}, got {reader.fieldnames}")
        for row_no, row in enumerate(reader, start=2):
            try:
                mat = Material(row["name"].strip(), int(row["Z"]), float(row["M_A"]),
                               float(row["mu_over_rho"]), float(row["rho"]), float(row["f1"]))
            except (TypeError, ValueError) as exc:
                raise FormatError(f"{path}: bad material row {row_no}: {exc}") from exc
            out[mat.name] = mat
    if not out:
        raise FormatError(f"{path}: no material rows")
    return out


def material_delta(mat: Material, energy_keV: float = F1_TABLE_ENERGY_KEV) -> float:
    """Refractive-index decrement ``delta = n_a r0 lambda^2 f1 / (2 pi)``.

    The atom number density is ``rho N_A / M_A`` and the wavelength comes
    from the photon energy; everything is evaluated in cm before the
    dimensionless result.
    """
    if not energy_keV > 0:
        raise ParameterError(f"photon energy must be positive, got {energy_keV}")
    lam_cm = HC_KEV_NM / energy_keV * 1e-7
    n_a = mat.rho * AVOGADRO / mat.M_A  # 1/cm^3
    r0_cm = R0_ELECTRON_M * 100.0
    return n_a * r0_cm * lam_cm**2 * mat.f1 / (2.0 * math.pi)


@dataclass(frozen=True)
class RockingCurve:
    """Pearson VII reflectivity profile and its linearization.

    ``R(theta) = R0 (1 + theta^2/(M a^2))^-M`` with theta the angular
    detuning in microradians; ``alpha``/``beta_per_rad`` are the value and
    slope at the working point ``theta0_urad``, the slope converted to
    per-radian so it can multiply refraction angles directly.
    """

    R0: float
    M: float
    a_urad: float
    theta0_urad: float
    alpha: float
    beta_per_rad: float

    def __post_init__(self):
        if not (self.R0 > 0 and self.M > 0 and self.a_urad > 0):
            raise ParameterError("rocking-curve parameters R0, M, a must be positive")


def pearson_vii(theta_urad: float, rc: RockingCurve) -> float:
    """Reflectivity at angular detuning ``theta_urad``; even in theta."""
    return rc.R0 * (1.0 + theta_urad**2 / (rc.M * rc.a_urad**2)) ** (-rc.M)


def linearize_rocking(R0: float, M: float, a_urad: float, relative_reflectivity: float,
                      side: int = 1) -> RockingCurve:
    """Linearize the Pearson VII profile at a chosen relative reflectivity.

    The working point solves ``R(theta0)/R0 = relative_reflectivity`` in
    closed form; ``side`` picks the flank (+1 gives theta0 > 0 and a
    negative slope, -1 mirrors the edge polarity).
    """
    if not (R0 > 0 and M > 0 and a_urad > 0):
        raise ParameterError("rocking-curve parameters R0, M, a must be positive")
    if not 0.0 < relative_reflectivity < 1.0:
        raise ParameterError(f"relative reflectivity must be in (0, 1), got {relative_reflectivity}")
    if side not in (1, -1):
        raise ParameterError(f"side must be +1 or -1, got {side}")
    theta0 = side * a_urad * math.sqrt(M * (relative_reflectivity ** (-1.0 / M) - 1.0))
    shape = 1.0 + theta0**2 / (M * a_urad**2)
    alpha = R0 * shape**-M
    beta_per_urad = -(2.0 * theta0 * R0 / a_urad**2) * shape ** (-M - 1.0)
    return RockingCurve(R0=R0, M=M, a_urad=a_urad, theta0_urad=theta0,
                        alpha=alpha, beta_per_rad=beta_per_urad * 1e6)


@dataclass(frozen=True)
class EllipsoidSpec:
    """One projected ellipsoid: centre (mm), scale and radius (mm)."""

    cx: float
    cy: float
    aleph: float
    r: float

    def __post_init__(self):
        if not (self.aleph > 0 and self.r > 0):
            raise ParameterError("ellipsoid scale and radius must be positive")


@dataclass(frozen=True)
class Phantom:
    """Projected thickness map (mm) of a collection of ellipsoids."""

    thickness: ImageGrid
    ellipsoids: tuple = ()

    @property
    def n(self) -> int:
        return self.thickness.n

    @property
    def m(self) -> int:
        return self.thickness.m

    @property
    def pitch(self) -> float:
        return self.thickness.pitch


def phantom_ellipsoids(n: int, m: int, pitch: float, specs) -> Phantom:
    """Projected thickness ``2 Re sqrt((r/aleph)^2 - (y/aleph)^2 - (x/aleph)^2)``.

    Evaluated at pixel centres on a grid centred at the origin; the
    real-part convention zeroes the exterior, and overlapping ellipsoids
    add their thicknesses.
    """
    specs = tuple(specs)
    if not specs:
        raise ParameterError("at least one ellipsoid is required")
    x, y = pixel_centers(n, m, pitch)
    xx, yy = np.meshgrid(x, y)
    total = np.zeros((n, m))
    for s in specs:
        if not isinstance(s, EllipsoidSpec):
            s = EllipsoidSpec(*s)
        arg = (s.r / s.aleph) ** 2 - ((yy - s.cy) / s.aleph) ** 2 - ((xx - s.cx) / s.aleph) ** 2
        total += 2.0 * np.sqrt(np.maximum(arg, 0.0))
    return Phantom(ImageGrid(total, pitch), specs)


@dataclass(frozen=True)
class PCCGIConstants:
    """The two constants of the expected phase-contrast image:
    ``C (1 - G d/dx) exp(-mu T)`` with C dimensionless and G in mm."""

    C: float
    G_mm: float

    def __post_init__(self):
        if not self.C > 0:
            raise ParameterError(f"C must be positive, got {self.C}")
        if not math.isfinite(self.G_mm):
            raise ParameterError("G must be finite")

    @classmethod
    def from_model(cls, rc: RockingCurve, delta: float, mu_mm: float) -> "PCCGIConstants":
        return cls(C=rc.alpha, G_mm=rc.beta_per_rad * delta / (mu_mm * rc.alpha))


class LinearityWarning(UserWarning):
    """The sample's refraction left the linear band of the rocking curve."""


def _phase_bracket(thickness: ImageGrid, delta: float, rc: RockingCurve, clamp: bool) -> np.ndarray:
    tx = diff_x_periodic(thickness.data, thickness.pitch)
    bracket = rc.alpha + rc.beta_per_rad * delta * tx
    if clamp:
        negative = int(np.count_nonzero(bracket < 0.0))
        if negative:
            warnings.warn(LinearityWarning(
                f"{negative} pixels fell below zero reflectivity and were clamped; "
                "the refraction angles leave the linear band"))
            bracket = np.maximum(bracket, 0.0)
    return bracket


def forward_intensity(phantom: Phantom, mat: Material, rc: RockingCurve, i0: float = 1.0) -> ImageGrid:
    """Analyzer-filtered intensity ``I0 exp(-mu T)(alpha + beta delta dT/dx)``.

    Negative reflectivity brackets are clamped to zero with a
    :class:`LinearityWarning` carrying the pixel count.
    """
    if not i0 > 0:
        raise ParameterError(f"input intensity must be positive, got {i0}")
    t = phantom.thickness
    bracket = _phase_bracket(t, material_delta(mat), rc, clamp=True)
    return ImageGrid(i0 * np.exp(-mat.mu_mm * t.data) * bracket, t.pitch)


def _intensity_mask_set(thickness_mm: np.ndarray, mask_mat: Material, i0: float,
                        source: str, pitch: float) -> MaskSet:
    if not 0 < i0 <= 1.0:
        raise ParameterError(f"mask intensity scale must be in (0, 1] to keep masks in [0, 1], got {i0}")
    intensity = i0 * np.exp(-mask_mat.mu_mm * thickness_mm)
    lo, hi = float(intensity.min()), float(intensity.max())
    if not hi > lo:
        raise ParameterError("degenerate mask set: zero intensity range")
    return MaskSet(masks=intensity, min=lo, max=hi, xi=hi - lo, eta=None, source=source, pitch=pitch)


@dataclass(frozen=True)
class SpeckleMaskSource:
    """Lazy window extractor over one smoothed master speckle pattern.

    ``block(k0, k1)`` materializes intensity masks [k0, k1) so arbitrarily
    large acquisitions never hold the whole stack in memory.
    """

    master: np.ndarray
    dy: np.ndarray
    dx: np.ndarray
    n: int
    m: int
    mask_mat: Material
    i0: float
    pitch: float

    @property
    def count(self) -> int:
        return self.dy.size

    @classmethod
    def build(cls, n: int, m: int, count: int, seed: int, *,
              peak_thickness_um: float = 250.0, sigma_px: float = 2.0 / 3.0,
              mask_mat: Material = MATERIALS["gold"], i0: float = 1.0,
              pad: int | None = None, pitch: float = 1.0) -> "SpeckleMaskSource":
        if count < 1:
            raise ParameterError(f"mask count must be >= 1, got {count}")
        if not peak_thickness_um > 0:
            raise ParameterError(f"peak thickness must be positive, got {peak_thickness_um}")
        if sigma_px < 0:
            raise ParameterError(f"kernel sigma must be >= 0, got {sigma_px}")
        pad = max(n, m) if pad is None else int(pad)
        offsets = (pad + 1) ** 2
        if count > offsets:
            raise ParameterError(f"master pad {pad} allows only {offsets} distinct translations, need {count}")
        rng = Generator(Philox(key=[int(seed), 0]))
        master = rng.random((n + pad, m + pad)) * (peak_thickness_um * 1e-3)  # mm
        if sigma_px > 0:
            master = gaussian_filter(master, sigma_px, mode="wrap")
        picks = rng.choice(offsets, size=count, replace=False)
        dy, dx = np.divmod(picks, pad + 1)
        return cls(master=master, dy=dy, dx=dx, n=n, m=m, mask_mat=mask_mat, i0=i0, pitch=pitch)

    def thickness_block(self, k0: int, k1: int) -> np.ndarray:
        out = np.empty((k1 - k0, self.n, self.m))
        for idx, k in enumerate(range(k0, k1)):
            out[idx] = self.master[self.dy[k]:self.dy[k] + self.n, self.dx[k]:self.dx[k] + self.m]
        return out

    def block(self, k0: int, k1: int) -> np.ndarray:
        return self.i0 * np.exp(-self.mask_mat.mu_mm * self.thickness_block(k0, k1))

    def realize(self, count: int | None = None) -> MaskSet:
        count = self.count if count is None else min(int(count), self.count)
        return _intensity_mask_set(self.thickness_block(0, count),
                                   self.mask_mat, self.i0, "smoothed-speckle", self.pitch)


@dataclass(frozen=True)
class IndependentMaskSource:
    """Per-pixel i.i.d. speckle masks (the 1:1 pixel-to-speckle regime).

    Thicknesses are uniform on ``(0, peak_thickness_um)`` per
    (seed, mask, pixel) through the counter-based member stream, so any
    block regenerates bit-identically.
    """

    n: int
    m: int
    seed: int
    peak_thickness_um: float = 250.0
    mask_mat: Material = MATERIALS["gold"]
    i0: float = 1.0
    pitch: float = 1.0

    def thickness_block(self, k0: int, k1: int) -> np.ndarray:
        dist = DistributionSpec.uniform(0.0, self.peak_thickness_um * 1e-3)
        return member_block(self.n, self.m, dist, self.seed, k0, k1)

    def block(self, k0: int, k1: int) -> np.ndarray:
        return self.i0 * np.exp(-self.mask_mat.mu_mm * self.thickness_block(k0, k1))

    def realize(self, count: int) -> MaskSet:
        return _intensity_mask_set(self.thickness_block(0, count),
                                   self.mask_mat, self.i0, "independent-speckle", self.pitch)


def speckle_masks(n: int, m: int, count: int, seed: int, *,
                  peak_thickness_um: float = 250.0, sigma_px: float = 2.0 / 3.0,
                  mask_mat: Material = MATERIALS["gold"], i0: float = 1.0,
                  pad: int | None = None, pitch: float = 1.0) -> MaskSet:
    """Smoothed speckle intensity masks from one translated master pattern.

    A single ``(n+pad) x (m+pad)`` array of uniform thicknesses on
    ``(0, peak_thickness_um)`` is filtered with a rotationally symmetric
    Gaussian of ``sigma_px`` pixels (0 bypasses the filter); each mask is
    an ``n x m`` window of the master at a distinct seeded translation,
    attenuating via the mask material.
    """
    return SpeckleMaskSource.build(
        n, m, count, seed, peak_thickness_um=peak_thickness_um, sigma_px=sigma_px,
        mask_mat=mask_mat, i0=i0, pad=pad, pitch=pitch).realize()


def independent_masks(n: int, m: int, count: int, seed: int, *,
                      peak_thickness_um: float = 250.0,
                      mask_mat: Material = MATERIALS["gold"], i0: float = 1.0,
                      pitch: float = 1.0) -> MaskSet:
    """Idealized masks with one independent random speckle per pixel."""
    if count < 1:
        raise ParameterError(f"mask count must be >= 1, got {count}")
    return IndependentMaskSource(n, m, int(seed), peak_thickness_um, mask_mat, i0, pitch).realize(count)


def thickness_from_intensity(masks: MaskSet, mask_mat: Material, i0: float = 1.0) -> np.ndarray:
    """Invert Beer-Lambert attenuation to recover mask thicknesses (mm)."""
    return -np.log(masks.masks / i0) / mask_mat.mu_mm


def pccgi_bucket(phantom: Phantom, mask_thickness: ImageGrid, mat: Material,
                 mask_mat: Material, rc: RockingCurve, i0: float = 1.0) -> float:
    """Ideal phase-contrast bucket through a mask downstream of the sample.

    Exactly the Frobenius product of the analyzer-filtered sample intensity
    with the mask transmission ``exp(-mu0 R)``.
    """
    t = phantom.thickness
    if (mask_thickness.n, mask_thickness.m) != (t.n, t.m):
        raise ShapeError(f"mask is {mask_thickness.n} x {mask_thickness.m}, sample is {t.n} x {t.m}")
    intensity = forward_intensity(phantom, mat, rc, i0)
    transmission = np.exp(-mask_mat.mu_mm * mask_thickness.data)
    return float(np.sum(intensity.data * transmission))


def bucket_shot_noise(value: float, lambda_tilde_prime: float, seed: int) -> float:
    """Shot-noisy bucket reading ``P(B lambda') / lambda'``.

    Unbiased for B with variance ``B / lambda'``.
    """
    if value < 0:
        raise ParameterError(f"bucket reading must be >= 0, got {value}")
    if not lambda_tilde_prime > 0:
        raise ParameterError(f"lambda_tilde_prime must be positive, got {lambda_tilde_prime}")
    draw = Generator(Philox(key=[int(seed), 0])).poisson(value * lambda_tilde_prime)
    return float(draw / lambda_tilde_prime)


def expected_pccgi(phantom: Phantom, consts: PCCGIConstants, mu_mm: float) -> ImageGrid:
    """Expected phase-contrast image ``C (1 - G d/dx) exp(-mu T)``.

    Uses the same discrete derivative as the forward model, so the Fourier
    filter with the matching discrete symbol inverts it exactly.
    """
    if not mu_mm > 0:
        raise ParameterError(f"attenuation coefficient must be positive, got {mu_mm}")
    t = phantom.thickness
    h = np.exp(-mu_mm * t.data)
    return ImageGrid(consts.C * (h - consts.G_mm * diff_x_periodic(h, t.pitch)), t.pitch)


def pccgi_reconstruct(buckets: BucketSeries, masks: MaskSet, mode: str = "standard") -> ImageGrid:
    """Reconstruct the phase-contrast image from bucket readings.

    ``standard`` correlates against the masks, normalized by the empirical
    variance of the mask-intensity ensemble; ``gram_schmidt`` orthonormalizes
    the realized masks and projects, which is exact for a complete,
    noise-free acquisition.
    """
    if mode == "standard":
        return gi_standard(buckets, masks, float(np.var(masks.masks)))
    if mode == "gram_schmidt":
        if len(buckets) != masks.N:
            raise ShapeError(f"{len(buckets)} buckets for {masks.N} masks")
        onb = orthonormalize(masks.masks)
        coeffs = project_weights(onb, buckets.values)
        img = (coeffs @ onb.members.reshape(onb.N, -1)).reshape(masks.n, masks.m)
        return ImageGrid(img, masks.pitch)
    raise ParameterError(f"unknown reconstruction mode {mode!r}")


def mask_upstream_bucket(phantom: Phantom, mask_thickness: ImageGrid, mat: Material,
                         mask_mat: Material, rc: RockingCurve, i0: float = 1.0) -> float:
    """Bucket reading with the mask upstream of the sample.

    The mask's own phase gradient then corrupts the reading with an extra
    ``beta delta0 dR/dx`` term; this exists to quantify that corruption
    against :func:`pccgi_bucket`.
    """
    t = phantom.thickness
    if (mask_thickness.n, mask_thickness.m) != (t.n, t.m):
        raise ShapeError(f"mask is {mask_thickness.n} x {mask_thickness.m}, sample is {t.n} x {t.m}")
    if not i0 > 0:
        raise ParameterError(f"input intensity must be positive, got {i0}")
    # same (clamped) sample bracket as pccgi_bucket, plus the mask-gradient term
    bracket = _phase_bracket(t, material_delta(mat), rc, clamp=True)
    bracket = bracket + rc.beta_per_rad * material_delta(mask_mat) * diff_x_periodic(
        mask_thickness.data, mask_thickness.pitch)
    attenuation = np.exp(-mat.mu_mm * t.data - mask_mat.mu_mm * mask_thickness.data)
    return float(np.sum(i0 * attenuation * bracket))
