"""Named phantom layouts and simulation presets for one-command runs."""

from __future__ import annotations

from .xpci import EllipsoidSpec

# Single centered ellipsoid on a 64 mm field, 1 mm pixels: peak projected
# thickness 2 r / aleph = 4 mm.
SINGLE_ELLIPSOID_64 = {
    "n": 64, "m": 64, "pitch": 1.0,
    "ellipsoids": [(0.0, 0.0, 8.0, 16.0)],
}

# Ten disjoint ellipsoids, radii {4,4,4,5,5,7,8,8,9,10} mm at scale 4.
_TEN_64 = [
    (-19.0, -19.0, 4.0, 10.0),
    (19.0, -19.0, 4.0, 9.0),
    (-19.0, 19.0, 4.0, 8.0),
    (19.0, 19.0, 4.0, 8.0),
    (0.0, 0.0, 4.0, 7.0),
    (0.0, -26.0, 4.0, 5.0),
    (0.0, 26.0, 4.0, 5.0),
    (-26.0, 0.0, 4.0, 4.0),
    (26.0, 0.0, 4.0, 4.0),
    (0.0, 13.0, 4.0, 4.0),
]

TEN_ELLIPSOID_64 = {"n": 64, "m": 64, "pitch": 1.0, "ellipsoids": _TEN_64}

# Same layout shrunk onto a 32 mm field for desk-scale runs.
TEN_ELLIPSOID_32 = {
    "n": 32, "m": 32, "pitch": 1.0,
    "ellipsoids": [(cx / 2, cy / 2, al, r / 2) for cx, cy, al, r in _TEN_64],
}

# Small variant for quick runs and CLI smoke tests.
SINGLE_ELLIPSOID_16 = {
    "n": 16, "m": 16, "pitch": 1.0,
    "ellipsoids": [(0.0, 0.0, 2.0, 4.0)],
}

PHANTOM_PRESETS = {
    "single-64": SINGLE_ELLIPSOID_64,
    "single-16": SINGLE_ELLIPSOID_16,
    "ten-64": TEN_ELLIPSOID_64,
    "ten-32": TEN_ELLIPSOID_32,
}


def phantom_specs(preset: dict):
    return [EllipsoidSpec(*e) for e in preset["ellipsoids"]]


# Full simulation presets for the xpci-sim command.  n_per_nm scales the
# mask count with the pixel count; lambda_tilde None means noise-free.
XPCI_SIM_PRESETS = {
    # idealized run: per-pixel independent speckles, no shot noise,
    # standard formula at N = 16 nm plus orthonormalized masks at N = nm/2
    "ideal-64": {
        "phantom": "single-64",
        "material": "carbon",
        "mask": {"kind": "independent", "material": "gold", "peak_thickness_um": 250.0},
        "n_per_nm": 16,
        "lambda_tilde": None,
        "gram_schmidt_fraction": 0.5,
        "invert": True,
    },
    # miniature idealized run, mainly for quick checks
    "ideal-16": {
        "phantom": "single-16",
        "material": "carbon",
        "mask": {"kind": "independent", "material": "gold", "peak_thickness_um": 250.0},
        "n_per_nm": 4,
        "lambda_tilde": None,
        "gram_schmidt_fraction": 0.5,
        "invert": True,
    },
    # desk-scale smoothed-speckle run with bucket shot noise
    "speckle-32": {
        "phantom": "ten-32",
        "material": "carbon",
        "mask": {"kind": "speckle", "material": "gold", "peak_thickness_um": 250.0,
                 "sigma_px": 2.0 / 3.0, "pad": 128},
        "n_per_nm": 16,
        "lambda_tilde": 1e8,
        "gram_schmidt_fraction": None,
        "invert": True,
    },
    # the full-size long-running version of the smoothed-speckle run
    "speckle-64-full": {
        "phantom": "ten-64",
        "material": "carbon",
        "mask": {"kind": "speckle", "material": "gold", "peak_thickness_um": 250.0,
                 "sigma_px": 2.0 / 3.0, "pad": 512},
        "n_per_nm": 64,
        "lambda_tilde": 1e8,
        "gram_schmidt_fraction": None,
        "invert": True,
    },
}

# Default rocking-curve model: Si(333) analyzer near 40 keV, linearized at
# half maximum on the positive flank.
DEFAULT_ROCKING = {
    "R0": 1.0,
    "M": 2.3737,
    "a_urad": 0.7146,
    "relative_reflectivity": 0.5,
    "side": 1,
}
