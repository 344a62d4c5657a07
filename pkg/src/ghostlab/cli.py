"""Command-line interface.

Every run resolves its configuration (defaults, then ``--config`` JSON,
then explicit flags), writes its artifacts into ``--out`` and finishes
with a ``manifest.json`` recording the resolved config plus content hashes
of all inputs and outputs.  Exit codes: 0 success, 2 configuration/schema
violation, 3 numerical quality failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np
from numpy.random import Generator, Philox

from . import __version__
from .cliio import load_grid, save_grid, write_manifest
from .dose import acquire_ideal_buckets, acquire_noisy_buckets, dose_inequality
from .errors import FormatError, GhostLabError, ParameterError
from .ghostcore import BucketSeries, bucket_series, gi_orthonormal, gi_standard, to_masks
from .grid import ImageGrid, pixel_centers
from .inverse import FilterSpec, invert_pccgi
from .orthonorm import orthonormalize
from .pipeline import standard_ghost_stream
from .presets import DEFAULT_ROCKING, PHANTOM_PRESETS, XPCI_SIM_PRESETS, phantom_specs
from .randbasis import (DistributionSpec, ergodicity_check, gen_random_basis,
                        orthogonality_stats, predict_snr, synthesize)
from .xpci import (MATERIALS, IndependentMaskSource, PCCGIConstants, SpeckleMaskSource,
                   expected_pccgi, forward_intensity, linearize_rocking,
                   load_materials_csv, material_delta, pccgi_reconstruct, phantom_ellipsoids)

EXIT_OK, EXIT_SCHEMA, EXIT_QUALITY, EXIT_IO = 0, 2, 3, 4


class SchemaViolation(Exception):
    pass


class QualityFailure(Exception):
    pass


# ---------------------------------------------------------------- config

_DIST_DEFAULT = {"kind": "uniform", "p1": -0.5, "p2": 0.5, "zero_centered": True}

DEFAULTS = {
    "basis-gen": {"n": 16, "m": 16, "N": 16, "dist": dict(_DIST_DEFAULT), "pitch": 1.0,
                  "max_members_to_write": 64},
    "basis-stats": {"n": 16, "m": 16, "N": 64, "dist": dict(_DIST_DEFAULT), "pitch": 1.0},
    "synth": {"n": 32, "m": 32, "N": 1024, "dist": dict(_DIST_DEFAULT), "pitch": 1.0,
              "target": {"kind": "checkerboard", "period": 4, "path": None}},
    "ghost-sim": {"n": 16, "m": 16, "N": None, "dist": dict(_DIST_DEFAULT), "pitch": 1.0,
                  "mode": "orthonormal", "lambda_tilde": None,
                  "target": {"kind": "blob", "period": 4, "path": None}},
    "dose-compare": {"n": 8, "m": 8, "dist": dict(_DIST_DEFAULT), "pitch": 1.0,
                     "lambda_tilde": 1.0,
                     "target": {"kind": "blob", "period": 4, "path": None}},
    "phantom-gen": {"preset": "single-64", "n": None, "m": None, "pitch": 1.0, "ellipsoids": None},
    "material-delta": {"material": "carbon", "energy_keV": None, "materials_csv": None},
    "xpci-forward": {"phantom": "single-64", "material": "carbon", "i0": 1.0,
                     "rocking": dict(DEFAULT_ROCKING)},
    "xpci-sim": {"preset": "ideal-64", "N": None, "lambda_tilde": "preset",
                 "rocking": dict(DEFAULT_ROCKING), "i0": 1.0,
                 "max_clamped_fraction": 0.01},
    "xpci-invert": {"image": None, "C": None, "G_mm": None, "mu_mm": None,
                    "material": None, "rocking": dict(DEFAULT_ROCKING),
                    "symbol": "discrete", "pad": 0, "floor": None,
                    "max_clamped_fraction": 0.01},
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = dict(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise SchemaViolation(f"unknown config key {where!r}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = value
    return out


def _resolve_config(command: str, args) -> dict:
    config = dict(DEFAULTS[command])
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise SchemaViolation(f"{args.config}: invalid JSON: {exc}")
        if not isinstance(loaded, dict):
            raise SchemaViolation(f"{args.config}: top level must be an object")
        config = _merge(config, loaded)
    overrides = {k: v for k, v in vars(args).items()
                 if k in config and v is not None}
    config = _merge(config, overrides)
    config["seed"] = args.seed
    return config


def _dist_from_config(cfg: dict) -> DistributionSpec:
    try:
        return DistributionSpec(cfg["kind"], float(cfg["p1"]), float(cfg.get("p2", 0.0)),
                                bool(cfg.get("zero_centered", False))).validate()
    except (KeyError, TypeError) as exc:
        raise SchemaViolation(f"bad distribution config: {exc}")


def _make_target(cfg: dict, n: int, m: int, pitch: float, inputs: dict) -> ImageGrid:
    kind = cfg.get("kind", "checkerboard")
    if kind == "file":
        if not cfg.get("path"):
            raise SchemaViolation("target.kind = file requires target.path")
        grid = load_grid(cfg["path"])
        inputs["target"] = cfg["path"]
        return grid
    if kind == "checkerboard":
        period = int(cfg.get("period", 4))
        yy, xx = np.indices((n, m))
        return ImageGrid(((yy // period + xx // period) % 2).astype(float), pitch)
    if kind == "blob":
        x, y = pixel_centers(n, m, pitch)
        xx, yy = np.meshgrid(x, y)
        s2 = (min(n, m) * pitch / 4.0) ** 2
        return ImageGrid(np.exp(-(xx**2 + 2.0 * yy**2) / (2.0 * s2)), pitch)
    raise SchemaViolation(f"unknown target kind {kind!r}")


def _material(name: str, csv_path=None):
    table = MATERIALS if csv_path is None else load_materials_csv(csv_path)
    if name not in table:
        raise SchemaViolation(f"unknown material {name!r}; have {sorted(table)}")
    return table[name]


def _rocking(cfg: dict):
    return linearize_rocking(float(cfg["R0"]), float(cfg["M"]), float(cfg["a_urad"]),
                             float(cfg["relative_reflectivity"]), int(cfg.get("side", 1)))


def _phantom(preset_or_cfg):
    if isinstance(preset_or_cfg, str):
        if preset_or_cfg not in PHANTOM_PRESETS:
            raise SchemaViolation(f"unknown phantom preset {preset_or_cfg!r}; have {sorted(PHANTOM_PRESETS)}")
        cfg = PHANTOM_PRESETS[preset_or_cfg]
    else:
        cfg = preset_or_cfg
    return phantom_ellipsoids(cfg["n"], cfg["m"], cfg["pitch"], phantom_specs(cfg))


def _rms(a: np.ndarray) -> float:
    return float(np.sqrt(np.mean(a**2)))


class _Run:
    """Collects artifacts then writes one manifest."""

    def __init__(self, command: str, config: dict, out_dir: Path, fmt: str):
        self.command = command
        self.config = config
        self.out = Path(out_dir)
        self.fmt = fmt
        self.artifacts = {}
        self.inputs = {}
        self.out.mkdir(parents=True, exist_ok=True)

    def grid(self, name: str, grid: ImageGrid, units: str = "dimensionless"):
        path = self.out / f"{name}.{self.fmt}"
        save_grid(grid, path, units=units)
        self.artifacts[f"{name}.{self.fmt}"] = path
        self.artifacts[f"{name}.{self.fmt}.json"] = Path(str(path) + ".json")

    def text(self, name: str, content: str):
        path = self.out / name
        path.write_text(content)
        self.artifacts[name] = path

    def report(self, payload: dict, name: str = "report.json"):
        self.text(name, json.dumps(payload, sort_keys=True, indent=2, default=float) + "\n")

    def finish(self):
        write_manifest(self.out, self.command, self.config,
                       self.artifacts, {k: v for k, v in self.inputs.items()})


# ---------------------------------------------------------------- commands

def _cmd_basis_gen(run: _Run, cfg: dict, threads: int):
    dist = _dist_from_config(cfg["dist"])
    basis = gen_random_basis(cfg["n"], cfg["m"], cfg["N"], dist, cfg["seed"], cfg["pitch"])
    limit = min(basis.N, int(cfg["max_members_to_write"]))
    for k in range(limit):
        run.grid(f"member_{k:04d}", basis.member(k))
    run.report({"n": basis.n, "m": basis.m, "N": basis.N, "seed": cfg["seed"],
                "dist": cfg["dist"], "members_written": limit,
                "analytic_mean": dist.mean, "analytic_var": dist.var})


def _cmd_basis_stats(run: _Run, cfg: dict, threads: int):
    dist = _dist_from_config(cfg["dist"])
    basis = gen_random_basis(cfg["n"], cfg["m"], cfg["N"], dist, cfg["seed"], cfg["pitch"])
    stats = orthogonality_stats(basis)
    ergo = ergodicity_check(basis)
    run.report({
        "orthogonality": vars(stats) | {},
        "ergodicity": {
            "spatial_mean_se": ergo.spatial_mean_se,
            "spatial_var_se": ergo.spatial_var_se,
            "ensemble_mean_se": ergo.ensemble_mean_se,
            "ensemble_var_se": ergo.ensemble_var_se,
            "max_se": ergo.max_se,
        },
    })


def _cmd_synth(run: _Run, cfg: dict, threads: int):
    dist = _dist_from_config(cfg["dist"])
    target = _make_target(cfg["target"], cfg["n"], cfg["m"], cfg["pitch"], run.inputs)
    basis = gen_random_basis(target.n, target.m, cfg["N"], dist, cfg["seed"], target.pitch)
    recon, weights = synthesize(target, basis)
    snr = predict_snr(target, basis.N)
    run.grid("target", target)
    run.grid("synthesis", recon)
    run.text("weights.csv", "\n".join(repr(w) for w in weights.tolist()) + "\n")
    run.report({
        "N": basis.N, "rms_error": _rms(recon.data - target.data),
        "predicted_snr_global": snr.snr_global,
        "uncertainty_product": snr.uncertainty_product,
    })


def _build_onb_masks(n, m, N, dist, seed, pitch):
    nm = n * m
    N = nm - 1 if N is None else int(N)
    if N > nm - 1:
        raise ParameterError(f"at most nm-1 = {nm - 1} random members fit with the constant, got {N}")
    basis = gen_random_basis(n, m, N, dist, seed, pitch)
    onb = orthonormalize(basis, augment_constant=True)
    return onb, to_masks(onb)


def _cmd_ghost_sim(run: _Run, cfg: dict, threads: int):
    dist = _dist_from_config(cfg["dist"])
    target = _make_target(cfg["target"], cfg["n"], cfg["m"], cfg["pitch"], run.inputs)
    onb, masks = _build_onb_masks(target.n, target.m, cfg["N"], dist, cfg["seed"], target.pitch)
    lam = cfg["lambda_tilde"]
    # both acquisitions carry the dose-conserving xi scale the orthonormal
    # reconstruction expects; the standard normalization absorbs it
    if lam is None:
        buckets = acquire_ideal_buckets(target, masks)
    else:
        buckets = acquire_noisy_buckets(target, masks, float(lam), cfg["seed"] + 1)
    if cfg["mode"] == "orthonormal":
        recon = gi_orthonormal(buckets, onb, masks.eta)
    elif cfg["mode"] == "standard":
        recon = gi_standard(buckets, masks, masks.xi * float(np.var(masks.masks)))
    else:
        raise SchemaViolation(f"unknown mode {cfg['mode']!r}")
    run.grid("target", target)
    run.grid("reconstruction", recon)
    run.report({
        "mode": cfg["mode"], "N": masks.N, "lambda_tilde": lam,
        "xi": masks.xi, "eta": masks.eta,
        "rms_error": _rms(recon.data - target.data),
    })


def _cmd_dose_compare(run: _Run, cfg: dict, threads: int):
    dist = _dist_from_config(cfg["dist"])
    target = _make_target(cfg["target"], cfg["n"], cfg["m"], cfg["pitch"], run.inputs)
    onb, masks = _build_onb_masks(target.n, target.m, None, dist, cfg["seed"], target.pitch)
    report = dose_inequality(target, masks, onb, float(cfg["lambda_tilde"]))
    run.text("dose_report.json", report.to_json(sort_keys=True, indent=2) + "\n")
    run.report({"verdict_ghost_favorable": report.verdict, "lhs": report.lhs, "rhs": report.rhs})
    print(f"dose inequality: lhs={report.lhs:.6g} rhs={report.rhs:.6g} "
          f"ghost-favorable={report.verdict}")


def _cmd_phantom_gen(run: _Run, cfg: dict, threads: int):
    if cfg["ellipsoids"] is not None:
        spec = {"n": cfg["n"], "m": cfg["m"], "pitch": cfg["pitch"],
                "ellipsoids": cfg["ellipsoids"]}
        if spec["n"] is None or spec["m"] is None:
            raise SchemaViolation("custom ellipsoids need explicit n and m")
        phantom = _phantom(spec)
    else:
        phantom = _phantom(cfg["preset"])
    run.grid("thickness", phantom.thickness, units="mm")
    run.report({"n": phantom.n, "m": phantom.m, "pitch_mm": phantom.pitch,
                "ellipsoids": [vars(e) for e in phantom.ellipsoids],
                "max_thickness_mm": float(phantom.thickness.data.max())})


def _cmd_material_delta(run: _Run, cfg: dict, threads: int):
    mat = _material(cfg["material"], cfg["materials_csv"])
    if cfg["materials_csv"]:
        run.inputs["materials_csv"] = cfg["materials_csv"]
    energy = cfg["energy_keV"]
    delta = material_delta(mat) if energy is None else material_delta(mat, float(energy))
    payload = {"material": mat.name, "delta": delta, "mu_per_mm": mat.mu_mm,
               "energy_keV": energy, "Z": mat.Z, "M_A": mat.M_A,
               "mu_over_rho": mat.mu_over_rho, "rho": mat.rho, "f1": mat.f1}
    print(json.dumps(payload))
    run.report(payload)


def _forward_pieces(cfg):
    phantom = _phantom(cfg["phantom"]) if isinstance(cfg["phantom"], str) else _phantom(cfg["phantom"])
    mat = _material(cfg["material"])
    rc = _rocking(cfg["rocking"])
    delta = material_delta(mat)
    consts = PCCGIConstants.from_model(rc, delta, mat.mu_mm)
    return phantom, mat, rc, delta, consts


def _cmd_xpci_forward(run: _Run, cfg: dict, threads: int):
    phantom, mat, rc, delta, consts = _forward_pieces(cfg)
    intensity = forward_intensity(phantom, mat, rc, float(cfg["i0"]))
    expected = expected_pccgi(phantom, consts, mat.mu_mm)
    band = intensity.data / (float(cfg["i0"]) * np.exp(-mat.mu_mm * phantom.thickness.data)) / rc.R0
    run.grid("thickness", phantom.thickness, units="mm")
    run.grid("intensity", intensity, units="intensity")
    run.grid("expected_phase_image", expected, units="intensity")
    run.report({
        "material": mat.name, "delta": delta, "mu_per_mm": mat.mu_mm,
        "alpha": rc.alpha, "beta_per_rad": rc.beta_per_rad, "theta0_urad": rc.theta0_urad,
        "C": consts.C, "G_mm": consts.G_mm,
        "relative_reflectivity_band": [float(band.min()), float(band.max())],
    })


def _mask_source(mask_cfg: dict, n: int, m: int, count: int, seed: int, pitch: float):
    mat = _material(mask_cfg.get("material", "gold"))
    peak = float(mask_cfg.get("peak_thickness_um", 250.0))
    kind = mask_cfg.get("kind", "independent")
    if kind == "independent":
        return IndependentMaskSource(n, m, seed, peak, mat, 1.0, pitch)
    if kind == "speckle":
        return SpeckleMaskSource.build(
            n, m, count, seed, peak_thickness_um=peak,
            sigma_px=float(mask_cfg.get("sigma_px", 2.0 / 3.0)),
            mask_mat=mat, i0=1.0, pad=mask_cfg.get("pad"), pitch=pitch)
    raise SchemaViolation(f"unknown mask kind {kind!r}")


def _cmd_xpci_sim(run: _Run, cfg: dict, threads: int):
    preset_name = cfg["preset"]
    if preset_name not in XPCI_SIM_PRESETS:
        raise SchemaViolation(f"unknown sim preset {preset_name!r}; have {sorted(XPCI_SIM_PRESETS)}")
    preset = XPCI_SIM_PRESETS[preset_name]
    seed = cfg["seed"]

    sim = dict(preset)
    phantom, mat, rc, delta, consts = _forward_pieces(
        {"phantom": sim["phantom"], "material": sim["material"],
         "rocking": cfg["rocking"], "i0": cfg["i0"]})
    nm = phantom.n * phantom.m
    count = int(cfg["N"]) if cfg["N"] is not None else sim["n_per_nm"] * nm
    lam = sim["lambda_tilde"] if cfg["lambda_tilde"] == "preset" else cfg["lambda_tilde"]
    i0 = float(cfg["i0"])

    g_phase = forward_intensity(phantom, mat, rc, i0)
    g_abs = ImageGrid(i0 * np.exp(-mat.mu_mm * phantom.thickness.data), phantom.pitch)
    expected = expected_pccgi(phantom, consts, mat.mu_mm)

    source = _mask_source(sim["mask"], phantom.n, phantom.m, count, seed, phantom.pitch)
    run.grid("speckle_example", ImageGrid(source.block(0, 1)[0], phantom.pitch), units="intensity")
    run.grid("thickness", phantom.thickness, units="mm")
    run.grid("expected_phase_image", expected, units="intensity")
    run.grid("expected_absorption_image", g_abs, units="intensity")

    phase_run = standard_ghost_stream(g_phase, source.block, count,
                                      lambda_tilde=lam, noise_seed=seed + 1)
    abs_run = standard_ghost_stream(g_abs, source.block, count,
                                    lambda_tilde=lam, noise_seed=seed + 2)
    run.grid("phase_ghost", phase_run.recon, units="intensity")
    run.grid("absorption_ghost", abs_run.recon, units="intensity")

    report = {
        "preset": preset_name, "N": count, "lambda_tilde": lam,
        "material": mat.name, "mask": sim["mask"],
        "alpha": rc.alpha, "beta_per_rad": rc.beta_per_rad,
        "C": consts.C, "G_mm": consts.G_mm,
        "rms_error_phase_ghost": _rms(phase_run.recon.data - g_phase.data),
        "rms_error_absorption_ghost": _rms(abs_run.recon.data / i0 - g_abs.data / i0),
    }

    if sim.get("gram_schmidt_fraction"):
        gs_count = int(sim["gram_schmidt_fraction"] * nm)
        masks_gs = source.realize(gs_count)
        buckets = bucket_series(g_phase, masks_gs, workers=threads)
        if lam is not None:
            scale = lam * masks_gs.masks.reshape(gs_count, -1).sum(axis=1)
            noisy = Generator(Philox(key=[seed + 3, 0])).poisson(buckets.values * scale) / scale
            buckets = BucketSeries(noisy, lambda_tilde=lam, seed=seed + 3)
        gs = pccgi_reconstruct(buckets, masks_gs, mode="gram_schmidt")
        run.grid("phase_ghost_gram_schmidt", gs, units="intensity")
        report["gram_schmidt_N"] = gs_count
        report["rms_error_phase_ghost_gram_schmidt"] = _rms(gs.data - g_phase.data)

    quality_ok = True
    if sim.get("invert", True):
        spec = FilterSpec.from_constants(consts, mat.mu_mm)
        inv = invert_pccgi(phase_run.recon, spec,
                           max_clamped_fraction=float(cfg["max_clamped_fraction"]))
        run.grid("absorption_from_phase", inv.filtered, units="intensity")
        run.grid("thickness_recovered", inv.thickness, units="mm")
        report["rms_error_absorption_from_phase"] = _rms(inv.filtered.data - g_abs.data / i0)
        report["inversion_clamped_fraction"] = inv.clamped_fraction
        report["inversion_quality_ok"] = inv.quality_ok
        quality_ok = inv.quality_ok

    run.report(report)
    print(json.dumps({k: report[k] for k in report if k.startswith("rms_") or k in ("N", "preset")}))
    if not quality_ok:
        raise QualityFailure(f"inversion clamped {report['inversion_clamped_fraction']:.3%} of pixels")


def _cmd_xpci_invert(run: _Run, cfg: dict, threads: int):
    if not cfg["image"]:
        raise SchemaViolation("xpci-invert requires an input image (--image or config.image)")
    image = load_grid(cfg["image"])
    run.inputs["image"] = cfg["image"]
    if cfg["C"] is not None and cfg["mu_mm"] is not None:
        spec = FilterSpec(float(cfg["C"]), float(cfg["G_mm"] or 0.0), float(cfg["mu_mm"]),
                          symbol=cfg["symbol"], floor=cfg["floor"])
    elif cfg["material"]:
        mat = _material(cfg["material"])
        rc = _rocking(cfg["rocking"])
        consts = PCCGIConstants.from_model(rc, material_delta(mat), mat.mu_mm)
        spec = FilterSpec.from_constants(consts, mat.mu_mm, symbol=cfg["symbol"], floor=cfg["floor"])
    else:
        raise SchemaViolation("provide either (C, G_mm, mu_mm) or a material for the filter")
    result = invert_pccgi(image, spec, pad=int(cfg["pad"]),
                          max_clamped_fraction=float(cfg["max_clamped_fraction"]))
    run.grid("thickness", result.thickness, units="mm")
    run.grid("filtered", result.filtered, units="intensity")
    run.report({
        "C": spec.C, "G_mm": spec.G_mm, "mu_mm": spec.mu_mm, "symbol": spec.symbol,
        "clamped_fraction": result.clamped_fraction,
        "quality_ok": result.quality_ok,
        "max_imag_residue": result.max_imag_residue,
    })
    if not result.quality_ok:
        raise QualityFailure(f"clamped fraction {result.clamped_fraction:.3%} exceeds "
                             f"{cfg['max_clamped_fraction']:.3%}")


COMMANDS = {
    "basis-gen": _cmd_basis_gen,
    "basis-stats": _cmd_basis_stats,
    "synth": _cmd_synth,
    "ghost-sim": _cmd_ghost_sim,
    "dose-compare": _cmd_dose_compare,
    "phantom-gen": _cmd_phantom_gen,
    "material-delta": _cmd_material_delta,
    "xpci-forward": _cmd_xpci_forward,
    "xpci-sim": _cmd_xpci_sim,
    "xpci-invert": _cmd_xpci_invert,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ghostlab",
                                     description="Random-basis ghost imaging and x-ray "
                                                 "phase-contrast simulation toolkit")
    parser.add_argument("--version", action="version", version=f"ghostlab {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, default=0, help="base RNG seed (default 0)")
    common.add_argument("--out", default="ghostlab_out", help="output directory")
    common.add_argument("--threads", type=int, default=None,
                        help="worker cap (default env GHOSTLAB_THREADS or 1)")
    common.add_argument("--format", choices=["pgm", "csv", "f64"], default="f64",
                        help="grid artifact format (default f64)")

    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_, flags=()):
        p = sub.add_parser(name, parents=[common], help=help_)
        for args, kwargs in flags:
            p.add_argument(*args, **kwargs)
        return p

    int_opt = {"type": int, "default": None}
    add("basis-gen", "generate a random-matrix basis",
        [ (("--n",), int_opt), (("--m",), int_opt), (("--N",), int_opt) ])
    add("basis-stats", "orthogonality and ergodicity statistics of a basis",
        [ (("--n",), int_opt), (("--m",), int_opt), (("--N",), int_opt) ])
    add("synth", "synthesize a target from a random basis",
        [ (("--n",), int_opt), (("--m",), int_opt), (("--N",), int_opt) ])
    add("ghost-sim", "ghost-imaging acquisition and reconstruction",
        [ (("--n",), int_opt), (("--m",), int_opt), (("--N",), int_opt),
          (("--mode",), {"choices": ["orthonormal", "standard"], "default": None}),
          (("--lambda-tilde",), {"dest": "lambda_tilde", "type": float, "default": None}) ])
    add("dose-compare", "ghost vs direct dose inequality",
        [ (("--n",), int_opt), (("--m",), int_opt),
          (("--lambda-tilde",), {"dest": "lambda_tilde", "type": float, "default": None}) ])
    add("phantom-gen", "projected-thickness phantom",
        [ (("--preset",), {"choices": sorted(PHANTOM_PRESETS), "default": None}) ])
    add("material-delta", "refractive-index decrement of a material",
        [ (("--material",), {"default": None}),
          (("--energy-kev",), {"dest": "energy_keV", "type": float, "default": None}),
          (("--materials-csv",), {"dest": "materials_csv", "default": None}) ])
    add("xpci-forward", "analyzer-crystal forward intensity model",
        [ (("--phantom",), {"default": None}), (("--material",), {"default": None}) ])
    add("xpci-sim", "full phase-contrast ghost-imaging simulation",
        [ (("--preset",), {"choices": sorted(XPCI_SIM_PRESETS), "default": None}),
          (("--N",), int_opt),
          (("--lambda-tilde",), {"dest": "lambda_tilde", "type": float, "default": None}) ])
    add("xpci-invert", "recover projected thickness from a phase-contrast image",
        [ (("--image",), {"default": None}),
          (("--c",), {"dest": "C", "type": float, "default": None}),
          (("--g-mm",), {"dest": "G_mm", "type": float, "default": None}),
          (("--mu-mm",), {"dest": "mu_mm", "type": float, "default": None}),
          (("--material",), {"default": None}),
          (("--symbol",), {"choices": ["discrete", "continuous"], "default": None}),
          (("--pad",), int_opt) ])
    return parser


def _emit_error(kind: str, exc: Exception):
    sys.stderr.write(json.dumps({"error": {"kind": kind, "message": str(exc)}}) + "\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    threads = args.threads
    if threads is None:
        threads = int(os.environ.get("GHOSTLAB_THREADS", "1"))
    if threads < 1:
        _emit_error("schema", ValueError(f"threads must be >= 1, got {threads}"))
        return EXIT_SCHEMA

    try:
        config = _resolve_config(args.command, args)
    except SchemaViolation as exc:
        _emit_error("schema", exc)
        return EXIT_SCHEMA

    run = None
    try:
        run = _Run(args.command, config, Path(args.out), args.format)
        if args.config:
            run.inputs["config"] = args.config
        COMMANDS[args.command](run, config, threads)
        run.finish()
        return EXIT_OK
    except QualityFailure as exc:
        if run is not None:
            run.finish()
        _emit_error("quality", exc)
        return EXIT_QUALITY
    except SchemaViolation as exc:
        _emit_error("schema", exc)
        return EXIT_SCHEMA
    except FormatError as exc:
        _emit_error("io", exc)
        return EXIT_IO
    except OSError as exc:
        _emit_error("io", exc)
        return EXIT_IO
    except GhostLabError as exc:
        _emit_error("schema", exc)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
