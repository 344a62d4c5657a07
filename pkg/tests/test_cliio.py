import json
from pathlib import Path

import numpy as np
import pytest

from ghostlab import FormatError, ImageGrid, load_grid, save_grid
from ghostlab.cli import main
from conftest import make_texture


class TestGridFiles:
    def test_f64_round_trip_bit_exact(self, tmp_path):
        grid = make_texture(6, 9, pitch=0.5)
        path = tmp_path / "grid.f64"
        save_grid(grid, path)
        back = load_grid(path)
        assert back.data.tobytes() == grid.data.tobytes()
        assert back.pitch == 0.5

    def test_csv_round_trip_bit_exact(self, tmp_path):
        grid = ImageGrid(np.random.default_rng(1).standard_normal((5, 7)) * 1e-7, pitch=2.0)
        path = tmp_path / "grid.csv"
        save_grid(grid, path)
        back = load_grid(path)
        assert back.data.tobytes() == grid.data.tobytes()
        assert back.pitch == 2.0

    def test_pgm_round_trip_quantization_bound(self, tmp_path):
        grid = make_texture(16, 16)
        path = tmp_path / "grid.pgm"
        save_grid(grid, path)
        back = load_grid(path)
        bound = (grid.data.max() - grid.data.min()) / 65536
        assert np.abs(back.data - grid.data).max() <= bound

    def test_pgm_constant_grid(self, tmp_path):
        grid = ImageGrid(np.full((3, 3), 1.25))
        path = tmp_path / "flat.pgm"
        save_grid(grid, path)
        assert np.allclose(load_grid(path).data, 1.25)

    def test_ragged_csv_names_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1.0,2.0\n3.0\n")
        with pytest.raises(FormatError, match="row 2"):
            load_grid(path)

    def test_csv_bad_number(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1.0,2.0\n3.0,zebra\n")
        with pytest.raises(FormatError, match="row 2"):
            load_grid(path)

    def test_malformed_pgm_header_reports_offset(self, tmp_path):
        path = tmp_path / "bad.pgm"
        path.write_bytes(b"P5\n4 4\n255\n" + bytes(16))
        sidecar = tmp_path / "bad.pgm.json"
        sidecar.write_text(json.dumps({"min": 0, "max": 1}))
        with pytest.raises(FormatError, match="maxval"):
            load_grid(path)
        path.write_bytes(b"P5\n4")
        with pytest.raises(FormatError, match="byte"):
            load_grid(path)

    def test_pgm_data_length_check(self, tmp_path):
        path = tmp_path / "short.pgm"
        path.write_bytes(b"P5\n4 4\n65535\n" + bytes(10))
        (tmp_path / "short.pgm.json").write_text(json.dumps({"min": 0, "max": 1}))
        with pytest.raises(FormatError, match="byte"):
            load_grid(path)

    def test_missing_sidecar_f64(self, tmp_path):
        path = tmp_path / "orphan.f64"
        path.write_bytes(bytes(32))
        with pytest.raises(FormatError, match="sidecar"):
            load_grid(path)

    def test_unknown_extension(self, tmp_path):
        path = tmp_path / "grid.npy"
        path.write_bytes(b"")
        with pytest.raises(FormatError):
            load_grid(path)

    def test_pgm_comment_header(self, tmp_path):
        grid = make_texture(4, 4)
        path = tmp_path / "c.pgm"
        save_grid(grid, path)
        raw = path.read_bytes()
        commented = raw[:3] + b"# a comment\n" + raw[3:]
        path.write_bytes(commented)
        back = load_grid(path)
        assert np.abs(back.data - grid.data).max() <= np.ptp(grid.data) / 65536


class TestCli:
    def test_material_delta_prints_oracle_value(self, tmp_path, capsys):
        code = main(["material-delta", "--material", "carbon", "--out", str(tmp_path)])
        assert code == 0
        payload = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert payload["delta"] == pytest.approx(2.30e-7, rel=0.02)
        assert (tmp_path / "manifest.json").exists()

    def test_phantom_gen_and_reload(self, tmp_path):
        out = tmp_path / "run"
        assert main(["phantom-gen", "--preset", "single-16", "--out", str(out)]) == 0
        grid = load_grid(out / "thickness.f64")
        assert grid.data.max() == pytest.approx(4.0, rel=0.05)

    def test_determinism_identical_hashes(self, tmp_path):
        args = ["synth", "--n", "8", "--m", "8", "--N", "128", "--seed", "9"]
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(args + ["--out", str(out_a)]) == 0
        assert main(args + ["--out", str(out_b)]) == 0
        man_a = json.loads((out_a / "manifest.json").read_text())
        man_b = json.loads((out_b / "manifest.json").read_text())
        assert man_a["artifacts"] == man_b["artifacts"]

    def test_ghost_sim_orthonormal_exact(self, tmp_path):
        out = tmp_path / "gs"
        assert main(["ghost-sim", "--n", "8", "--m", "8", "--out", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["rms_error"] < 1e-8

    def test_ghost_sim_standard_noisy(self, tmp_path):
        out = tmp_path / "std"
        assert main(["ghost-sim", "--n", "8", "--m", "8", "--mode", "standard",
                     "--lambda-tilde", "1e6", "--out", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["rms_error"] < 1.0

    def test_dose_compare_writes_report(self, tmp_path):
        out = tmp_path / "dose"
        assert main(["dose-compare", "--n", "6", "--m", "6", "--out", str(out)]) == 0
        report = json.loads((out / "dose_report.json").read_text())
        assert set(report) >= {"lhs", "rhs", "verdict", "omega"}

    def test_xpci_forward_band(self, tmp_path):
        out = tmp_path / "fwd"
        assert main(["xpci-forward", "--phantom", "single-64", "--out", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())
        lo, hi = report["relative_reflectivity_band"]
        assert 0.25 < lo and hi < 0.70

    def test_xpci_sim_small_preset(self, tmp_path):
        out = tmp_path / "sim"
        assert main(["xpci-sim", "--preset", "ideal-16", "--out", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())
        # half-complete orthonormalized projection beats the standard formula
        assert (report["rms_error_phase_ghost_gram_schmidt"]
                < report["rms_error_phase_ghost"])
        assert report["inversion_quality_ok"] is True
        for name in ("phase_ghost.f64", "absorption_ghost.f64", "thickness_recovered.f64",
                     "expected_phase_image.f64", "expected_absorption_image.f64",
                     "speckle_example.f64", "absorption_from_phase.f64"):
            assert (out / name).exists()

    def test_xpci_invert_round_trip(self, tmp_path):
        fwd = tmp_path / "fwd"
        assert main(["xpci-forward", "--phantom", "single-16", "--out", str(fwd)]) == 0
        inv = tmp_path / "inv"
        assert main(["xpci-invert", "--image", str(fwd / "expected_phase_image.f64"),
                     "--material", "carbon", "--out", str(inv)]) == 0
        t_in = load_grid(fwd / "thickness.f64")
        t_out = load_grid(inv / "thickness.f64")
        rel = np.linalg.norm(t_out.data - t_in.data) / np.linalg.norm(t_in.data)
        assert rel < 1e-8

    def test_exit_code_schema_violation(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"does_not_exist": 1}))
        code = main(["synth", "--config", str(cfg), "--out", str(tmp_path / "o")])
        assert code == 2
        err = json.loads(capsys.readouterr().err.strip())
        assert err["error"]["kind"] == "schema"

    def test_exit_code_io_failure(self, tmp_path, capsys):
        code = main(["xpci-invert", "--image", str(tmp_path / "missing.f64"),
                     "--material", "carbon", "--out", str(tmp_path / "o")])
        assert code == 4

    def test_exit_code_quality_failure(self, tmp_path, capsys):
        bad = ImageGrid(np.full((8, 8), -2.0))
        img = tmp_path / "bad.f64"
        save_grid(bad, img)
        code = main(["xpci-invert", "--image", str(img), "--c", "1.0", "--g-mm", "0.0",
                     "--mu-mm", "0.05", "--out", str(tmp_path / "o")])
        assert code == 3
        err = json.loads(capsys.readouterr().err.strip())
        assert err["error"]["kind"] == "quality"
        # artifacts still written alongside the failure
        assert (tmp_path / "o" / "thickness.f64").exists()

    def test_config_file_merging(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"n": 6, "dist": {"kind": "gaussian", "p1": 0.0,
                                                    "p2": 1.0, "zero_centered": True}}))
        out = tmp_path / "merged"
        assert main(["basis-stats", "--config", str(cfg), "--m", "5", "--out", str(out)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["n"] == 6
        assert manifest["config"]["m"] == 5
        assert manifest["config"]["dist"]["kind"] == "gaussian"

    def test_manifest_records_input_hash(self, tmp_path):
        grid = make_texture(6, 6)
        img = tmp_path / "target.f64"
        save_grid(grid, img)
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"target": {"kind": "file", "path": str(img)},
                                   "n": 6, "m": 6, "N": 64}))
        out = tmp_path / "withfile"
        assert main(["synth", "--config", str(cfg), "--out", str(out)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert "target" in manifest["inputs"]

    def test_basis_gen_writes_members(self, tmp_path):
        out = tmp_path / "bg"
        assert main(["basis-gen", "--n", "4", "--m", "4", "--N", "3",
                     "--format", "csv", "--out", str(out)]) == 0
        assert (out / "member_0002.csv").exists()
        grid = load_grid(out / "member_0000.csv")
        assert grid.n == 4
