import json
import socket
import subprocess
import sys
import time

import httpx
import numpy as np
import pytest

from ssmkit.cli import main
from ssmkit.model import instance, mean_shape, sample_random
from ssmkit.ply import parse_ply
from ssmkit.posterior import Observation, ObservationSet, posterior_mean
from ssmkit.statismo import load_statismo, save_statismo

from synthetic import random_model, write_golden_statismo


@pytest.fixture()
def golden_path(tmp_path, golden_bytes):
    path = tmp_path / "golden.h5"
    path.write_bytes(golden_bytes)
    return path


@pytest.fixture()
def model_path(tmp_path):
    model = random_model(seed=40, n_vertices=10, n_components=3)
    path = tmp_path / "model.h5"
    path.write_bytes(save_statismo(model))
    return path


class TestInfo:
    def test_golden_dimensions(self, golden_path, capsys):
        assert main(["info", str(golden_path)]) == 0
        out = capsys.readouterr().out
        assert "vertices:       2" in out
        assert "components:     1" in out

    def test_json_matches_text(self, golden_path, capsys):
        main(["info", str(golden_path)])
        text = capsys.readouterr().out
        main(["info", str(golden_path), "--json"])
        report = json.loads(capsys.readouterr().out)
        assert report["n_vertices"] == 2
        assert report["n_components"] == 1
        assert f"{report['noise_variance']:.6g}" in text
        assert report["metadata"] == {"name": "golden-minimal"}

    def test_missing_file_names_path(self, capsys):
        assert main(["info", "/no/such/model.h5"]) == 2
        assert "/no/such/model.h5" in capsys.readouterr().err


class TestSample:
    def test_zero_coeffs_emit_mean_mesh(self, model_path, tmp_path):
        out = tmp_path / "mean.ply"
        assert main(["sample", str(model_path), "--coeffs", "0,0,0", "-o", str(out)]) == 0
        mesh = parse_ply(out.read_bytes())
        model = load_statismo(model_path.read_bytes())
        assert np.array_equal(mesh.positions, mean_shape(model).positions.astype(np.float32))

    def test_same_seed_is_byte_identical(self, model_path, tmp_path):
        a, b = tmp_path / "a.ply", tmp_path / "b.ply"
        main(["sample", str(model_path), "--seed", "7", "-o", str(a)])
        main(["sample", str(model_path), "--seed", "7", "-o", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_seed_matches_library(self, model_path, tmp_path):
        out = tmp_path / "s.ply"
        report = tmp_path / "alpha.json"
        main(["sample", str(model_path), "--seed", "11", "-o", str(out), "--report", str(report)])
        model = load_statismo(model_path.read_bytes())
        alpha, mesh = sample_random(model, 11)
        assert np.allclose(json.loads(report.read_text())["alpha"], alpha)
        assert np.array_equal(
            parse_ply(out.read_bytes()).positions, mesh.positions.astype(np.float32)
        )

    def test_wrong_coeff_count_is_usage_error(self, model_path, tmp_path, capsys):
        code = main(["sample", str(model_path), "--coeffs", "1,2", "-o", str(tmp_path / "x.ply")])
        assert code == 1
        assert "components" in capsys.readouterr().err

    def test_ascii_format_flag(self, model_path, tmp_path):
        out = tmp_path / "a.ply"
        main(["sample", str(model_path), "--coeffs", "0,0,0", "-o", str(out), "--format", "ascii"])
        assert out.read_bytes().startswith(b"ply\nformat ascii 1.0\n")


class TestPosterior:
    def test_empty_observations_emit_mean_with_warning(self, model_path, tmp_path, capsys):
        obs = tmp_path / "obs.json"
        obs.write_text(json.dumps({"observations": []}))
        out = tmp_path / "p.ply"
        assert main(["posterior", str(model_path), "--obs", str(obs), "-o", str(out)]) == 0
        assert "mean shape" in capsys.readouterr().err
        model = load_statismo(model_path.read_bytes())
        assert np.array_equal(
            parse_ply(out.read_bytes()).positions,
            mean_shape(model).positions.astype(np.float32),
        )

    def test_rank1_scenario_matches_library(self, tmp_path):
        model = random_model(seed=41, n_vertices=8, n_components=1)
        path = tmp_path / "rank1.h5"
        path.write_bytes(save_statismo(model))
        loaded = load_statismo(path.read_bytes())
        target = (loaded.mean[6:9] + np.sqrt(loaded.variances[0]) * loaded.basis[6:9, 0]).tolist()
        obs_path = tmp_path / "obs.json"
        obs_path.write_text(
            json.dumps({"observations": [{"vertex_id": 2, "target": target, "kind": "moved"}]})
        )
        out = tmp_path / "p.ply"
        report = tmp_path / "alpha.json"
        code = main(
            ["posterior", str(path), "--obs", str(obs_path), "-o", str(out), "--report", str(report)]
        )
        assert code == 0
        obs = ObservationSet((Observation(vertex_id=2, target=target),))
        mesh, alpha = posterior_mean(loaded, obs)
        assert np.array_equal(parse_ply(out.read_bytes()).positions,
                              mesh.positions.astype(np.float32))
        saved = json.loads(report.read_text())
        assert np.allclose(saved["alpha"], alpha, atol=1e-12)
        assert saved["n_observations"] == 1

    def test_pinned_without_target_resolves_to_mean(self, model_path, tmp_path):
        obs = tmp_path / "obs.json"
        obs.write_text(json.dumps({"observations": [{"vertex_id": 0, "kind": "pinned"}]}))
        out = tmp_path / "p.ply"
        assert main(["posterior", str(model_path), "--obs", str(obs), "-o", str(out)]) == 0
        model = load_statismo(model_path.read_bytes())
        mesh = parse_ply(out.read_bytes())
        assert np.allclose(mesh.vertex(0), model.mean[:3], atol=1e-6)

    def test_rcond_precedence_flag_over_file(self, model_path, tmp_path):
        obs = tmp_path / "obs.json"
        obs.write_text(
            json.dumps(
                {
                    "observations": [{"vertex_id": 1, "target": [0.5, 0.5, 0.5]}],
                    "rcond": 0.5,
                }
            )
        )
        report_file, report_flag = tmp_path / "rf.json", tmp_path / "rg.json"
        main(["posterior", str(model_path), "--obs", str(obs),
              "-o", str(tmp_path / "x.ply"), "--report", str(report_file)])
        assert json.loads(report_file.read_text())["rcond"] == 0.5
        main(["posterior", str(model_path), "--obs", str(obs), "--rcond", "1e-9",
              "-o", str(tmp_path / "y.ply"), "--report", str(report_flag)])
        assert json.loads(report_flag.read_text())["rcond"] == 1e-9

    def test_missing_obs_file(self, model_path, tmp_path, capsys):
        code = main(["posterior", str(model_path), "--obs", str(tmp_path / "nope.json"),
                     "-o", str(tmp_path / "p.ply")])
        assert code == 2
        assert "nope.json" in capsys.readouterr().err


class TestValidateConvert:
    def test_validate_golden_exits_zero(self, golden_path):
        assert main(["validate", str(golden_path)]) == 0

    def test_validate_corrupt_exits_two(self, tmp_path, capsys):
        def corrupt(f):
            cells = f["/representer/cells"][()]
            cells[0, 0] = 2
            del f["/representer/cells"]
            f.create_dataset("/representer/cells", data=cells)

        path = tmp_path / "bad.h5"
        path.write_bytes(write_golden_statismo(mutate=corrupt))
        assert main(["validate", str(path)]) == 2
        assert "out of range" in capsys.readouterr().err

    def test_convert_then_validate(self, golden_prescaled_bytes, tmp_path):
        src = tmp_path / "prescaled.h5"
        src.write_bytes(golden_prescaled_bytes)
        dst = tmp_path / "canonical.h5"
        assert main(["convert", str(src), "-o", str(dst)]) == 0
        assert main(["validate", str(dst)]) == 0
        # canonical output stores the orthonormal convention
        model = load_statismo(dst.read_bytes(), basis_convention="orthonormal")
        assert abs(np.linalg.norm(model.basis[:, 0]) - 1.0) < 1e-6

    def test_unknown_flag_is_usage_error(self, golden_path):
        with pytest.raises(SystemExit) as exc:
            main(["info", str(golden_path), "--frobnicate"])
        assert exc.value.code == 1


class TestServe:
    def test_health_endpoint_responds(self, tmp_path):
        with socket.socket() as s:
            s.bind(("127.0.0.1", 0))
            port = s.getsockname()[1]
        proc = subprocess.Popen(
            [sys.executable, "-m", "ssmkit.cli", "serve", "--port", str(port)],
            stdout=subprocess.DEVNULL,
            stderr=subprocess.DEVNULL,
        )
        try:
            deadline = time.time() + 15
            status = None
            while time.time() < deadline:
                try:
                    status = httpx.get(f"http://127.0.0.1:{port}/health", timeout=1).status_code
                    break
                except httpx.TransportError:
                    time.sleep(0.1)
            assert status == 200
        finally:
            proc.terminate()
            proc.wait(timeout=10)
