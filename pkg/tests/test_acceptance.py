"""Acceptance suite: one test per release criterion, each printing a
pass/fail line (run with ``pytest -s`` or directly as a script).

Tolerances are pinned here and nowhere else.
"""

import contextlib
import json
import sys
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from ssmkit.cli import main as cli_main
from ssmkit.linalg import pinv
from ssmkit.model import build_model, instance, sample_random
from ssmkit.ply import export_ply, parse_ply
from ssmkit.posterior import (
    Observation,
    ObservationSet,
    assemble_targets,
    posterior_mean,
    select_rows,
    solve_alpha,
)
from ssmkit.service import ServiceConfig, create_app
from ssmkit.statismo import load_statismo, save_statismo

from oracles import lstsq_normal_equations, principal_angles
from synthetic import face_model, nose_variant_observations, random_model, write_golden_statismo


@contextlib.contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"[FAIL] {name}", flush=True)
        raise
    print(f"[PASS] {name}", flush=True)


def test_posterior_interpolation_on_random_models():
    with criterion("posterior interpolation (50 random models, 3k <= M, full row rank)"):
        rng = np.random.default_rng(2024)
        started = time.perf_counter()
        checked = 0
        for _ in range(50):
            n_vertices = int(rng.integers(10, 201))
            m = int(rng.integers(3, 21))
            model = random_model(
                seed=int(rng.integers(0, 2**31)),
                n_vertices=n_vertices,
                n_components=m,
                triangulated=False,
            )
            k_choices = {1, m // 3, int(rng.integers(1, m // 3 + 1))}
            for k in sorted(k_choices):
                ids = rng.choice(n_vertices, size=k, replace=False)
                targets = model.mean.reshape(-1, 3)[ids] + rng.uniform(-0.5, 0.5, (k, 3))
                obs = ObservationSet(
                    tuple(
                        Observation(vertex_id=int(v), target=t)
                        for v, t in zip(ids, targets)
                    )
                )
                sub = select_rows(model, obs)
                s = np.linalg.svd(sub.basis_q_p, compute_uv=False)
                assert s.min() > 1e-10 * s.max(), "degenerate draw; criterion requires full row rank"
                mesh, _ = posterior_mean(model, obs)
                worst = max(
                    np.abs(mesh.vertex(o.vertex_id) - o.target).max() for o in obs
                )
                assert worst <= 1e-6, f"target missed by {worst:.3e}"
                checked += 1
        elapsed = time.perf_counter() - started
        assert elapsed < 10.0, f"interpolation run took {elapsed:.2f}s (limit 10s)"
        assert checked >= 100


def test_solve_alpha_least_squares_optimality():
    with criterion("coefficient solve matches least-squares oracle (100 overdetermined)"):
        rng = np.random.default_rng(77)
        for _ in range(100):
            m = int(rng.integers(2, 9))
            k = int(rng.integers(m, 3 * m))  # 3k rows > m columns, overdetermined
            n_vertices = k + int(rng.integers(1, 10))
            model = random_model(
                seed=int(rng.integers(0, 2**31)),
                n_vertices=n_vertices,
                n_components=m,
                triangulated=False,
            )
            ids = rng.choice(n_vertices, size=k, replace=False)
            targets = model.mean.reshape(-1, 3)[ids] + rng.uniform(-1, 1, (k, 3))
            obs = ObservationSet(
                tuple(Observation(vertex_id=int(v), target=t) for v, t in zip(ids, targets))
            )
            sub = select_rows(model, obs)
            alpha = solve_alpha(sub, obs)
            ref = lstsq_normal_equations(
                sub.basis_q_p, assemble_targets(sub, obs) - sub.mean_p
            )
            assert np.linalg.norm(alpha - ref) <= 1e-8


def test_moore_penrose_condition_suite():
    with criterion("Moore-Penrose conditions <= 1e-9 (200 matrices incl. rank-deficient)"):
        rng = np.random.default_rng(55)
        for trial in range(200):
            rows = int(rng.integers(1, 31))
            cols = int(rng.integers(1, 31))
            if trial % 2 == 0:
                a = rng.standard_normal((rows, cols))
            else:
                r = int(rng.integers(1, min(rows, cols) + 1))
                a = rng.standard_normal((rows, r)) @ rng.standard_normal((r, cols))
            a /= max(np.abs(a).max(), 1.0)
            p = pinv(a)
            assert np.abs(a @ p @ a - a).max() <= 1e-9
            assert np.abs(p @ a @ p - p).max() <= 1e-9
            assert np.abs((a @ p).T - a @ p).max() <= 1e-9
            assert np.abs((p @ a).T - p @ a).max() <= 1e-9


def test_sampling_covariance_statistics():
    with criterion("sample covariance of 100k draws within 5% of Q Q^T (3N=30, M=5)"):
        model = random_model(seed=404, n_vertices=10, n_components=5, triangulated=False)
        draws = np.empty((100_000, 30))
        for seed in range(draws.shape[0]):
            draws[seed] = sample_random(model, seed)[1].positions
        sample_cov = np.cov(draws, rowvar=False)
        q = model.basis * np.sqrt(model.variances)
        target = q @ q.T
        rel = np.linalg.norm(sample_cov - target) / np.linalg.norm(target)
        assert rel < 0.05, f"relative Frobenius error {rel:.4f}"


def test_pca_subspace_recovery():
    with criterion("rank-2 subspace recovered from 50 exact samples (< 1e-6 rad)"):
        true = random_model(seed=7, n_vertices=20, n_components=2, triangulated=False)
        rng = np.random.default_rng(8)
        shapes = np.stack(
            [instance(true, rng.standard_normal(2)).positions for _ in range(50)]
        )
        built = build_model(shapes)
        assert built.n_components == 2
        assert principal_angles(built.basis, true.basis).max() < 1e-6


def test_codec_round_trips():
    with criterion("codec round trips (Statismo float32, PLY both modes, both conventions)"):
        model = random_model(seed=101, n_vertices=14, n_components=4)
        again = load_statismo(save_statismo(model))
        scale = np.abs(model.mean).max()
        assert np.abs(again.mean - model.mean).max() <= 1e-6 * scale
        assert np.abs(again.basis - model.basis).max() <= 1e-6
        assert np.allclose(again.variances, model.variances, rtol=1e-6)
        assert np.array_equal(again.triangulation, model.triangulation)

        mesh = sample_random(model, 3)[1]
        for mode in ("ascii", "binary_little_endian"):
            back = parse_ply(export_ply(mesh, mode))
            assert np.array_equal(back.positions, mesh.positions.astype(np.float32))
            assert np.array_equal(back.triangles, mesh.triangles)

        ortho = load_statismo(write_golden_statismo(prescaled=False))
        scaled = load_statismo(write_golden_statismo(prescaled=True))
        assert np.abs(ortho.basis - scaled.basis).max() <= 1e-6
        assert np.abs(ortho.variances - scaled.variances).max() <= 1e-6
        assert np.array_equal(ortho.mean, scaled.mean)


def test_nose_reconstruction_analog(tmp_path):
    with criterion("5 nose-variant reconstructions on 500-vertex face (hit 1e-6, < 5s)"):
        started = time.perf_counter()
        model, nose_ids = face_model()
        assert model.n_vertices == 500
        model_path = tmp_path / "face.h5"
        model_path.write_bytes(save_statismo(model))
        served_model = load_statismo(model_path.read_bytes())

        variants = ("slim", "wide", "big", "small", "hooked")
        meshes = []
        for variant in variants:
            doc = nose_variant_observations(served_model, nose_ids, variant)
            obs_path = tmp_path / f"{variant}.json"
            obs_path.write_text(json.dumps(doc))
            out_path = tmp_path / f"{variant}.ply"
            code = cli_main(
                ["posterior", str(model_path), "--obs", str(obs_path), "-o", str(out_path)]
            )
            assert code == 0
            mesh = parse_ply(out_path.read_bytes())
            for entry in doc["observations"]:
                got = mesh.vertex(entry["vertex_id"])
                assert np.abs(got - np.array(entry["target"])).max() <= 1e-6
            meshes.append(mesh.positions)

        for i in range(len(meshes)):
            for j in range(i + 1, len(meshes)):
                assert np.abs(meshes[i] - meshes[j]).max() > 1e-3, "variants must differ"

        elapsed = time.perf_counter() - started
        assert elapsed < 5.0, f"nose scenario took {elapsed:.2f}s (limit 5s)"


def test_cli_service_parity(tmp_path):
    with criterion("CLI and service produce byte-identical binary PLY posteriors"):
        model, nose_ids = face_model()
        model_bytes = save_statismo(model)
        model_path = tmp_path / "face.h5"
        model_path.write_bytes(model_bytes)
        served_model = load_statismo(model_bytes)
        doc = nose_variant_observations(served_model, nose_ids, "big")
        doc["rcond"] = 1e-10
        obs_path = tmp_path / "obs.json"
        obs_path.write_text(json.dumps(doc))

        out_path = tmp_path / "cli.ply"
        assert cli_main(
            ["posterior", str(model_path), "--obs", str(obs_path), "-o", str(out_path)]
        ) == 0
        cli_bytes = out_path.read_bytes()

        client = TestClient(create_app(ServiceConfig()))
        sid = client.post("/sessions", files={"model": ("face.h5", model_bytes)}).json()[
            "session_id"
        ]
        r = client.put(f"/sessions/{sid}/observations", json=doc)
        assert r.status_code == 200
        assert client.post(f"/sessions/{sid}/posterior").json()["changed"] is True
        service_bytes = client.get(f"/sessions/{sid}/mesh?format=ply_binary").content
        assert cli_bytes == service_bytes


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-s", "-q"]))
