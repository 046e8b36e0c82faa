"""Statistical shape model core: data model, instance synthesis, sampling, PCA build.

A model holds absolute vertex coordinates throughout: an instance is
``mean + basis @ (sqrt(variances) * alpha)``. The scaled basis (orthonormal
columns times per-component standard deviations) is never stored; it is
recomputed from the orthonormal basis wherever it is needed, which keeps the
stored orthonormality invariant checkable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError

ORTHONORMALITY_TOL = 1e-5
VARIANCE_DROP_REL = 1e-12


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _check_triangles(triangles: np.ndarray, n_vertices: int) -> None:
    if triangles.size and (triangles.min() < 0 or triangles.max() >= n_vertices):
        bad = triangles[(triangles < 0) | (triangles >= n_vertices)][0]
        raise ValueError(
            f"triangle index {bad} out of range for {n_vertices} vertices"
        )


@dataclass(frozen=True)
class TriangleMesh:
    """Vertex positions (flat xyz vector of length 3N) plus triangle indices."""

    positions: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        positions = np.ascontiguousarray(self.positions, dtype=np.float64).ravel()
        triangles = np.ascontiguousarray(self.triangles, dtype=np.int32).reshape(-1, 3)
        if positions.size % 3 != 0:
            raise DimensionError(
                f"positions length {positions.size} is not a multiple of 3"
            )
        if not np.all(np.isfinite(positions)):
            raise ValueError("mesh positions contain non-finite values")
        _check_triangles(triangles, positions.size // 3)
        object.__setattr__(self, "positions", _readonly(positions))
        object.__setattr__(self, "triangles", _readonly(triangles))

    @property
    def n_vertices(self) -> int:
        return self.positions.size // 3

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def points(self) -> np.ndarray:
        """Positions viewed as an (N, 3) array."""
        return self.positions.reshape(-1, 3)

    def vertex(self, vertex_id: int) -> np.ndarray:
        return self.positions[3 * vertex_id : 3 * vertex_id + 3]


@dataclass(frozen=True)
class ShapeModel:
    """PCA shape model: mean, orthonormal basis, per-component variances.

    Invariants, checked on construction (i.e. on every load or build):
    columns of ``basis`` are orthonormal to 1e-5 per Gram entry, variances are
    nonincreasing and nonnegative, and all dimensions are consistent.
    """

    mean: np.ndarray               # (3N,)
    basis: np.ndarray              # (3N, M), orthonormal columns
    variances: np.ndarray          # (M,), nonincreasing
    noise_variance: float = 0.0
    triangulation: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), np.int32))
    reference_points: np.ndarray | None = None  # (3N,), defaults to mean
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        mean = np.ascontiguousarray(self.mean, dtype=np.float64).ravel()
        basis = np.ascontiguousarray(self.basis, dtype=np.float64)
        variances = np.ascontiguousarray(self.variances, dtype=np.float64).ravel()
        tris = np.ascontiguousarray(self.triangulation, dtype=np.int32).reshape(-1, 3)
        ref = self.reference_points
        ref = mean.copy() if ref is None else np.ascontiguousarray(ref, np.float64).ravel()

        if mean.size % 3 != 0:
            raise DimensionError(f"mean length {mean.size} is not a multiple of 3")
        if basis.ndim != 2 or basis.shape[0] != mean.size:
            raise DimensionError(
                f"basis shape {basis.shape} does not match mean length {mean.size}"
            )
        if variances.size != basis.shape[1]:
            raise DimensionError(
                f"{variances.size} variances for {basis.shape[1]} basis columns"
            )
        if ref.size != mean.size:
            raise DimensionError(
                f"reference_points length {ref.size} does not match mean length {mean.size}"
            )
        for name, arr in (("mean", mean), ("basis", basis), ("variances", variances)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
        if np.any(variances < 0):
            raise ValueError("variances must be nonnegative")
        if np.any(np.diff(variances) > 0):
            raise ValueError("variances must be sorted nonincreasing")
        gram = basis.T @ basis
        err = np.abs(gram - np.eye(basis.shape[1])).max() if basis.size else 0.0
        if err > ORTHONORMALITY_TOL:
            raise ValueError(
                f"basis columns are not orthonormal (max Gram deviation {err:.3e})"
            )
        _check_triangles(tris, mean.size // 3)
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be >= 0")

        object.__setattr__(self, "mean", _readonly(mean))
        object.__setattr__(self, "basis", _readonly(basis))
        object.__setattr__(self, "variances", _readonly(variances))
        object.__setattr__(self, "noise_variance", float(self.noise_variance))
        object.__setattr__(self, "triangulation", _readonly(tris))
        object.__setattr__(self, "reference_points", _readonly(ref))

    @property
    def n_vertices(self) -> int:
        return self.mean.size // 3

    @property
    def n_components(self) -> int:
        return self.basis.shape[1]

    def scaled_basis_rows(self, row_indices: np.ndarray | None = None) -> np.ndarray:
        """Rows of the standard-deviation-scaled basis for the given flat indices.

        Only the requested rows are materialized; with ``None`` the full scaled
        basis is returned (small models only).
        """
        cols = np.sqrt(self.variances)
        if row_indices is None:
            return self.basis * cols
        return self.basis[row_indices, :] * cols


def _coerce_alpha(model: ShapeModel, alpha) -> np.ndarray:
    a = np.asarray(alpha, dtype=np.float64).ravel()
    if a.size != model.n_components:
        raise DimensionError(
            f"coefficient vector has length {a.size}, model has "
            f"{model.n_components} components"
        )
    if not np.all(np.isfinite(a)):
        raise ValueError("coefficients contain non-finite values")
    return a


def instance(model: ShapeModel, alpha) -> TriangleMesh:
    """Synthesize the shape ``mean + basis @ (sqrt(variances) * alpha)``."""
    a = _coerce_alpha(model, alpha)
    positions = model.mean + model.basis @ (np.sqrt(model.variances) * a)
    return TriangleMesh(positions, model.triangulation)


def mean_shape(model: ShapeModel) -> TriangleMesh:
    """The model mean, i.e. the instance at zero coefficients."""
    return instance(model, np.zeros(model.n_components))


def sample_random(model: ShapeModel, seed: int) -> tuple[np.ndarray, TriangleMesh]:
    """Draw i.i.d. standard-normal coefficients from a seeded generator.

    The same seed always yields the same coefficients and mesh.
    """
    rng = np.random.default_rng(seed)
    alpha = rng.standard_normal(model.n_components)
    return alpha, instance(model, alpha)


def build_model(
    shapes,
    triangulation=None,
    reference_points=None,
    rank_limit: int | None = None,
    noise_variance: float = 0.0,
    metadata: dict | None = None,
) -> ShapeModel:
    """Build a model from shape vectors in dense correspondence.

    The mean is the arithmetic mean of the shapes; basis and variances come
    from an SVD of the centered data matrix (the covariance itself is never
    materialized), with the 1/n variance normalization. Components are
    truncated to min(rank, rank_limit) and components whose variance falls
    below 1e-12 of the largest are dropped.
    """
    data = np.asarray(shapes, dtype=np.float64)
    if data.ndim != 2:
        raise DimensionError(
            f"expected an (n_shapes, 3N) array of shapes, got shape {data.shape}"
        )
    n, dim = data.shape
    if n < 2:
        raise ValueError(f"need at least 2 shapes to build a model, got {n}")
    if dim % 3 != 0:
        raise DimensionError(f"shape vectors of length {dim} are not xyz triples")
    if rank_limit is not None and rank_limit < 0:
        raise ValueError("rank_limit must be >= 0")

    mu = data.mean(axis=0)
    centered = (data - mu).T / np.sqrt(n)  # (3N, n); singular values squared = 1/n eigenvalues
    u, s, _ = np.linalg.svd(centered, full_matrices=False)

    max_rank = min(n - 1, dim)
    if rank_limit is not None:
        max_rank = min(max_rank, rank_limit)
    u, s = u[:, :max_rank], s[:max_rank]
    variances = s**2
    if variances.size and variances[0] > 0:
        keep = variances >= VARIANCE_DROP_REL * variances[0]
    else:
        keep = np.zeros(variances.size, dtype=bool)
    u, variances = u[:, keep], variances[keep]

    return ShapeModel(
        mean=mu,
        basis=u,
        variances=variances,
        noise_variance=noise_variance,
        triangulation=triangulation if triangulation is not None else np.zeros((0, 3), np.int32),
        reference_points=reference_points,
        metadata=metadata or {},
    )
