"""Statismo HDF5 shape-model codec: load, save, validate.

Dataset layout (version 0.9, POLYGON_MESH representer):

    /version/majorVersion, /version/minorVersion
    /model/mean            float32 (3N,)
    /model/pcaBasis        float32 (3N, M)
    /model/pcaVariance     float32 (M,)
    /model/noiseVariance   float32 scalar
    /representer/points    float32 (3, N)
    /representer/cells     int32   (3, C)
    /representer@datasetType = "POLYGON_MESH"
    /modelinfo/...         free-form strings, preserved opaquely

Files in the wild store the basis either with orthonormal columns or
pre-scaled by the per-component standard deviation; the loader detects which
and always hands back the orthonormal convention. Saving always emits the
orthonormal convention.
"""

from __future__ import annotations

import io
import os

import h5py
import numpy as np

from .errors import StatismoFormatError
from .model import ORTHONORMALITY_TOL, VARIANCE_DROP_REL, ShapeModel

MESH_DATASET_TYPE = "POLYGON_MESH"
SAVED_VERSION = (0, 9)

_REQUIRED_PATHS = (
    "/version/majorVersion",
    "/version/minorVersion",
    "/model/mean",
    "/model/pcaBasis",
    "/model/pcaVariance",
    "/model/noiseVariance",
    "/representer/points",
    "/representer/cells",
)

BASIS_CONVENTIONS = ("auto", "orthonormal", "scaled")


class ValidationReport:
    """Outcome of :func:`validate_statismo`: a list of human-readable violations."""

    def __init__(self, violations: list[str] | None = None):
        self.violations = list(violations or [])

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, message: str) -> None:
        self.violations.append(message)

    def __repr__(self) -> str:
        state = "ok" if self.ok else f"{len(self.violations)} violations"
        return f"ValidationReport({state})"


def _open(source) -> h5py.File:
    if isinstance(source, (bytes, bytearray, memoryview)):
        buf = io.BytesIO(bytes(source))
    elif isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            buf = io.BytesIO(fh.read())
    else:
        raise TypeError(f"cannot load a Statismo model from {type(source).__name__}")
    try:
        return h5py.File(buf, "r")
    except Exception as exc:
        raise StatismoFormatError(f"not a readable HDF5 container: {exc}") from exc


def _dataset(f: h5py.File, path: str) -> np.ndarray:
    if path not in f:
        raise StatismoFormatError(f"missing dataset {path}")
    node = f[path]
    if not isinstance(node, h5py.Dataset):
        raise StatismoFormatError(f"{path} is not a dataset")
    return node[()]


def _as_canonical_3xk(a: np.ndarray, path: str) -> np.ndarray:
    """Accept (3, K) or (K, 3); (3, 3) is read as canonical 3 x C."""
    if a.ndim != 2:
        raise StatismoFormatError(f"{path} must be 2-d, got shape {a.shape}")
    if a.shape[0] == 3:
        return a
    if a.shape[1] == 3:
        return a.T
    raise StatismoFormatError(f"{path} has shape {a.shape}; one dimension must be 3")


def _resolve_basis(
    basis: np.ndarray, variances: np.ndarray, convention: str
) -> np.ndarray:
    """Return the orthonormal basis under the requested or detected convention."""
    if convention not in BASIS_CONVENTIONS:
        raise ValueError(f"basis convention must be one of {BASIS_CONVENTIONS}")
    if basis.shape[1] == 0:
        return basis

    def gram_error(b):
        return np.abs(b.T @ b - np.eye(b.shape[1])).max()

    if convention == "orthonormal":
        return basis
    if convention == "scaled":
        if np.any(variances <= 0):
            raise StatismoFormatError(
                "pre-scaled basis cannot be unscaled: nonpositive variance present"
            )
        return basis / np.sqrt(variances)

    # auto: prefer the stored-orthonormal reading; the same bytes always
    # produce the same decision
    if gram_error(basis) <= ORTHONORMALITY_TOL:
        return basis
    if np.all(variances > 0):
        unscaled = basis / np.sqrt(variances)
        if gram_error(unscaled) <= ORTHONORMALITY_TOL:
            return unscaled
    raise StatismoFormatError(
        "pcaBasis columns are not orthonormal under either stored convention"
    )


def load_statismo(source, basis_convention: str = "auto") -> ShapeModel:
    """Load a Statismo model from bytes or a file path.

    float32 storage is widened to float64. ``basis_convention`` overrides the
    automatic orthonormal/pre-scaled detection for pathological files.
    """
    with _open(source) as f:
        for path in _REQUIRED_PATHS:
            if path not in f:
                raise StatismoFormatError(f"missing dataset {path}")

        rep = f["/representer"]
        dtype_attr = rep.attrs.get("datasetType")
        if dtype_attr is None:
            raise StatismoFormatError("missing attribute datasetType on /representer")
        if isinstance(dtype_attr, bytes):
            dtype_attr = dtype_attr.decode()
        if dtype_attr != MESH_DATASET_TYPE:
            raise StatismoFormatError(
                f"datasetType is {dtype_attr!r}; only {MESH_DATASET_TYPE} is supported"
            )

        mean = np.asarray(_dataset(f, "/model/mean"), np.float64).ravel()
        basis = np.asarray(_dataset(f, "/model/pcaBasis"), np.float64)
        variances = np.asarray(_dataset(f, "/model/pcaVariance"), np.float64).ravel()
        noise = float(np.asarray(_dataset(f, "/model/noiseVariance")).ravel()[0])
        points = _as_canonical_3xk(
            np.asarray(_dataset(f, "/representer/points"), np.float64),
            "/representer/points",
        )
        cells_raw = np.asarray(_dataset(f, "/representer/cells"), np.int64)
        if cells_raw.size == 0:
            cells = np.zeros((3, 0), np.int64)
        else:
            cells = _as_canonical_3xk(cells_raw, "/representer/cells")

        if basis.ndim != 2:
            raise StatismoFormatError(f"/model/pcaBasis must be 2-d, got shape {basis.shape}")
        if mean.size != basis.shape[0]:
            raise StatismoFormatError(
                f"mean length {mean.size} does not match pcaBasis rows {basis.shape[0]}"
            )
        if variances.size != basis.shape[1]:
            raise StatismoFormatError(
                f"{variances.size} variances for {basis.shape[1]} pcaBasis columns"
            )
        if 3 * points.shape[1] != mean.size:
            raise StatismoFormatError(
                f"representer has {points.shape[1]} points but mean describes "
                f"{mean.size // 3} vertices"
            )

        # drop numerically-dead components before convention detection so the
        # unscale step never divides by ~zero
        if variances.size and variances.max() > 0:
            keep = variances >= VARIANCE_DROP_REL * variances.max()
        else:
            keep = np.zeros(variances.size, dtype=bool)
        basis, variances = basis[:, keep], variances[keep]
        order = np.argsort(-variances, kind="stable")
        basis, variances = basis[:, order], variances[order]

        basis = _resolve_basis(basis, variances, basis_convention)
        metadata = _read_modelinfo(f)

    try:
        return ShapeModel(
            mean=mean,
            basis=basis,
            variances=variances,
            noise_variance=noise,
            triangulation=cells.T,
            reference_points=points.T.ravel(),
            metadata=metadata,
        )
    except ValueError as exc:
        raise StatismoFormatError(str(exc)) from exc


def save_statismo(model: ShapeModel) -> bytes:
    """Serialize a model to Statismo 0.9 bytes (orthonormal basis, float32)."""
    buf = io.BytesIO()
    with h5py.File(buf, "w") as f:
        f.create_dataset("/version/majorVersion", data=np.int32(SAVED_VERSION[0]))
        f.create_dataset("/version/minorVersion", data=np.int32(SAVED_VERSION[1]))
        f.create_dataset("/model/mean", data=model.mean.astype(np.float32))
        f.create_dataset("/model/pcaBasis", data=model.basis.astype(np.float32))
        f.create_dataset("/model/pcaVariance", data=model.variances.astype(np.float32))
        f.create_dataset("/model/noiseVariance", data=np.float32(model.noise_variance))
        points = model.reference_points.reshape(-1, 3).T.astype(np.float32)
        f.create_dataset("/representer/points", data=points)
        cells = model.triangulation.T.astype(np.int32)
        f.create_dataset("/representer/cells", data=cells)
        f["/representer"].attrs["datasetType"] = MESH_DATASET_TYPE
        info = f.create_group("/modelinfo")
        for key, value in model.metadata.items():
            info.create_dataset(str(key), data=str(value))
    return buf.getvalue()


def _read_modelinfo(f: h5py.File) -> dict:
    """Collect string datasets under /modelinfo, keyed by relative path."""
    if "/modelinfo" not in f:
        return {}
    out: dict[str, str] = {}

    def visit(name, node):
        if isinstance(node, h5py.Dataset) and node.shape == ():
            value = node[()]
            if isinstance(value, bytes):
                out[name] = value.decode("utf-8", errors="replace")
            elif isinstance(value, str):
                out[name] = value

    f["/modelinfo"].visititems(visit)
    return out


def validate_statismo(source) -> ValidationReport:
    """Check bytes against the format contract; never raises, reports instead."""
    report = ValidationReport()
    try:
        f = _open(source)
    except StatismoFormatError as exc:
        report.add(f"container: {exc}")
        return report

    with f:
        missing = [p for p in _REQUIRED_PATHS if p not in f]
        for path in missing:
            report.add(f"missing dataset {path}")
        if missing:
            return report

        try:
            mean = np.asarray(_dataset(f, "/model/mean"), np.float64).ravel()
            basis = np.asarray(_dataset(f, "/model/pcaBasis"), np.float64)
            variances = np.asarray(_dataset(f, "/model/pcaVariance"), np.float64).ravel()
            np.asarray(_dataset(f, "/model/noiseVariance"))
            points_raw = np.asarray(_dataset(f, "/representer/points"), np.float64)
            cells_raw = np.asarray(_dataset(f, "/representer/cells"), np.int64)
        except StatismoFormatError as exc:
            report.add(str(exc))
            return report

        dtype_attr = f["/representer"].attrs.get("datasetType")
        if isinstance(dtype_attr, bytes):
            dtype_attr = dtype_attr.decode()
        if dtype_attr is None:
            report.add("missing attribute datasetType on /representer")
        elif dtype_attr != MESH_DATASET_TYPE:
            report.add(f"datasetType is {dtype_attr!r}, expected {MESH_DATASET_TYPE!r}")

        if mean.size % 3 != 0:
            report.add(f"/model/mean length {mean.size} is not a multiple of 3")
        if basis.ndim != 2:
            report.add(f"/model/pcaBasis must be 2-d, got shape {basis.shape}")
        else:
            if basis.shape[0] != mean.size:
                report.add(
                    f"/model/pcaBasis has {basis.shape[0]} rows, expected {mean.size}"
                )
            if variances.size != basis.shape[1]:
                report.add(
                    f"/model/pcaVariance has {variances.size} entries for "
                    f"{basis.shape[1]} basis columns"
                )
        if np.any(variances < 0):
            report.add("/model/pcaVariance contains negative entries")

        try:
            points = _as_canonical_3xk(points_raw, "/representer/points")
            if 3 * points.shape[1] != mean.size:
                report.add(
                    f"/representer/points describes {points.shape[1]} vertices, "
                    f"mean describes {mean.size // 3}"
                )
            n_vertices = points.shape[1]
        except StatismoFormatError as exc:
            report.add(str(exc))
            n_vertices = mean.size // 3

        if cells_raw.size:
            try:
                cells = _as_canonical_3xk(cells_raw, "/representer/cells")
                bad_mask = (cells < 0) | (cells >= n_vertices)
                for col in np.unique(np.argwhere(bad_mask)[:, 1])[:16]:
                    bad_val = cells[:, col][bad_mask[:, col]][0]
                    report.add(
                        f"/representer/cells cell {int(col)} references vertex "
                        f"{int(bad_val)} out of range [0, {n_vertices})"
                    )
            except StatismoFormatError as exc:
                report.add(str(exc))

        if (
            basis.ndim == 2
            and basis.shape[0] == mean.size
            and variances.size == basis.shape[1]
            and not np.any(variances < 0)
        ):
            if variances.size and variances.max() > 0:
                keep = variances >= VARIANCE_DROP_REL * variances.max()
            else:
                keep = np.zeros(variances.size, dtype=bool)
            try:
                _resolve_basis(basis[:, keep], variances[keep], "auto")
            except StatismoFormatError as exc:
                report.add(str(exc))

    return report
