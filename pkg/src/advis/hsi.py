"""Hyperspectral cube and label-map I/O.

The native on-disk format is "flat-binary": a raw little-endian payload in
band-sequential (BSQ) order plus a plain-text sidecar header ``<file>.hdr``
with ``key: value`` lines (``rows``, ``cols``, ``bands``, ``dtype``).  Label
maps use the same convention with an integer dtype and a single band.  An
ENVI-style header reader is provided as a convenience for datasets converted
with external tools.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "HsiCube",
    "LabelMap",
    "PointCloud",
    "HsiFormatError",
    "load_cube",
    "load_labels",
    "save_cube",
    "save_labels",
    "flatten",
]

_FLOAT_DTYPES = {"float32": np.float32, "float64": np.float64}
_INT_DTYPES = {
    "uint8": np.uint8,
    "int16": np.int16,
    "int32": np.int32,
    "int64": np.int64,
}

# ENVI numeric codes for the subset of types we accept.
_ENVI_DTYPES = {
    1: np.uint8,
    2: np.int16,
    3: np.int32,
    4: np.float32,
    5: np.float64,
    12: np.uint16,
}


class HsiFormatError(ValueError):
    """Malformed header, payload size mismatch, or invalid values."""


@dataclass(frozen=True)
class HsiCube:
    """A rows x cols x bands reflectance array in row-major pixel order."""

    rows: int
    cols: int
    bands: int
    data: np.ndarray  # shape (rows, cols, bands), float64

    def __post_init__(self):
        if min(self.rows, self.cols, self.bands) < 1:
            raise HsiFormatError("cube dimensions must be positive")
        if self.data.shape != (self.rows, self.cols, self.bands):
            raise HsiFormatError(
                f"data shape {self.data.shape} does not match "
                f"({self.rows}, {self.cols}, {self.bands})"
            )
        _check_finite(self.data)

    @property
    def n_pixels(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True)
class LabelMap:
    """Per-pixel classes in {0, ..., n_classes}; 0 marks unlabeled pixels."""

    labels: np.ndarray  # shape (rows, cols), int32
    n_classes: int

    def __post_init__(self):
        if self.labels.ndim != 2:
            raise HsiFormatError("label map must be two-dimensional")
        lo, hi = int(self.labels.min()), int(self.labels.max())
        if lo < 0 or hi > self.n_classes:
            raise HsiFormatError(
                f"labels must lie in 0..{self.n_classes}, found range [{lo}, {hi}]"
            )

    @property
    def n_labeled(self) -> int:
        return int(np.count_nonzero(self.labels))


@dataclass(frozen=True)
class PointCloud:
    """Flattened cube: one spectrum per retained pixel.

    ``pixel_index[i]`` is the (row, col) of point ``i`` in the source cube;
    ``gt[i]`` is its ground-truth class (>= 1 when restricted to labeled
    pixels), or None when no label map was supplied.
    """

    points: np.ndarray  # (n, bands) float64
    pixel_index: np.ndarray  # (n, 2) int32
    gt: np.ndarray | None = None  # (n,) int32

    def __post_init__(self):
        if self.points.ndim != 2 or len(self.points) != len(self.pixel_index):
            raise ValueError("points and pixel_index must have matching rows")
        if self.gt is not None and len(self.gt) != len(self.points):
            raise ValueError("gt length must match point count")

    def __len__(self) -> int:
        return len(self.points)

    @property
    def n_bands(self) -> int:
        return self.points.shape[1]


def _check_finite(data: np.ndarray) -> None:
    finite = np.isfinite(data)
    if not finite.all():
        first = int(np.flatnonzero(~finite.ravel())[0])
        raise HsiFormatError(f"non-finite value at flat index {first}")


def _read_sidecar(path: Path) -> dict[str, str]:
    header = path.with_name(path.name + ".hdr")
    if not header.exists():
        raise HsiFormatError(f"missing header sidecar {header}")
    fields: dict[str, str] = {}
    for line in header.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise HsiFormatError(f"malformed header line {line!r} in {header}")
        key, value = line.split(":", 1)
        fields[key.strip().lower()] = value.strip()
    return fields


def _sidecar_dims(fields: dict[str, str], keys: tuple[str, ...]) -> tuple[int, ...]:
    dims = []
    for key in keys:
        if key not in fields:
            raise HsiFormatError(f"header is missing required key {key!r}")
        try:
            value = int(fields[key])
        except ValueError as exc:
            raise HsiFormatError(f"header key {key!r} is not an integer") from exc
        if value < 1:
            raise HsiFormatError(f"header key {key!r} must be positive")
        dims.append(value)
    return tuple(dims)


def _read_payload(path: Path, dtype: np.dtype, count: int) -> np.ndarray:
    raw = np.fromfile(path, dtype=np.dtype(dtype).newbyteorder("<"))
    if raw.size != count:
        raise HsiFormatError(
            f"payload {path} holds {raw.size} values, header implies {count}"
        )
    return raw


def load_cube(path: str | Path, format: str = "flat-binary") -> HsiCube:
    """Load a cube from disk. Values are returned unchanged (no scaling)."""
    path = Path(path)
    if format == "flat-binary":
        fields = _read_sidecar(path)
        rows, cols, bands = _sidecar_dims(fields, ("rows", "cols", "bands"))
        dtype_name = fields.get("dtype", "float32")
        if dtype_name not in _FLOAT_DTYPES:
            raise HsiFormatError(f"unsupported cube dtype {dtype_name!r}")
        raw = _read_payload(path, _FLOAT_DTYPES[dtype_name], rows * cols * bands)
        _check_finite(raw)
        data = raw.reshape(bands, rows, cols).transpose(1, 2, 0)
    elif format == "envi":
        data = _load_envi(path)
        _check_finite(data.ravel())
        rows, cols, bands = data.shape
    else:
        raise ValueError(f"unknown cube format {format!r}")
    return HsiCube(rows=rows, cols=cols, bands=bands,
                   data=np.ascontiguousarray(data, dtype=np.float64))


def _load_envi(path: Path) -> np.ndarray:
    """Read an ENVI header + raw payload pair. ``path`` may point to either."""
    if path.suffix.lower() == ".hdr":
        header, payload = path, path.with_suffix("")
        if not payload.exists():
            payload = path.with_suffix(".img")
    else:
        payload = path
        header = path.with_suffix(".hdr")
        if not header.exists():
            header = path.with_name(path.name + ".hdr")
    if not header.exists() or not payload.exists():
        raise HsiFormatError(f"cannot locate ENVI header/payload pair for {path}")

    fields: dict[str, str] = {}
    for line in header.read_text().splitlines():
        if "=" in line:
            key, value = line.split("=", 1)
            fields[key.strip().lower()] = value.strip().strip("{}").strip()

    try:
        lines = int(fields["lines"])
        samples = int(fields["samples"])
        bands = int(fields["bands"])
        dtype_code = int(fields["data type"])
    except (KeyError, ValueError) as exc:
        raise HsiFormatError(f"malformed ENVI header {header}") from exc
    if dtype_code not in _ENVI_DTYPES:
        raise HsiFormatError(f"unsupported ENVI data type {dtype_code}")
    interleave = fields.get("interleave", "bsq").lower()
    offset = int(fields.get("header offset", "0"))
    byte_order = ">" if fields.get("byte order", "0") == "1" else "<"
    dtype = np.dtype(_ENVI_DTYPES[dtype_code]).newbyteorder(byte_order)

    raw = np.fromfile(payload, dtype=dtype, offset=offset)
    if raw.size != lines * samples * bands:
        raise HsiFormatError(
            f"payload {payload} holds {raw.size} values, "
            f"header implies {lines * samples * bands}"
        )
    if interleave == "bsq":
        data = raw.reshape(bands, lines, samples).transpose(1, 2, 0)
    elif interleave == "bil":
        data = raw.reshape(lines, bands, samples).transpose(0, 2, 1)
    elif interleave == "bip":
        data = raw.reshape(lines, samples, bands)
    else:
        raise HsiFormatError(f"unsupported interleave {interleave!r}")
    return data.astype(np.float64)


def load_labels(path: str | Path, n_classes: int | None = None) -> LabelMap:
    """Load a flat-binary integer label map (same sidecar convention)."""
    path = Path(path)
    fields = _read_sidecar(path)
    rows, cols = _sidecar_dims(fields, ("rows", "cols"))
    dtype_name = fields.get("dtype", "int32")
    if dtype_name not in _INT_DTYPES:
        raise HsiFormatError(f"unsupported label dtype {dtype_name!r}")
    raw = _read_payload(path, _INT_DTYPES[dtype_name], rows * cols)
    labels = raw.reshape(rows, cols).astype(np.int32)
    if n_classes is None:
        n_classes = int(labels.max())
    return LabelMap(labels=labels, n_classes=n_classes)


def save_cube(path: str | Path, cube: HsiCube) -> None:
    """Write a cube in the native flat-binary format (float32 BSQ)."""
    path = Path(path)
    cube.data.transpose(2, 0, 1).astype("<f4").tofile(path)
    header = path.with_name(path.name + ".hdr")
    header.write_text(
        f"rows: {cube.rows}\ncols: {cube.cols}\nbands: {cube.bands}\ndtype: float32\n"
    )


def save_labels(path: str | Path, labels: LabelMap) -> None:
    path = Path(path)
    labels.labels.astype("<i4").tofile(path)
    header = path.with_name(path.name + ".hdr")
    header.write_text(
        f"rows: {labels.labels.shape[0]}\ncols: {labels.labels.shape[1]}\ndtype: int32\n"
    )


def flatten(
    cube: HsiCube,
    labels: LabelMap | None = None,
    scope: str = "labeled-only",
    normalization: str = "global-max",
) -> PointCloud:
    """Flatten a cube to a point cloud in row-major pixel order.

    ``labeled-only`` drops pixels whose label is 0 (a label map is then
    required); ``global-max`` divides every entry by the cube-wide maximum so
    entries lie in [0, 1].
    """
    if scope not in ("all", "labeled-only"):
        raise ValueError(f"unknown scope {scope!r}")
    if normalization not in ("none", "global-max"):
        raise ValueError(f"unknown normalization {normalization!r}")
    if labels is not None and labels.labels.shape != (cube.rows, cube.cols):
        raise ValueError(
            f"label map shape {labels.labels.shape} does not match cube "
            f"({cube.rows}, {cube.cols})"
        )
    if scope == "labeled-only" and labels is None:
        raise ValueError("labeled-only scope requires a label map")

    data = cube.data
    if normalization == "global-max":
        peak = float(data.max())
        if peak <= 0.0:
            raise ValueError("global-max normalization undefined: cube max is <= 0")
        data = data / peak

    if scope == "labeled-only":
        mask = labels.labels > 0
    else:
        mask = np.ones((cube.rows, cube.cols), dtype=bool)

    points = data[mask].reshape(-1, cube.bands).astype(np.float64)
    pixel_index = np.argwhere(mask).astype(np.int32)
    gt = labels.labels[mask].astype(np.int32) if labels is not None else None
    return PointCloud(points=points, pixel_index=pixel_index, gt=gt)
