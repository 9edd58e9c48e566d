"""
Dataset record and on-disk containers

Binary matrix record ("MDEC"):
    magic  b"MDEC"
    u32    version (1)
    u64    M (rows)
    u64    N (columns)
    u8     mass-preserving flag
    M*N    float64, row-major, little-endian

A dataset is one record plus a JSON sidecar (``<file>.json``) holding the
generator metadata and intrinsic coordinates. Fitted models reuse the same
record format: the blob file is a plain concatenation of records whose
order is listed in the JSON header.
"""
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import orjson

from src.errors import CorruptInputError, InvalidArgumentError

logger = logging.getLogger(__name__)

MAGIC = b"MDEC"
VERSION = 1
_HEADER = struct.Struct("<4sIQQB")
JSON_OPTIONS = orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY

MASS_TOL = 1e-12


@dataclass
class DataSet:
    """Ambient points stored column-wise with generator record"""
    X: np.ndarray
    mass_preserving: bool = False
    intrinsic: Optional[np.ndarray] = None
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def M(self) -> int:
        return int(self.X.shape[0])

    @property
    def N(self) -> int:
        return int(self.X.shape[1])

    def validate(self, tol: float = MASS_TOL) -> "DataSet":
        """Check finiteness and, for conservative data, unit column sums"""
        if self.X.ndim != 2:
            raise InvalidArgumentError(f"X must be a matrix, got shape {self.X.shape}")
        if not np.all(np.isfinite(self.X)):
            raise InvalidArgumentError("dataset contains NaN or Inf entries")
        if self.intrinsic is not None and self.intrinsic.shape[-1] != self.N:
            raise InvalidArgumentError("intrinsic coordinates do not match column count")
        if self.mass_preserving and self.N > 0:
            drift = np.max(np.abs(self.X.sum(axis=0) - 1.0))
            if drift > tol:
                raise InvalidArgumentError(f"mass-preserving columns deviate from 1 by {drift:.3e}")
        return self

    def subset(self, idx: np.ndarray, label: Optional[str] = None) -> "DataSet":
        """Column subset with metadata propagated"""
        idx = np.asarray(idx, dtype=np.int64)
        meta = dict(self.meta)
        if label is not None:
            meta["split"] = label
            meta["indices"] = idx.tolist()
        intrinsic = None if self.intrinsic is None else self.intrinsic[:, idx]
        return DataSet(self.X[:, idx], self.mass_preserving, intrinsic, meta)


###############################################################################
# 1. Binary matrix records
###############################################################################

def write_record(fh, A: np.ndarray, mass_flag: bool = False) -> None:
    """Write one MDEC record; vectors are stored as a single column"""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim == 1:
        A = A.reshape(-1, 1)
    if A.ndim != 2:
        raise InvalidArgumentError(f"only matrices can be stored, got {A.ndim}-d array")
    fh.write(_HEADER.pack(MAGIC, VERSION, A.shape[0], A.shape[1], int(bool(mass_flag))))
    fh.write(np.ascontiguousarray(A, dtype="<f8").tobytes(order="C"))


def read_record(fh) -> Tuple[np.ndarray, bool]:
    """Read one MDEC record from an open binary handle"""
    raw = fh.read(_HEADER.size)
    if len(raw) != _HEADER.size:
        raise CorruptInputError("truncated MDEC header")
    magic, version, m, n, flag = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise CorruptInputError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise CorruptInputError(f"unsupported MDEC version {version}")
    nbytes = m * n * 8
    payload = fh.read(nbytes)
    if len(payload) != nbytes:
        raise CorruptInputError(f"truncated MDEC payload: {len(payload)} of {nbytes} bytes")
    A = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(m, n)
    return A, bool(flag)


def write_json(path, payload: Dict[str, Any]) -> None:
    Path(path).write_bytes(orjson.dumps(payload, option=JSON_OPTIONS))


def read_json(path) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise CorruptInputError(f"missing file: {path}")
    try:
        return orjson.loads(path.read_bytes())
    except orjson.JSONDecodeError as e:
        raise CorruptInputError(f"malformed JSON in {path}: {e}") from e


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


###############################################################################
# 2. Datasets
###############################################################################

def save_dataset(path, ds: DataSet) -> Path:
    """Write the MDEC record and its JSON sidecar"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        write_record(fh, ds.X, ds.mass_preserving)
    write_json(sidecar_path(path), {
        "format": "MDEC",
        "version": VERSION,
        "M": ds.M,
        "N": ds.N,
        "mass_preserving": bool(ds.mass_preserving),
        "meta": ds.meta,
        "intrinsic": None if ds.intrinsic is None else np.asarray(ds.intrinsic, dtype=np.float64),
    })
    logger.info(f"✅ Saved dataset {path} ({ds.M}x{ds.N})")
    return path


def load_dataset(path) -> DataSet:
    """Read a dataset written by save_dataset"""
    path = Path(path)
    if not path.exists():
        raise CorruptInputError(f"missing file: {path}")
    with open(path, "rb") as fh:
        X, flag = read_record(fh)
    side = sidecar_path(path)
    meta: Dict[str, Any] = {}
    intrinsic = None
    if side.exists():
        header = read_json(side)
        meta = header.get("meta") or {}
        if header.get("intrinsic") is not None:
            intrinsic = np.asarray(header["intrinsic"], dtype=np.float64)
            if intrinsic.ndim == 1:
                intrinsic = intrinsic.reshape(1, -1)
    else:
        logger.warning(f"⚠️ No sidecar for {path}, metadata is empty")
    return DataSet(X, flag, intrinsic, meta)


def export_csv(path, ds: DataSet) -> Path:
    """CSV export for inspection: one row per point, ambient columns first"""
    path = Path(path)
    rows = ds.X.T
    header = [f"x{i}" for i in range(ds.M)]
    if ds.intrinsic is not None:
        names = ds.meta.get("intrinsic_names") or [f"p{i}" for i in range(ds.intrinsic.shape[0])]
        rows = np.hstack([rows, ds.intrinsic.T])
        header += list(names)
    np.savetxt(path, rows, delimiter=",", header=",".join(header), comments="", fmt="%.17g")
    return path


###############################################################################
# 3. Model blobs
###############################################################################

def save_blobs(stem, header: Dict[str, Any], blobs: Dict[str, np.ndarray]) -> Tuple[Path, Path]:
    """
    Write ``<stem>.json`` and ``<stem>.bin``

    Blob order follows sorted names so identical models give identical bytes.
    """
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    names: List[str] = sorted(blobs)
    bin_path = stem.with_suffix(".bin")
    with open(bin_path, "wb") as fh:
        for name in names:
            write_record(fh, blobs[name])
    json_path = stem.with_suffix(".json")
    write_json(json_path, {**header, "blobs": names})
    return json_path, bin_path


def load_blobs(stem) -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
    stem = Path(stem)
    header = read_json(stem.with_suffix(".json"))
    bin_path = stem.with_suffix(".bin")
    if not bin_path.exists():
        raise CorruptInputError(f"missing file: {bin_path}")
    blobs: Dict[str, np.ndarray] = {}
    with open(bin_path, "rb") as fh:
        for name in header.get("blobs", []):
            blobs[name], _ = read_record(fh)
    return header, blobs
