"""Binary volume, wavelet-stack and score files.

Layout (little-endian):

    8 bytes   magic  OS3DVOL\\0 | OS3DSTK\\0 | OS3DSCR\\0
    u32       format version
    u32       header length in bytes
    header    UTF-8 JSON, keys sorted
    payload   samples of `kind`, x fastest; stacks and scores store one
              block per orientation

JSON carries floats at full repr precision, so orientation sets and
parameters survive a round trip bit-exactly.
"""
import json
import os
import struct
import uuid
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from src import __version__
from src.helper.errors import FormatError, NonFiniteError, TruncatedFileError, VersionError
from src.helper.loggers import io_logger
from src.models.containers import OrientationScore, OrientationSet, Volume, WaveletStack
from src.models.params import WaveletParams

FORMAT_VERSION = 1
MAGIC = {
    "volume": b"OS3DVOL\0",
    "stack": b"OS3DSTK\0",
    "score": b"OS3DSCR\0",
}
KINDS = {
    "real32": np.dtype("<f4"),
    "complex64": np.dtype("<c8"),
    "real64": np.dtype("<f8"),
    "complex128": np.dtype("<c16"),
}
_PREAMBLE = struct.Struct("<8sII")


def manifest(command: str, flags: Optional[Dict[str, Any]] = None, seed: Optional[int] = None) -> Dict[str, Any]:
    """Provenance record embedded in every header; no timestamps so reruns are byte-identical."""
    return {
        "tool": "orient3d",
        "version": __version__,
        "command": command,
        "flags": flags or {},
        "seed": seed,
    }


def default_kind(data: np.ndarray, double: bool = False) -> str:
    if np.iscomplexobj(data):
        return "complex128" if double else "complex64"
    return "real64" if double else "real32"


# ---------------------------------------------------------------------------
# framing
# ---------------------------------------------------------------------------

def _atomic_write(path, blob: bytes) -> None:
    path = Path(path)
    temp_path = path.parent / f".{path.name}.{uuid.uuid4().hex}.tmp"
    try:
        with open(temp_path, "wb") as f:
            f.write(blob)
        os.replace(temp_path, path)
    finally:
        if temp_path.exists():
            os.remove(temp_path)


def _encode_payload(data: np.ndarray, kind: str) -> bytes:
    if kind not in KINDS:
        raise FormatError(f"unknown sample kind {kind!r}; expected one of {sorted(KINDS)}")
    if np.iscomplexobj(data) and not kind.startswith("complex"):
        raise FormatError(f"complex data cannot be stored as {kind}")
    if not np.all(np.isfinite(data)):
        raise NonFiniteError("refusing to write non-finite samples")
    # spatial axes first, orientation last, then Fortran order: x varies fastest
    spatial_first = np.moveaxis(data, 0, -1) if data.ndim == 4 else data
    return np.asarray(spatial_first, dtype=KINDS[kind]).tobytes(order="F")


def _write(path, file_type: str, header: Dict[str, Any], data: np.ndarray, kind: str) -> None:
    payload = _encode_payload(data, kind)
    header = dict(header, type=file_type, kind=kind)
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    blob = _PREAMBLE.pack(MAGIC[file_type], FORMAT_VERSION, len(header_bytes)) + header_bytes + payload
    _atomic_write(path, blob)
    io_logger.debug(f"wrote {file_type} {path}: {kind}, {len(payload)} payload bytes")


def _read_header(blob: bytes, path) -> Tuple[str, Dict[str, Any], int]:
    if len(blob) < _PREAMBLE.size:
        raise TruncatedFileError(f"{path}: file ends inside the preamble")
    magic, version, header_len = _PREAMBLE.unpack_from(blob)
    file_type = next((t for t, m in MAGIC.items() if m == magic), None)
    if file_type is None:
        raise FormatError(f"{path}: not an orientation-score file (magic {magic!r})")
    if version != FORMAT_VERSION:
        raise VersionError(f"{path}: format version {version}, this build reads {FORMAT_VERSION}")
    end = _PREAMBLE.size + header_len
    if len(blob) < end:
        raise TruncatedFileError(f"{path}: file ends inside the header")
    try:
        header = json.loads(blob[_PREAMBLE.size:end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"{path}: corrupt header: {e}") from e
    return file_type, header, end


def _read(path, expected_type: str) -> Tuple[Dict[str, Any], np.ndarray]:
    try:
        blob = Path(path).read_bytes()
    except OSError as e:
        raise FormatError(f"cannot read {path}: {e}") from e
    file_type, header, offset = _read_header(blob, path)
    if file_type != expected_type:
        raise FormatError(f"{path}: expected a {expected_type} file, found a {file_type} file")

    kind = header.get("kind")
    if kind not in KINDS:
        raise FormatError(f"{path}: unknown sample kind {kind!r}")
    try:
        dims = tuple(int(n) for n in header["dims"])
        shape = dims + ((int(header["orientations"]),) if "orientations" in header else ())
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"{path}: header lacks valid dims: {e}") from e
    count = int(np.prod(shape))
    nbytes = count * KINDS[kind].itemsize
    if len(blob) - offset < nbytes:
        raise TruncatedFileError(f"{path}: payload has {len(blob) - offset} of {nbytes} bytes")
    if len(blob) - offset > nbytes:
        raise FormatError(f"{path}: {len(blob) - offset - nbytes} trailing bytes after payload")

    flat = np.frombuffer(blob, dtype=KINDS[kind], count=count, offset=offset)
    if not np.all(np.isfinite(flat)):
        raise NonFiniteError(f"{path}: payload contains non-finite samples")
    data = flat.reshape(shape, order="F")
    if len(shape) == 4:
        data = np.moveaxis(data, -1, 0)
    native = np.complex128 if kind.startswith("complex") else np.float64
    return header, np.array(data, dtype=native, order="C")


def peek_type(path) -> str:
    with open(path, "rb") as f:
        blob = f.read(_PREAMBLE.size)
    magic = blob[:8]
    for file_type, m in MAGIC.items():
        if m == magic:
            return file_type
    raise FormatError(f"{path}: not an orientation-score file (magic {magic!r})")


# ---------------------------------------------------------------------------
# orientation sets
# ---------------------------------------------------------------------------

def _orientation_set_to_json(orientation_set: OrientationSet) -> Dict[str, Any]:
    record = {
        "directions": orientation_set.directions.tolist(),
        "weights": orientation_set.weights.tolist(),
    }
    if orientation_set.adjacency is not None:
        record["adjacency"] = [a.tolist() for a in orientation_set.adjacency]
    if orientation_set.faces is not None:
        record["faces"] = orientation_set.faces.tolist()
    if orientation_set.antipode is not None:
        record["antipode"] = orientation_set.antipode.tolist()
    return record


def _orientation_set_from_json(record: Dict[str, Any]) -> OrientationSet:
    try:
        adjacency = record.get("adjacency")
        return OrientationSet(
            directions=np.array(record["directions"], dtype=np.float64).reshape(-1, 3),
            weights=np.array(record["weights"], dtype=np.float64),
            adjacency=None if adjacency is None else tuple(np.array(a, dtype=np.int64) for a in adjacency),
            faces=None if record.get("faces") is None else np.array(record["faces"], dtype=np.int64).reshape(-1, 3),
            antipode=None if record.get("antipode") is None else np.array(record["antipode"], dtype=np.int64),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"corrupt orientation set in header: {e}") from e


# ---------------------------------------------------------------------------
# public readers / writers
# ---------------------------------------------------------------------------

def write_volume(path, v: Volume, kind: Optional[str] = None, provenance: Optional[Dict[str, Any]] = None) -> None:
    header = {
        "dims": list(v.dims),
        "spacing": [float(s) for s in v.spacing],
        "manifest": provenance or manifest("library"),
    }
    _write(path, "volume", header, v.data, kind or default_kind(v.data))


def read_volume(path) -> Volume:
    header, data = _read(path, "volume")
    if not header["kind"].startswith("complex"):
        data = data.real
    return Volume(data, tuple(float(s) for s in header["spacing"]))


def write_stack(path, stack: WaveletStack, provenance: Optional[Dict[str, Any]] = None) -> None:
    header = {
        "dims": list(stack.grid),
        "orientations": len(stack),
        "orientation_set": _orientation_set_to_json(stack.orientation_set),
        "params": stack.params.model_dump(mode="json"),
        "angular_scale": stack.angular_scale,
        "manifest": provenance or manifest("library"),
    }
    _write(path, "stack", header, stack.filters, "real64")


def read_stack(path) -> WaveletStack:
    header, filters = _read(path, "stack")
    filters = filters.real if np.iscomplexobj(filters) else filters
    orientation_set = _orientation_set_from_json(header.get("orientation_set", {}))
    if len(orientation_set) != filters.shape[0]:
        raise FormatError(f"{path}: {len(orientation_set)} orientations for {filters.shape[0]} filters")
    m_psi = np.tensordot(orientation_set.weights, filters ** 2, axes=(0, 0))
    return WaveletStack(
        filters=filters,
        orientation_set=orientation_set,
        m_psi=m_psi,
        params=WaveletParams.model_validate(header["params"]),
        angular_scale=float(header["angular_scale"]),
    )


def write_score(path, U: OrientationScore, kind: str = "complex128",
                provenance: Optional[Dict[str, Any]] = None) -> None:
    header = {
        "dims": list(U.grid),
        "orientations": U.data.shape[0],
        "orientation_set": _orientation_set_to_json(U.orientation_set),
        "spacing": [float(s) for s in U.spacing],
        "real_source": bool(U.real_source),
        "pad": [int(p) for p in U.pad],
        "manifest": provenance or manifest("library"),
    }
    _write(path, "score", header, U.data, kind)


def read_score(path) -> OrientationScore:
    header, data = _read(path, "score")
    orientation_set = _orientation_set_from_json(header.get("orientation_set", {}))
    if len(orientation_set) != data.shape[0]:
        raise FormatError(f"{path}: {len(orientation_set)} orientations for {data.shape[0]} score channels")
    return OrientationScore(
        data=data.astype(np.complex128, copy=False),
        orientation_set=orientation_set,
        spacing=tuple(float(s) for s in header["spacing"]),
        real_source=bool(header["real_source"]),
        pad=tuple(int(p) for p in header["pad"]),
    )


def read_manifest(path) -> Dict[str, Any]:
    blob = Path(path).read_bytes()
    _, header, _ = _read_header(blob, path)
    return header.get("manifest", {})


# ---------------------------------------------------------------------------
# figure export
# ---------------------------------------------------------------------------

def extract_slice(data: np.ndarray, axis: int, index: Optional[int] = None) -> np.ndarray:
    if axis not in (0, 1, 2):
        raise FormatError(f"slice axis must be 0, 1 or 2, got {axis}")
    n = data.shape[axis]
    index = n // 2 if index is None else index
    if not 0 <= index < n:
        raise FormatError(f"slice index {index} out of range for axis of length {n}")
    plane = np.take(data, index, axis=axis)
    return np.abs(plane) if np.iscomplexobj(plane) else plane


def write_pgm(path, image: np.ndarray, extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """8-bit binary PGM, min-max normalized; bounds go to a `<path>.json` sidecar.

    image is indexed [column, row] like the volumes it is cut from.
    """
    image = np.asarray(image, dtype=np.float64)
    lo, hi = float(image.min()), float(image.max())
    span = hi - lo
    scaled = np.zeros_like(image) if span == 0 else (image - lo) / span
    pixels = np.round(scaled * 255).astype(np.uint8).T
    height, width = pixels.shape
    _atomic_write(path, f"P5\n{width} {height}\n255\n".encode("ascii") + pixels.tobytes())
    sidecar = dict(extra or {}, min=lo, max=hi, width=width, height=height)
    _atomic_write(f"{path}.json", json.dumps(sidecar, sort_keys=True, indent=2).encode("utf-8"))
    return sidecar
