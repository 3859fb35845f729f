"""
File formats

* Binary masks and guide images: PGM (P5) and PPM (P6) with maxval 255.
* Probability masks: "EXPM" header (magic, u32 width, u32 height, u32 0)
  followed by little-endian float32 values, row-major.
* Similarity and transition matrices: "EXTM" header (magic, u32 n, u32 0,
  u32 0) followed by n*n little-endian float32 values, row-major.
* Annotations: JSON lines, one object per line.
"""


from dataclasses import dataclass
import json
import os
from pathlib import Path
import re
import struct
from typing import List, Union
import numpy as np
import jsonschema
from aws_lambda_powertools.logging.logger import Logger # pylint: disable=import-error
from .exceptions import BadDimensions, BadMagic, InvalidParameter, NegativeEntry, ParseError, TruncatedFile
from .geometry import ExtremePoints


__all__ = [
    "AnnotationRecord", "read_annotations", "read_mask", "read_pnm", "read_prob_mask",
    "read_similarity", "write_annotations", "write_mask", "write_pnm", "write_prob_mask",
    "write_similarity"
]


SCHEMA_FILE = os.path.join(os.path.dirname(__file__), "schemas", "annotation.json")

PROB_MAGIC = b"EXPM"
MATRIX_MAGIC = b"EXTM"
HEADER = struct.Struct("<4sIII")
MAXVAL = 255
MASK_THRESHOLD = 128

PathLike = Union[str, Path]


logger = Logger(service="exits", child=True) # pylint: disable=invalid-name


with open(SCHEMA_FILE) as fp:
    schema = json.load(fp) # pylint: disable=invalid-name


_PNM_HEADER = re.compile(rb"\A(P[56])(?:\s+|#[^\n]*\n)+(\d+)(?:\s+|#[^\n]*\n)+(\d+)(?:\s+|#[^\n]*\n)+(\d+)\s")


def read_pnm(path: PathLike) -> np.ndarray:
    """
    Read a binary PGM as (H, W) or a binary PPM as (H, W, 3), dtype uint8
    """

    data = Path(path).read_bytes()
    if data[:2] not in (b"P5", b"P6"):
        raise BadMagic("{}: expected a P5 or P6 image, got {!r}".format(path, data[:2]))

    match = _PNM_HEADER.match(data)
    if match is None:
        raise TruncatedFile("{}: incomplete image header".format(path))
    magic, width, height, maxval = match.group(1), int(match.group(2)), int(match.group(3)), int(match.group(4))
    if maxval != MAXVAL:
        raise BadDimensions("{}: maxval {} not supported, expected {}".format(path, maxval, MAXVAL))
    if width == 0 or height == 0:
        raise BadDimensions("{}: empty image {}x{}".format(path, width, height))

    channels = 3 if magic == b"P6" else 1
    expected = width * height * channels
    payload = data[match.end():match.end() + expected]
    if len(payload) < expected:
        raise TruncatedFile("{}: expected {} bytes of pixels, got {}".format(path, expected, len(payload)))

    pixels = np.frombuffer(payload, dtype=np.uint8)
    if channels == 3:
        return pixels.reshape(height, width, 3).copy()
    return pixels.reshape(height, width).copy()


def write_pnm(path: PathLike, array: np.ndarray) -> Path:
    """
    Write a uint8 (H, W) array as PGM or a (H, W, 3) array as PPM
    """

    array = np.asarray(array)
    if array.ndim == 2:
        magic = b"P5"
    elif array.ndim == 3 and array.shape[2] == 3:
        magic = b"P6"
    else:
        raise BadDimensions("Cannot write an image of shape {}".format(array.shape))
    if array.shape[0] == 0 or array.shape[1] == 0:
        raise BadDimensions("Cannot write an empty image")
    if array.dtype != np.uint8:
        if array.size and (array.min() < 0 or array.max() > MAXVAL):
            raise InvalidParameter("Pixel values must lie in [0, 255]")
        array = array.astype(np.uint8)

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = b"%s\n%d %d\n%d\n" % (magic, array.shape[1], array.shape[0], MAXVAL)
    path.write_bytes(header + np.ascontiguousarray(array).tobytes())
    return path


def read_mask(path: PathLike) -> np.ndarray:
    """
    Read a binary mask PGM: values of 128 and above are foreground
    """

    image = read_pnm(path)
    if image.ndim != 2:
        raise BadDimensions("{}: a mask must be a grayscale PGM".format(path))
    return (image >= MASK_THRESHOLD).astype(np.uint8)


def write_mask(path: PathLike, mask) -> Path:
    """
    Write a binary mask as PGM with 0 for background and 255 for foreground
    """

    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise BadDimensions("A mask must be 2D, got shape {}".format(mask.shape))
    return write_pnm(path, np.where(mask != 0, MAXVAL, 0).astype(np.uint8))


def _read_header(data: bytes, magic: bytes, path: PathLike):
    if len(data) < HEADER.size:
        if data[:len(magic)] != magic[:len(data)]:
            raise BadMagic("{}: expected {!r}".format(path, magic))
        raise TruncatedFile("{}: header needs {} bytes, got {}".format(path, HEADER.size, len(data)))
    fields = HEADER.unpack_from(data)
    if fields[0] != magic:
        raise BadMagic("{}: expected {!r}, got {!r}".format(path, magic, fields[0]))
    return fields


def _read_payload(data: bytes, count: int, path: PathLike) -> np.ndarray:
    expected = HEADER.size + 4 * count
    if len(data) < expected:
        raise TruncatedFile("{}: expected {} bytes, got {}".format(path, expected, len(data)))
    if len(data) > expected:
        raise BadDimensions("{}: {} trailing bytes after the payload".format(path, len(data) - expected))
    return np.frombuffer(data, dtype="<f4", count=count, offset=HEADER.size).astype(np.float32)


def read_prob_mask(path: PathLike) -> np.ndarray:
    """
    Read an EXPM probability mask as float32 (H, W)
    """

    data = Path(path).read_bytes()
    _, width, height, _ = _read_header(data, PROB_MAGIC, path)
    if width == 0 or height == 0:
        raise BadDimensions("{}: empty mask {}x{}".format(path, width, height))
    values = _read_payload(data, width * height, path).reshape(height, width)
    if not np.all((values >= 0) & (values <= 1)):
        raise InvalidParameter("{}: probabilities must lie in [0, 1]".format(path))
    return values


def write_prob_mask(path: PathLike, mask) -> Path:
    """
    Write a probability mask as EXPM
    """

    mask = np.asarray(mask)
    if mask.ndim != 2 or mask.size == 0:
        raise BadDimensions("A probability mask must be a non-empty 2D array, got shape {}".format(mask.shape))
    if not np.all((mask >= 0) & (mask <= 1)):
        raise InvalidParameter("Probabilities must lie in [0, 1]")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    height, width = mask.shape
    path.write_bytes(HEADER.pack(PROB_MAGIC, width, height, 0) + mask.astype("<f4").tobytes())
    return path


def read_similarity(path: PathLike) -> np.ndarray:
    """
    Read an EXTM matrix as float32 (n, n), rejecting negative entries
    """

    data = Path(path).read_bytes()
    _, n, _, _ = _read_header(data, MATRIX_MAGIC, path)
    if n == 0:
        raise BadDimensions("{}: empty matrix".format(path))
    values = _read_payload(data, n * n, path).reshape(n, n)

    negative = np.argwhere(values < 0)
    if negative.size:
        row, col = (int(i) for i in negative[0])
        raise NegativeEntry(row, col, float(values[row, col]))
    if not np.all(np.isfinite(values)):
        raise InvalidParameter("{}: matrix holds non-finite values".format(path))
    return values


def write_similarity(path: PathLike, matrix) -> Path:
    """
    Write a square matrix as EXTM
    """

    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.size == 0:
        raise BadDimensions("Expected a non-empty square matrix, got shape {}".format(matrix.shape))

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(HEADER.pack(MATRIX_MAGIC, matrix.shape[0], 0, 0) + matrix.astype("<f4").tobytes())
    return path


@dataclass(frozen=True)
class AnnotationRecord:
    """
    Extreme-point annotation of one object
    """

    object_id: int
    class_id: int
    extreme: ExtremePoints
    image: str = ""

    def as_dict(self) -> dict:
        return {
            "object_id": self.object_id,
            "class_id": self.class_id,
            "extreme": self.extreme.as_list(),
            "image": self.image
        }


def read_annotations(path: PathLike) -> List[AnnotationRecord]:
    """
    Read a JSON-lines annotation file, keeping record order

    Blank lines are skipped and unknown keys ignored.
    """

    records = []
    with open(path) as fp:
        for line_no, line in enumerate(fp, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                jsonschema.validate(record, schema)
                extreme = ExtremePoints(*[tuple(point) for point in record["extreme"]])
            except json.JSONDecodeError as exc:
                raise ParseError("invalid JSON: {}".format(exc.msg), line_no) from exc
            except jsonschema.ValidationError as exc:
                raise ParseError("invalid annotation: {}".format(exc.message), line_no) from exc
            except InvalidParameter as exc:
                raise ParseError(str(exc), line_no) from exc
            records.append(AnnotationRecord(record["object_id"], record["class_id"], extreme, record.get("image", "")))

    logger.debug({"message": "Read annotations", "path": str(path), "records": len(records)})
    return records


def write_annotations(path: PathLike, records: List[AnnotationRecord]) -> Path:
    """
    Write annotations as JSON lines
    """

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(json.dumps(record.as_dict(), sort_keys=True) + "\n" for record in records))
    return path
