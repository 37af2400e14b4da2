"""Embedding data model and the canonical on-disk feature format.

A FeatureSet bundles N embedding rows (float32) with per-sample metadata:
an opaque string id, a camera index, and optionally a ground-truth person
id (-1 = unknown/junk).

Canonical file layout (format version 1), all integers little-endian:

    bytes 0..3    magic ``PLRF``
    byte  4       format version (1)
    bytes 5..8    u32 N  (rows)
    bytes 9..12   u32 D  (columns)
    byte  13      u8 has_persons flag (0 or 1)
    next N*D*4    row-major float32 payload
    rest          N metadata lines of UTF-8 text, one per row in row
                  order, each ``id<TAB>camera`` or ``id<TAB>camera<TAB>person``,
                  each terminated by a single ``\\n``

The format is bit-exact: ``save(load(path))`` reproduces the file
byte-for-byte, and ``load(save(fs))`` reproduces the FeatureSet with a
bit-identical matrix.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DimensionMismatch, IoFailure, MalformedHeader, NonFiniteValue

MAGIC = b"PLRF"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sBIIB")

MAX_CAMERAS = 256


@dataclass(frozen=True)
class FeatureSet:
    """Immutable set of N embedding rows plus per-sample metadata.

    Invariants (checked at construction): ids/cameras/matrix agree on N,
    N >= 1, D >= 1, all values finite, cameras in 0..255, and persons
    (when present) has length N with values >= -1.
    """

    ids: tuple[str, ...]
    cameras: tuple[int, ...]
    matrix: np.ndarray
    persons: tuple[int, ...] | None = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float32)
        if m.ndim != 2:
            raise DimensionMismatch(f"matrix must be 2-D, got ndim={m.ndim}")
        n, d = m.shape
        if n == 0 or d == 0:
            raise DimensionMismatch(f"empty feature set rejected (N={n}, D={d})")
        object.__setattr__(self, "ids", tuple(str(i) for i in self.ids))
        object.__setattr__(self, "cameras", tuple(int(c) for c in self.cameras))
        if len(self.ids) != n or len(self.cameras) != n:
            raise DimensionMismatch(
                f"metadata length mismatch: {len(self.ids)} ids, "
                f"{len(self.cameras)} cameras, {n} rows"
            )
        for i, s in enumerate(self.ids):
            if "\t" in s or "\n" in s or not s:
                raise DimensionMismatch(f"record {i}: id must be non-empty, tab/newline-free")
        for i, c in enumerate(self.cameras):
            if not 0 <= c < MAX_CAMERAS:
                raise DimensionMismatch(f"record {i}: camera {c} outside 0..{MAX_CAMERAS - 1}")
        if self.persons is not None:
            p = tuple(int(x) for x in self.persons)
            if len(p) != n:
                raise DimensionMismatch(f"metadata length mismatch: {len(p)} persons, {n} rows")
            for i, x in enumerate(p):
                if x < -1:
                    raise DimensionMismatch(f"record {i}: person id {x} < -1")
            object.__setattr__(self, "persons", p)
        bad = ~np.isfinite(m).all(axis=1)
        if bad.any():
            raise NonFiniteValue(f"record {int(np.argmax(bad))}: non-finite feature value")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def with_matrix(self, matrix: np.ndarray) -> "FeatureSet":
        """Same metadata, new matrix (must keep the N x D shape)."""
        if matrix.shape != self.matrix.shape:
            raise DimensionMismatch(
                f"replacement matrix {matrix.shape} != {self.matrix.shape}"
            )
        return FeatureSet(self.ids, self.cameras, matrix, self.persons)

    def sample_ref(self, index: int) -> "SampleRef":
        return SampleRef(index=index, id=self.ids[index], camera=self.cameras[index])


@dataclass(frozen=True)
class SampleRef:
    """Position of one sample inside its owning FeatureSet."""

    index: int
    id: str
    camera: int


class L2NormResult(NamedTuple):
    features: "FeatureSet"
    zero_rows: list[int]


def l2_normalize_rows(fs: FeatureSet) -> L2NormResult:
    """Scale every row to unit Euclidean norm.

    All-zero rows cannot be normalized; they are passed through unchanged
    and their indices reported in ``zero_rows`` (a real extractor bug
    worth surfacing, but not fatal).
    """
    m = fs.matrix.astype(np.float64)
    norms = np.sqrt(np.einsum("ij,ij->i", m, m))
    zero = norms == 0.0
    safe = np.where(zero, 1.0, norms)
    out = (m / safe[:, None]).astype(np.float32)
    return L2NormResult(fs.with_matrix(out), [int(i) for i in np.nonzero(zero)[0]])


def load_features(path) -> FeatureSet:
    """Read a canonical feature file; see the module docstring for layout."""
    try:
        with open(path, "rb") as f:
            blob = f.read()
    except OSError as e:
        raise IoFailure(f"cannot read {path}: {e}") from e

    if len(blob) < _HEADER.size:
        raise MalformedHeader(f"{path}: file shorter than header ({len(blob)} bytes)")
    magic, version, n, d, has_persons = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise MalformedHeader(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise MalformedHeader(f"{path}: unsupported format version {version}")
    if has_persons not in (0, 1):
        raise MalformedHeader(f"{path}: has_persons flag must be 0/1, got {has_persons}")
    if n == 0 or d == 0:
        raise DimensionMismatch(f"{path}: empty set declared (N={n}, D={d})")

    payload_end = _HEADER.size + n * d * 4
    if len(blob) < payload_end:
        raise DimensionMismatch(
            f"{path}: payload truncated, need {n * d * 4} bytes, have "
            f"{len(blob) - _HEADER.size}"
        )
    matrix = np.frombuffer(blob, dtype="<f4", count=n * d, offset=_HEADER.size)
    matrix = matrix.reshape(n, d).copy()
    bad = ~np.isfinite(matrix).all(axis=1)
    if bad.any():
        raise NonFiniteValue(f"{path}: record {int(np.argmax(bad))}: non-finite value")

    try:
        text = blob[payload_end:].decode("utf-8")
    except UnicodeDecodeError as e:
        raise DimensionMismatch(f"{path}: metadata block is not valid UTF-8: {e}") from e
    if not text.endswith("\n"):
        raise DimensionMismatch(f"{path}: metadata block must end with a newline")
    lines = text[:-1].split("\n")
    if len(lines) != n:
        raise DimensionMismatch(f"{path}: {len(lines)} metadata lines, expected {n}")

    want_fields = 3 if has_persons else 2
    ids: list[str] = []
    cameras: list[int] = []
    persons: list[int] = []
    for i, line in enumerate(lines):
        parts = line.split("\t")
        if len(parts) != want_fields:
            raise DimensionMismatch(
                f"{path}: record {i}: {len(parts)} fields, expected {want_fields}"
            )
        ids.append(parts[0])
        try:
            cameras.append(int(parts[1]))
            if has_persons:
                persons.append(int(parts[2]))
        except ValueError as e:
            raise DimensionMismatch(f"{path}: record {i}: non-integer metadata: {e}") from e

    return FeatureSet(
        ids=tuple(ids),
        cameras=tuple(cameras),
        matrix=matrix,
        persons=tuple(persons) if has_persons else None,
    )


def save_features(fs: FeatureSet, path) -> None:
    """Write the canonical file; deterministic for identical inputs."""
    has_persons = fs.persons is not None
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, fs.n, fs.dim, int(has_persons))
    payload = np.ascontiguousarray(fs.matrix, dtype="<f4").tobytes()
    lines = []
    for i in range(fs.n):
        if has_persons:
            lines.append(f"{fs.ids[i]}\t{fs.cameras[i]}\t{fs.persons[i]}\n")
        else:
            lines.append(f"{fs.ids[i]}\t{fs.cameras[i]}\n")
    try:
        with open(path, "wb") as f:
            f.write(header)
            f.write(payload)
            f.write("".join(lines).encode("utf-8"))
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e
