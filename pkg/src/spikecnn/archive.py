"""Model persistence: magic "SCNN", version, then CRC-protected tagged sections.

Layout (all integers little-endian uint32):

    b"SCNN" | version
    per section: 4-byte ASCII tag | payload length | CRC32(payload) | payload

Array payloads are a uint32 ndim, uint32 dims, then float32 data; text
payloads are UTF-8. Model state is stored (and held in memory after each
stage freeze) as float32, so save -> load -> save is byte-identical and
resumed runs match uninterrupted ones bit for bit.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .classifier import SvmModel
from .config import RunConfig, parse_config, serialize_config
from .errors import (
    ArchiveChecksumError,
    ArchiveError,
    ArchiveTruncatedError,
    ArchiveVersionError,
    StageOrderError,
)
from .sailnet import FilterBank

MAGIC = b"SCNN"
VERSION = 1

STAGE_FILTERS = "filters"
STAGE_DISCOVERY = "discovery"
STAGE_CLASSIFIER = "classifier"
STAGE_ORDER = (STAGE_FILTERS, STAGE_DISCOVERY, STAGE_CLASSIFIER)


@dataclass
class ModelArchive:
    """Everything a trained pipeline needs, with stage-completion flags.

    Stages are strictly ordered (filters -> discovery -> classifier); each
    stage's weights are frozen to float32 before the next stage trains.
    """

    config: RunConfig
    filters: FilterBank | None = None
    discovery_weights: np.ndarray | None = None  # (H, N) float32
    svm: SvmModel | None = None
    completed: list[str] = field(default_factory=list)

    def has_stage(self, stage: str) -> bool:
        return stage in self.completed

    def require_stage(self, stage: str) -> None:
        if not self.has_stage(stage):
            raise StageOrderError(stage)

    def mark_complete(self, stage: str) -> None:
        idx = STAGE_ORDER.index(stage)
        for prerequisite in STAGE_ORDER[:idx]:
            self.require_stage(prerequisite)
        if stage not in self.completed:
            self.completed.append(stage)


def _array_payload(arr: np.ndarray) -> bytes:
    a = np.ascontiguousarray(arr, dtype="<f4")
    header = struct.pack("<I", a.ndim) + struct.pack(f"<{a.ndim}I", *a.shape)
    return header + a.tobytes()


def _parse_array(payload: bytes, tag: str) -> np.ndarray:
    if len(payload) < 4:
        raise ArchiveError(f"section {tag}: payload too short for a shape header")
    (ndim,) = struct.unpack_from("<I", payload, 0)
    if len(payload) < 4 + 4 * ndim:
        raise ArchiveError(f"section {tag}: truncated shape header")
    shape = struct.unpack_from(f"<{ndim}I", payload, 4)
    data = np.frombuffer(payload, dtype="<f4", offset=4 + 4 * ndim)
    if data.size != int(np.prod(shape)):
        raise ArchiveError(f"section {tag}: {data.size} values for shape {shape}")
    return data.reshape(shape).copy()


def _sections_of(archive: ModelArchive) -> list[tuple[str, bytes]]:
    sections = [
        ("CONF", serialize_config(archive.config).encode("utf-8")),
        ("STGE", "\n".join(archive.completed).encode("utf-8")),
    ]
    if archive.filters is not None:
        sections.append(("FEXC", _array_payload(archive.filters.filters)))
    if archive.discovery_weights is not None:
        sections.append(("DWGT", _array_payload(archive.discovery_weights)))
    if archive.svm is not None:
        sections.append(("SVMW", _array_payload(archive.svm.weights)))
        sections.append(("SVMM", _array_payload(archive.svm.mean)))
        sections.append(("SVMS", _array_payload(archive.svm.std)))
    return sections


def save_model(archive: ModelArchive, path: str) -> None:
    blob = [MAGIC, struct.pack("<I", VERSION)]
    for tag, payload in _sections_of(archive):
        blob.append(tag.encode("ascii"))
        blob.append(struct.pack("<II", len(payload), zlib.crc32(payload)))
        blob.append(payload)
    with open(path, "wb") as f:
        f.write(b"".join(blob))


def _read_sections(buf: bytes, path: str) -> dict[str, bytes]:
    if len(buf) < 8:
        raise ArchiveTruncatedError(f"{path}: only {len(buf)} bytes")
    if buf[:4] != MAGIC:
        raise ArchiveError(f"{path}: not a model archive (magic {buf[:4]!r})")
    (version,) = struct.unpack_from("<I", buf, 4)
    if version != VERSION:
        raise ArchiveVersionError(f"{path}: format version {version}, expected {VERSION}")
    sections: dict[str, bytes] = {}
    offset = 8
    while offset < len(buf):
        if offset + 12 > len(buf):
            raise ArchiveTruncatedError(f"{path}: section header cut off at byte {offset}")
        tag = buf[offset:offset + 4].decode("ascii", errors="replace")
        length, crc = struct.unpack_from("<II", buf, offset + 4)
        offset += 12
        if offset + length > len(buf):
            raise ArchiveTruncatedError(f"{path}: section {tag} cut off")
        payload = buf[offset:offset + length]
        offset += length
        if zlib.crc32(payload) != crc:
            raise ArchiveChecksumError(f"{path}: checksum mismatch in section {tag}")
        sections[tag] = payload
    return sections


def load_model(path: str) -> ModelArchive:
    with open(path, "rb") as f:
        buf = f.read()
    sections = _read_sections(buf, path)
    if "CONF" not in sections:
        raise ArchiveError(f"{path}: missing CONF section")
    config = parse_config(sections["CONF"].decode("utf-8"))
    completed = [s for s in sections.get("STGE", b"").decode("utf-8").split("\n") if s]

    filters = None
    if "FEXC" in sections:
        filters = FilterBank(_parse_array(sections["FEXC"], "FEXC"))
    discovery_weights = None
    if "DWGT" in sections:
        discovery_weights = _parse_array(sections["DWGT"], "DWGT")
    svm = None
    if "SVMW" in sections:
        svm = SvmModel(
            weights=_parse_array(sections["SVMW"], "SVMW").astype(np.float64),
            mean=_parse_array(sections["SVMM"], "SVMM").astype(np.float64),
            std=_parse_array(sections["SVMS"], "SVMS").astype(np.float64),
            lam=config.svm_lambda,
            feature_mode=config.feature_mode,
        )
    return ModelArchive(
        config=config,
        filters=filters,
        discovery_weights=discovery_weights,
        svm=svm,
        completed=completed,
    )
