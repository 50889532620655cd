"""Compressed-metadata container: per-macroblock records, JSONL serialization,
GoP segmentation, decode-dependency sets, and I-frame-boundary chunking."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

FORMAT_VERSION = 1
MV_LIMIT = 2048

MB_I, MB_P, MB_B = 0, 1, 2
TYPE_NAMES = ("I", "P", "B")
TYPE_CODES = {"I": MB_I, "P": MB_P, "B": MB_B}

# One concrete (mb_type, partition_mode) -> [0, 12) table: I has a single mode,
# P has six, B has five.  Kept in one place so it stays swappable.
COMBO_TABLE = {(MB_I, 0): 0}
COMBO_TABLE.update({(MB_P, m): 1 + m for m in range(6)})
COMBO_TABLE.update({(MB_B, m): 7 + m for m in range(5)})
N_COMBOS = 12

_COMBO_LOOKUP = np.full((3, 6), -1, dtype=np.int8)
for (_t, _m), _c in COMBO_TABLE.items():
    _COMBO_LOOKUP[_t, _m] = _c


class ParseError(ValueError):
    pass


class StructureError(ValueError):
    pass


@dataclass(frozen=True)
class StreamHeader:
    width_px: int
    height_px: int
    gop_length: int
    codec: str = "synthetic-h264-meta"

    @property
    def mb_shape(self):
        return (self.height_px // 16, self.width_px // 16)


@dataclass
class FrameMeta:
    frame_index: int
    frame_type: str  # "I" | "P" | "B"
    gop_index: int
    mb_type: np.ndarray  # uint8 (MB_H, MB_W), codes MB_I/MB_P/MB_B
    partition: np.ndarray  # uint8 (MB_H, MB_W)
    mv: np.ndarray = field(repr=False)  # int16 (MB_H, MB_W, 2), quarter-pel

    def combo(self):
        """Per-macroblock combo index in [0, 12)."""
        return _COMBO_LOOKUP[self.mb_type, self.partition]

    def validate(self):
        if self.frame_type == "I" and (self.mb_type != MB_I).any():
            raise StructureError(f"I-frame {self.frame_index} has non-I macroblocks")
        if ((self.mb_type == MB_I)[..., None] & (self.mv != 0)).any():
            raise StructureError(f"frame {self.frame_index}: I-macroblock with nonzero MV")
        if (np.abs(self.mv) > MV_LIMIT).any():
            raise StructureError(f"frame {self.frame_index}: motion vector out of range")
        if (self.combo() < 0).any():
            raise StructureError(f"frame {self.frame_index}: invalid (type, partition) pair")

    def __eq__(self, other):
        if not isinstance(other, FrameMeta):
            return NotImplemented
        return (
            self.frame_index == other.frame_index
            and self.frame_type == other.frame_type
            and self.gop_index == other.gop_index
            and np.array_equal(self.mb_type, other.mb_type)
            and np.array_equal(self.partition, other.partition)
            and np.array_equal(self.mv, other.mv)
        )


@dataclass
class GoP:
    frames: list

    def __post_init__(self):
        if not self.frames or self.frames[0].frame_type != "I":
            raise StructureError("GoP must start with an I-frame")
        if sum(1 for f in self.frames if f.frame_type == "I") != 1:
            raise StructureError("GoP must contain exactly one I-frame")

    def __len__(self):
        return len(self.frames)

    @property
    def first_index(self):
        return self.frames[0].frame_index

    @property
    def last_index(self):
        return self.frames[-1].frame_index


@dataclass
class MetadataStream:
    header: StreamHeader
    frames: list

    def validate(self):
        for i, frame in enumerate(self.frames):
            if frame.frame_index != i:
                raise ParseError(f"gap at index {i}")
            if frame.mb_type.shape != self.header.mb_shape:
                raise ParseError(
                    f"frame {i}: grid shape {frame.mb_type.shape} != header {self.header.mb_shape}"
                )
            frame.validate()

    def __eq__(self, other):
        if not isinstance(other, MetadataStream):
            return NotImplemented
        return self.header == other.header and self.frames == other.frames


def _rle_encode(frame):
    """Row-major run-length encoding of (type, mode, dx, dy) macroblock tuples."""
    cells = np.concatenate(
        [
            frame.mb_type.reshape(-1, 1).astype(np.int32),
            frame.partition.reshape(-1, 1).astype(np.int32),
            frame.mv.reshape(-1, 2).astype(np.int32),
        ],
        axis=1,
    )
    runs = []
    start = 0
    n = len(cells)
    while start < n:
        end = start + 1
        while end < n and (cells[end] == cells[start]).all():
            end += 1
        runs.append([end - start, [int(v) for v in cells[start]]])
        start = end
    return runs


def _rle_decode(runs, shape, frame_index):
    cells = []
    for run in runs:
        try:
            count, (t, m, dx, dy) = run
        except (TypeError, ValueError):
            raise ParseError(f"frame {frame_index}: malformed run {run!r}")
        cells.append(np.tile(np.array([t, m, dx, dy], dtype=np.int32), (count, 1)))
    flat = np.concatenate(cells) if cells else np.empty((0, 4), dtype=np.int32)
    if len(flat) != shape[0] * shape[1]:
        raise ParseError(f"frame {frame_index}: grid has {len(flat)} cells, expected {shape[0] * shape[1]}")
    mb_type = flat[:, 0].astype(np.uint8).reshape(shape)
    partition = flat[:, 1].astype(np.uint8).reshape(shape)
    mv = flat[:, 2:].astype(np.int16).reshape(shape + (2,))
    return mb_type, partition, mv


def write_stream(stream: MetadataStream, path):
    stream.validate()
    with open(path, "w") as f:
        header = {
            "type": "header",
            "version": FORMAT_VERSION,
            "width_px": stream.header.width_px,
            "height_px": stream.header.height_px,
            "gop_length": stream.header.gop_length,
            "codec": stream.header.codec,
        }
        f.write(json.dumps(header, sort_keys=True) + "\n")
        for frame in stream.frames:
            rec = {
                "frame_index": frame.frame_index,
                "frame_type": frame.frame_type,
                "gop_index": frame.gop_index,
                "grid": _rle_encode(frame),
            }
            f.write(json.dumps(rec, sort_keys=True) + "\n")


def read_stream(path) -> MetadataStream:
    with open(path) as f:
        lines = [ln for ln in f.read().splitlines() if ln.strip()]
    if not lines:
        raise ParseError("empty metadata file")
    try:
        head = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise ParseError(f"malformed header line: {e}")
    if head.get("type") != "header":
        raise ParseError("first line is not a header record")
    if head.get("version") != FORMAT_VERSION:
        raise ParseError(f"unsupported container version {head.get('version')}")
    header = StreamHeader(
        width_px=head["width_px"],
        height_px=head["height_px"],
        gop_length=head["gop_length"],
        codec=head.get("codec", ""),
    )
    shape = header.mb_shape
    frames = []
    for i, line in enumerate(lines[1:]):
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(f"malformed record at frame {i}: {e}")
        if rec["frame_index"] != i:
            raise ParseError(f"gap at index {i}")
        mb_type, partition, mv = _rle_decode(rec["grid"], shape, i)
        frames.append(
            FrameMeta(
                frame_index=i,
                frame_type=rec["frame_type"],
                gop_index=rec["gop_index"],
                mb_type=mb_type,
                partition=partition,
                mv=mv,
            )
        )
    stream = MetadataStream(header=header, frames=frames)
    stream.validate()
    return stream


def split_gops(stream: MetadataStream):
    if not stream.frames:
        return []
    if stream.frames[0].frame_type != "I":
        raise StructureError("stream does not start with an I-frame")
    gops = []
    current = []
    for frame in stream.frames:
        if frame.frame_type == "I" and current:
            gops.append(GoP(frames=current))
            current = []
        current.append(frame)
    gops.append(GoP(frames=current))
    return gops


def dependent_frames(gop: GoP, k: int):
    """Positions in the GoP that must be decoded before position k.

    I/P frames depend on the whole preceding I/P chain (the saw-tooth);
    a B frame additionally needs its next I/P reference.
    """
    if not 0 <= k < len(gop):
        raise IndexError(f"position {k} out of range for GoP of length {len(gop)}")
    deps = {j for j in range(k) if gop.frames[j].frame_type in ("I", "P")}
    if gop.frames[k].frame_type == "B":
        for j in range(k + 1, len(gop)):
            if gop.frames[j].frame_type in ("I", "P"):
                deps.add(j)
                break
    return deps


def chunk_at_iframes(stream: MetadataStream, worker_count: int):
    """Split into at most worker_count chunks of whole GoPs, earlier chunks larger."""
    if worker_count < 1:
        raise ValueError("worker_count must be >= 1")
    gops = split_gops(stream)
    return chunk_gop_list(gops, worker_count)


def chunk_gop_list(gops, chunk_count):
    if not gops:
        return []
    k = min(chunk_count, len(gops))
    q, r = divmod(len(gops), k)
    chunks = []
    start = 0
    for i in range(k):
        size = q + (1 if i < r else 0)
        chunks.append(gops[start : start + size])
        start += size
    return chunks
