"""Byteplot imaging: byte spans to fixed-size grayscale grids, and per-file records."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from . import SECTION_KEYS
from .errors import EmptySpan
from .pefile import extract_section, parse_pe

SECTION_SIDE = 8
FULL_SIDE = 64


def bytes_to_image(span: bytes, side: int) -> np.ndarray:
    """Downsample `span` to a ``side x side`` uint8 grid by contiguous chunk means.

    The span is cut into ``side**2`` chunks whose lengths differ by at most
    one byte (the longer chunks come first); each pixel is the floored mean of
    its chunk. Spans shorter than ``side**2`` are zero-padded first.
    """
    if side not in (SECTION_SIDE, FULL_SIDE):
        raise ValueError(f"side must be {SECTION_SIDE} or {FULL_SIDE}, got {side}")
    if len(span) == 0:
        raise EmptySpan("cannot image an empty byte span")
    n_pixels = side * side
    values = np.frombuffer(bytes(span), dtype=np.uint8)
    if values.size < n_pixels:
        values = np.concatenate([values, np.zeros(n_pixels - values.size, dtype=np.uint8)])
    q, r = divmod(values.size, n_pixels)
    k = np.arange(n_pixels)
    starts = k * q + np.minimum(k, r)
    lengths = np.where(k < r, q + 1, q)
    sums = np.add.reduceat(values.astype(np.int64), starts)
    return (sums // lengths).astype(np.uint8).reshape(side, side)


@dataclass
class FileRecord:
    sha256: str
    label: int
    sections: dict[str, np.ndarray | None] = field(default_factory=dict)
    full: np.ndarray | None = None
    split: str | None = None
    fold: str | None = None

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")
        for key in SECTION_KEYS:
            self.sections.setdefault(key, None)

    def present(self, key: str) -> bool:
        return self.sections.get(key) is not None

    def to_json(self) -> str:
        obj = {
            "sha256": self.sha256,
            "label": int(self.label),
            "sections": {
                key: None if img is None else [int(v) for v in np.ravel(img)]
                for key, img in ((k, self.sections[k]) for k in SECTION_KEYS)
            },
            "full": None if self.full is None else [int(v) for v in np.ravel(self.full)],
        }
        if self.split is not None:
            obj["split"] = self.split
            obj["fold"] = self.fold
        return json.dumps(obj, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "FileRecord":
        obj = json.loads(line)

        def grid(values, side):
            if values is None:
                return None
            arr = np.asarray(values, dtype=np.int64)
            if arr.size != side * side or arr.min() < 0 or arr.max() > 255:
                raise ValueError(f"bad pixel array of size {arr.size}")
            return arr.astype(np.uint8).reshape(side, side)

        return cls(
            sha256=obj["sha256"],
            label=int(obj["label"]),
            sections={k: grid(obj["sections"].get(k), SECTION_SIDE) for k in SECTION_KEYS},
            full=grid(obj.get("full"), FULL_SIDE),
            split=obj.get("split"),
            fold=obj.get("fold"),
        )


def build_record(data: bytes, label: int) -> FileRecord:
    """Parse a PE file and image its five target sections plus the whole file.

    PE format errors propagate unchanged.
    """
    layout = parse_pe(data)
    sections = {}
    for key in SECTION_KEYS:
        span = extract_section(data, layout, "." + key)
        sections[key] = None if span is None else bytes_to_image(span, SECTION_SIDE)
    return FileRecord(
        sha256=hashlib.sha256(data).hexdigest(),
        label=label,
        sections=sections,
        full=bytes_to_image(data, FULL_SIDE),
    )


def write_records(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.to_json())
            fh.write("\n")


def read_records(path) -> list[FileRecord]:
    with open(path, encoding="utf-8") as fh:
        return [FileRecord.from_json(line) for line in fh if line.strip()]
