"""Synthetic PE corpus with class-dependent section statistics, and the three-way split.

Generated files are minimal but well-formed PE32 images: DOS header, PE
signature, COFF header, a zero-filled optional header with only the magic and
alignment fields set, the section table and the raw section data. Nothing in
them is executable.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import struct
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import SECTION_KEYS
from .errors import EmptyManifest
from .pefile import SectionRecord

log = logging.getLogger(__name__)

SPLITS = ("qcnn_train", "scorer_train", "test")
FOLDS = ("train", "val")
MANIFEST_HEADER = ["path", "sha256", "label", "split", "fold"]

E_LFANEW = 0x80
OPTIONAL_HEADER_SIZE = 224
FILE_ALIGNMENT = 0x200
SECTION_ALIGNMENT = 0x1000
_BLOCK = 64

# ------------------------------------------------------------------ PE writer


def _align(value: int, to: int) -> int:
    return (value + to - 1) // to * to


def build_pe(sections) -> tuple[bytes, list[SectionRecord]]:
    """Assemble a PE image from ``(name, payload)`` pairs.

    ``SizeOfRawData`` is the exact payload length (not rounded to the file
    alignment) so extraction returns the payload byte for byte; payload starts
    are aligned to 0x200 with zero filler. Returns the image and the ground
    truth section records.
    """
    sections = [(name, bytes(payload)) for name, payload in sections]
    n = len(sections)
    table_at = E_LFANEW + 4 + 20 + OPTIONAL_HEADER_SIZE
    headers_end = _align(table_at + 40 * n, FILE_ALIGNMENT)

    out = bytearray(headers_end)
    out[0:2] = b"MZ"
    struct.pack_into("<I", out, 0x3C, E_LFANEW)
    out[E_LFANEW:E_LFANEW + 4] = b"PE\0\0"
    struct.pack_into("<HHIIIHH", out, E_LFANEW + 4, 0x14C, n, 0, 0, 0,
                     OPTIONAL_HEADER_SIZE, 0x0102)
    opt_at = E_LFANEW + 24
    struct.pack_into("<H", out, opt_at, 0x10B)
    struct.pack_into("<II", out, opt_at + 32, SECTION_ALIGNMENT, FILE_ALIGNMENT)

    records = []
    raw_at = headers_end
    virtual_at = SECTION_ALIGNMENT
    for i, (name, payload) in enumerate(sections):
        encoded = name.encode("latin-1")
        if len(encoded) > 8:
            raise ValueError(f"section name {name!r} longer than 8 bytes")
        offset = raw_at if payload else 0
        struct.pack_into("<8sIIIIIIHHI", out, table_at + 40 * i, encoded, len(payload),
                         virtual_at, len(payload), offset, 0, 0, 0, 0, 0x40000040)
        if payload:
            out.extend(bytes(raw_at - len(out)))
            out.extend(payload)
            raw_at = _align(len(out), FILE_ALIGNMENT)
        virtual_at += _align(max(len(payload), 1), SECTION_ALIGNMENT)
        records.append(SectionRecord(name, offset, len(payload)))
    return bytes(out), records


# ------------------------------------------------------------- configuration


@dataclass
class SectionProfile:
    """Byte statistics of one section for one class.

    Content is drawn in 64-byte blocks: a block is all zeros with probability
    `zero_fraction`, otherwise normal(`mean`, `width`) clipped to bytes.
    """

    presence: float
    size: tuple[int, int]
    mean: float
    width: float
    zero_fraction: float
    payload_prob: float = 0.0
    payload_fraction: tuple[float, float] = (0.3, 0.6)
    payload_at_end: bool = True

    def __post_init__(self):
        for name in ("presence", "zero_fraction", "payload_prob"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        lo, hi = self.size
        if not 1 <= lo <= hi:
            raise ValueError(f"bad size range {self.size}")
        self.size = (int(lo), int(hi))
        self.payload_fraction = tuple(float(v) for v in self.payload_fraction)


def _benign_profiles() -> dict[str, SectionProfile]:
    return {
        "text": SectionProfile(1.00, (4096, 32768), 115, 60, 0.10),
        "data": SectionProfile(0.90, (512, 8192), 60, 50, 0.50),
        "rdata": SectionProfile(0.85, (1024, 8192), 70, 50, 0.30),
        "rsrc": SectionProfile(0.90, (2048, 16384), 50, 40, 0.45),
        "reloc": SectionProfile(0.85, (256, 4096), 40, 30, 0.20),
    }


def _malware_profiles() -> dict[str, SectionProfile]:
    return {
        "text": SectionProfile(0.97, (4096, 32768), 115, 60, 0.10),
        "data": SectionProfile(0.75, (512, 8192), 75, 50, 0.40),
        "rdata": SectionProfile(0.60, (1024, 8192), 80, 50, 0.30),
        "rsrc": SectionProfile(0.95, (2048, 16384), 50, 40, 0.70, payload_prob=0.95),
        "reloc": SectionProfile(0.35, (256, 4096), 45, 30, 0.20),
    }


@dataclass
class CorpusConfig:
    n_benign: int = 1000
    n_malware: int = 1000
    seed: int = 0
    benign: dict[str, SectionProfile] = field(default_factory=_benign_profiles)
    malware: dict[str, SectionProfile] = field(default_factory=_malware_profiles)

    def __post_init__(self):
        if self.n_benign < 0 or self.n_malware < 0:
            raise ValueError("file counts must be >= 0")
        for label, profiles in (("benign", self.benign), ("malware", self.malware)):
            missing = set(SECTION_KEYS) - set(profiles)
            if missing:
                raise ValueError(f"{label} profile lacks sections {sorted(missing)}")

    def profiles(self, label: int) -> dict[str, SectionProfile]:
        return self.malware if label else self.benign

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "CorpusConfig":
        obj = dict(obj)
        base = cls()
        for label in ("benign", "malware"):
            if label in obj:
                profiles = dict(getattr(base, label))
                for key, values in obj[label].items():
                    profiles[key] = replace(profiles[key], **values) if key in profiles \
                        else SectionProfile(**values)
                obj[label] = profiles
        return cls(**obj)

    @classmethod
    def from_json(cls, path) -> "CorpusConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


# ---------------------------------------------------------------- generation


def _section_bytes(profile: SectionProfile, rng: np.random.Generator) -> bytes:
    size = int(rng.integers(profile.size[0], profile.size[1] + 1))
    n_blocks = -(-size // _BLOCK)
    values = rng.normal(profile.mean, profile.width, size=n_blocks * _BLOCK)
    zero = rng.random(n_blocks) < profile.zero_fraction
    values[np.repeat(zero, _BLOCK)] = 0.0
    content = np.clip(np.rint(values), 0, 255).astype(np.uint8)[:size]
    if profile.payload_prob and rng.random() < profile.payload_prob:
        frac = rng.uniform(*profile.payload_fraction)
        length = max(1, int(frac * size))
        start = size - length if profile.payload_at_end else int(rng.integers(0, size - length + 1))
        content[start:start + length] = rng.integers(0, 256, size=length, dtype=np.uint8)
    return content.tobytes()


def generate_file(config: CorpusConfig, label: int, index: int) -> tuple[bytes, list[SectionRecord]]:
    """One synthetic PE; depends only on (seed, label, index)."""
    rng = np.random.default_rng([config.seed, label, index])
    sections = []
    for key, profile in config.profiles(label).items():
        if rng.random() < profile.presence:
            sections.append(("." + key, _section_bytes(profile, rng)))
    return build_pe(sections)


@dataclass
class ManifestRow:
    path: str
    sha256: str
    label: int
    split: str = ""
    fold: str = ""


@dataclass
class Manifest:
    rows: list[ManifestRow]
    root: Path = field(default_factory=Path)

    def resolve(self, row: ManifestRow) -> Path:
        path = Path(row.path)
        return path if path.is_absolute() else self.root / path

    def select(self, split: str | None = None, fold: str | None = None) -> list[ManifestRow]:
        return [r for r in self.rows
                if (split is None or r.split == split) and (fold is None or r.fold == fold)]

    def write(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(MANIFEST_HEADER)
            for r in self.rows:
                writer.writerow([r.path, r.sha256, r.label, r.split, r.fold])

    @classmethod
    def read(cls, path) -> "Manifest":
        """Read a manifest CSV; the ``fold`` column is optional (missing means train)."""
        path = Path(path)
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            required = {"path", "sha256", "label", "split"}
            if reader.fieldnames is None or not required <= set(reader.fieldnames):
                raise ValueError(f"manifest needs columns {sorted(required)}")
            rows = []
            for rec in reader:
                label = int(rec["label"])
                if label not in (0, 1):
                    raise ValueError(f"label must be 0 or 1, got {label}")
                split = rec["split"] or ""
                fold = rec.get("fold") or ("train" if split in SPLITS[:2] else "")
                rows.append(ManifestRow(rec["path"], rec["sha256"].lower(), label, split, fold))
        return cls(rows, path.parent)


def gen_corpus(config: CorpusConfig, out_dir) -> Manifest:
    """Write ``n_benign + n_malware`` PE files under ``out_dir/files`` and return their manifest."""
    out_dir = Path(out_dir)
    files = out_dir / "files"
    files.mkdir(parents=True, exist_ok=True)
    rows = []
    for label, count, tag in ((0, config.n_benign, "benign"), (1, config.n_malware, "malware")):
        for i in range(count):
            data, _ = generate_file(config, label, i)
            name = f"{tag}_{i:05d}.exe"
            (files / name).write_bytes(data)
            rows.append(ManifestRow(f"files/{name}", hashlib.sha256(data).hexdigest(), label))
    log.info("generated %d files in %s", len(rows), files)
    return Manifest(rows, out_dir)


# ------------------------------------------------------------------- splitting


def _allocate(n: int, ratios) -> list[int]:
    """Largest-remainder rounding of n * ratios to integers summing to n."""
    raw = np.asarray(ratios, dtype=float) * n
    counts = np.floor(raw).astype(int)
    remainder = n - counts.sum()
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[:remainder]:
        counts[i] += 1
    return counts.tolist()


def split_dataset(manifest: Manifest, ratios=(1 / 3, 1 / 3, 1 / 3), train_val=(0.7, 0.3),
                  seed: int = 0) -> Manifest:
    """Stratified three-way split, with a stratified train/val fold inside the first two splits.

    Rows repeating an earlier sha256 are dropped so no file can land in two splits.
    """
    if not manifest.rows:
        raise EmptyManifest("nothing to split")
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or min(ratios) < 0 or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three non-negative values summing to 1, got {ratios}")
    if len(train_val) != 2 or min(train_val) < 0 or abs(sum(train_val) - 1.0) > 1e-9:
        raise ValueError(f"train_val must be two non-negative values summing to 1, got {train_val}")

    seen = set()
    rows = []
    for r in manifest.rows:
        if r.sha256 in seen:
            log.warning("dropping duplicate sha256 %s (%s)", r.sha256, r.path)
            continue
        seen.add(r.sha256)
        rows.append(ManifestRow(r.path, r.sha256, r.label))

    rng = np.random.default_rng(seed)
    for label in (0, 1):
        members = [i for i, r in enumerate(rows) if r.label == label]
        order = [members[j] for j in rng.permutation(len(members))]
        start = 0
        for split, count in zip(SPLITS, _allocate(len(order), ratios)):
            chunk = order[start:start + count]
            start += count
            n_train = _allocate(len(chunk), train_val)[0] if split != "test" else 0
            for pos, i in enumerate(chunk):
                rows[i].split = split
                if split != "test":
                    rows[i].fold = "train" if pos < n_train else "val"
    return Manifest(rows, manifest.root)
