"""Minimal PE reader: locate the section table and slice raw section bytes.

Only three structures are read: ``e_lfanew`` in the DOS header, the COFF file
header (for ``NumberOfSections`` and ``SizeOfOptionalHeader``) and the section
table itself. The optional header is skipped, never interpreted.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .errors import MissingMzMagic, MissingPeSignature, TruncatedHeader

DOS_MAGIC = b"MZ"
PE_SIGNATURE = b"PE\0\0"
E_LFANEW_OFFSET = 0x3C
COFF_HEADER_SIZE = 20
SECTION_HEADER_SIZE = 40

_COFF = struct.Struct("<HHIIIHH")
_SECTION = struct.Struct("<8sIIIIIIHHI")


@dataclass(frozen=True)
class SectionRecord:
    name: str
    raw_offset: int
    raw_size: int

    @property
    def empty(self) -> bool:
        return self.raw_size == 0


@dataclass(frozen=True)
class PeLayout:
    sections: tuple[SectionRecord, ...]
    num_sections: int

    def names(self) -> list[str]:
        return [s.name for s in self.sections]

    def find(self, name: str) -> SectionRecord | None:
        for section in self.sections:
            if section.name == name:
                return section
        return None


def _decode_name(raw: bytes, index: int) -> str:
    name = raw.rstrip(b"\0").decode("latin-1")
    # an all-NUL name would violate the non-empty invariant; use a placeholder
    # that can never collide with a dotted target name
    return name if name else f"#{index}"


def parse_pe(data: bytes) -> PeLayout:
    """Parse the section table of a PE image held in memory.

    Raw ranges that point past the end of the buffer are clipped to the bytes
    actually present, so every returned record satisfies
    ``raw_offset + raw_size <= len(data)``.

    Raises:
        MissingMzMagic: the buffer does not start with ``MZ``.
        MissingPeSignature: no ``PE\\0\\0`` at the offset stored in ``e_lfanew``.
        TruncatedHeader: the COFF header or the section table runs past EOF.
    """
    if not isinstance(data, (bytes, bytearray)):
        data = bytes(data)
    size = len(data)
    if size < 2 or bytes(data[:2]) != DOS_MAGIC:
        raise MissingMzMagic("file does not start with 'MZ'")
    if size < E_LFANEW_OFFSET + 4:
        raise TruncatedHeader("DOS header shorter than 64 bytes")
    (e_lfanew,) = struct.unpack_from("<I", data, E_LFANEW_OFFSET)
    if e_lfanew + 4 > size or bytes(data[e_lfanew:e_lfanew + 4]) != PE_SIGNATURE:
        raise MissingPeSignature(f"no PE signature at e_lfanew={e_lfanew:#x}")

    coff_at = e_lfanew + 4
    if coff_at + COFF_HEADER_SIZE > size:
        raise TruncatedHeader("COFF header extends past end of file")
    _, num_sections, _, _, _, opt_size, _ = _COFF.unpack_from(data, coff_at)

    table_at = coff_at + COFF_HEADER_SIZE + opt_size
    table_end = table_at + num_sections * SECTION_HEADER_SIZE
    if table_end > size:
        raise TruncatedHeader(
            f"section table [{table_at:#x}, {table_end:#x}) extends past EOF ({size:#x})"
        )

    sections = []
    for i in range(num_sections):
        fields = _SECTION.unpack_from(data, table_at + i * SECTION_HEADER_SIZE)
        raw_name, raw_size, raw_offset = fields[0], fields[3], fields[4]
        if raw_offset >= size:
            raw_offset, raw_size = min(raw_offset, size), 0
        raw_size = min(raw_size, size - raw_offset)
        sections.append(SectionRecord(_decode_name(raw_name, i), raw_offset, raw_size))
    return PeLayout(tuple(sections), num_sections)


def extract_section(data: bytes, layout: PeLayout, name: str) -> bytes | None:
    """Raw bytes of the first section called exactly `name`, or None if absent or empty."""
    section = layout.find(name)
    if section is None or section.empty:
        return None
    return bytes(data[section.raw_offset:section.raw_offset + section.raw_size])


def read_layout(path) -> tuple[bytes, PeLayout]:
    with open(path, "rb") as fh:
        data = fh.read()
    return data, parse_pe(data)
