"""Distributed QCNN malware detection over PE section images."""

__version__ = "0.1.0"

SECTION_KEYS = ("text", "data", "rdata", "rsrc", "reloc")
BIT_CONVENTION = "qubit0_msb"
