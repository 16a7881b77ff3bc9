"""64-bit FNV-1a digest used to identify weight files."""

from pathlib import Path
from typing import Union

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
MASK64 = (1 << 64) - 1


def fnv1a_64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * FNV_PRIME) & MASK64
    return h


def file_digest(path: Union[str, Path]) -> str:
    """Lowercase 16-digit hex FNV-1a of a file's bytes."""
    return f"{fnv1a_64(Path(path).read_bytes()):016x}"
