import hashlib
import json
import math
import os
import tempfile
from typing import Any, Callable, Dict, Tuple

HashFn = Callable[[bytes], bytes]

ZERO_HASH = bytes(32)
MAX_TARGET = (1 << 256) - 1


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def sha256d(data: bytes) -> bytes:
    return hashlib.sha256(hashlib.sha256(data).digest()).digest()


def bits_to_target(bits: int) -> int:
    """
    Expand a 4-byte compact difficulty encoding into a full target.
    """
    size = bits >> 24
    mantissa = bits & 0x7FFFFF
    if bits & 0x800000:
        raise ValueError(f"negative compact target: {bits:#010x}")
    if size <= 3:
        return mantissa >> (8 * (3 - size))
    return mantissa << (8 * (size - 3))


def target_to_bits(target: int) -> int:
    """
    Compress a target into the 4-byte compact encoding, keeping the three
    most significant bytes.
    """
    assert 0 < target <= MAX_TARGET, "target out of range"
    size = (target.bit_length() + 7) // 8
    if size <= 3:
        mantissa = target << (8 * (3 - size))
    else:
        mantissa = target >> (8 * (size - 3))
    if mantissa & 0x800000:
        mantissa >>= 8
        size += 1
    return (size << 24) | mantissa


def work_from_target(target: int) -> int:
    return (1 << 256) // (target + 1)


def work_from_bits(bits: int) -> int:
    return work_from_target(bits_to_target(bits))


def compact_size(n: int) -> bytes:
    """
    Encode an integer with the 1/3/5/9-byte variable length scheme.
    """
    assert n >= 0, "compact size must be non-negative"
    if n < 0xFD:
        return bytes([n])
    elif n <= 0xFFFF:
        return b"\xfd" + n.to_bytes(2, "little")
    elif n <= 0xFFFFFFFF:
        return b"\xfe" + n.to_bytes(4, "little")
    return b"\xff" + n.to_bytes(8, "little")


def read_compact_size(data: bytes, offset: int) -> Tuple[int, int]:
    """
    Decode a compact size at offset, returning (value, next_offset).
    """
    if offset >= len(data):
        raise ValueError("truncated compact size")
    prefix = data[offset]
    width = {0xFD: 2, 0xFE: 4, 0xFF: 8}.get(prefix)
    if width is None:
        return prefix, offset + 1
    end = offset + 1 + width
    if end > len(data):
        raise ValueError("truncated compact size")
    return int.from_bytes(data[offset + 1 : end], "little"), end


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def canonical_json(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def json_digest(obj: Dict[str, Any]) -> bytes:
    return sha256(canonical_json(obj))


def atomic_write(path: str, data: bytes):
    dirname = os.path.dirname(os.path.abspath(path))
    with tempfile.TemporaryDirectory(dir=dirname) as tmp_dir:
        tmp_file = os.path.join(tmp_dir, "out.bin")
        with open(tmp_file, "wb") as f:
            f.write(data)
        os.rename(tmp_file, path)
