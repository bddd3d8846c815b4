import hashlib
import struct

from typing import List, Tuple

import numpy as np

from kern_core.exceptions.FormatException import FormatException

DIGEST_SIZE = hashlib.sha256().digest_size


class BinaryWriter:
    """Little-endian record writer; ``finish`` appends the SHA-256 digest of the payload."""

    def __init__(self):
        self._chunks: List[bytes] = []

    def write_bytes(self, value: bytes):
        self._chunks.append(value)

    def write_uint32(self, value: int):
        self._chunks.append(struct.pack("<I", value))

    def write_string(self, value: str):
        encoded = value.encode("utf-8")
        self.write_uint32(len(encoded))
        self._chunks.append(encoded)

    def write_array(self, value: np.ndarray):
        self._chunks.append(np.ascontiguousarray(value, dtype="<f8").tobytes())

    def finish(self) -> bytes:
        payload = b"".join(self._chunks)
        return payload + hashlib.sha256(payload).digest()


class BinaryReader:
    def __init__(self, data: bytes, path: str):
        self._path = path
        if len(data) < DIGEST_SIZE:
            raise FormatException("file is truncated", path)

        self._payload = data[:-DIGEST_SIZE]
        self._digest = data[-DIGEST_SIZE:]
        self._offset = 0

    def verify_checksum(self):
        if hashlib.sha256(self._payload).digest() != self._digest:
            raise FormatException("checksum mismatch, the file is corrupted or truncated", self._path)

    def read_bytes(self, size: int) -> bytes:
        end = self._offset + size
        if end > len(self._payload):
            raise FormatException("file is truncated", self._path)
        value = self._payload[self._offset:end]
        self._offset = end

        return value

    def read_uint32(self) -> int:
        return struct.unpack("<I", self.read_bytes(4))[0]

    def read_string(self) -> str:
        size = self.read_uint32()
        try:
            return self.read_bytes(size).decode("utf-8")
        except UnicodeDecodeError:
            raise FormatException("invalid UTF-8 name", self._path)

    def read_array(self, shape: Tuple[int, ...]) -> np.ndarray:
        count = int(np.prod(shape)) if shape else 1
        raw = self.read_bytes(8 * count)
        return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)

    def ensure_consumed(self):
        if self._offset != len(self._payload):
            raise FormatException("unexpected trailing data", self._path)
