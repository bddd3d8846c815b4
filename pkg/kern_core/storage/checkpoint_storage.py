from pathlib import Path
from typing import Union

from loguru import logger

from kern_core.exceptions.FormatException import FormatException
from kern_core.parameter_set import ParameterSet
from kern_core.storage.binary_format import BinaryReader, BinaryWriter
from kern_core.storage.storage import StorageBase
from kern_core.utils.file_utils import atomic_write

CHECKPOINT_MAGIC = b"KERNCKPT"
CHECKPOINT_VERSION = 1


class CheckpointStorage(StorageBase):
    """
    Layout: magic, uint32 version, uint32 record count, then per parameter in name
    order: name, uint32 ndim, uint32 dims, little-endian float64 values; SHA-256 trailer.
    """

    def __init__(self, path: Union[str, Path]):
        super().__init__(Path(path))

    @staticmethod
    def encode(params: ParameterSet) -> bytes:
        writer = BinaryWriter()
        writer.write_bytes(CHECKPOINT_MAGIC)
        writer.write_uint32(CHECKPOINT_VERSION)
        writer.write_uint32(len(params))
        for name, tensor in params.items():
            writer.write_string(name)
            writer.write_uint32(tensor.ndim)
            for dim in tensor.shape:
                writer.write_uint32(dim)
            writer.write_array(tensor.data)

        return writer.finish()

    def save(self, params: ParameterSet):
        logger.debug(f"Save checkpoint with {len(params)} parameters to '{self.path}'")

        with atomic_write(self.path, mode="wb") as f:
            f.write(self.encode(params))

    def load(self) -> ParameterSet:
        if not self.exists():
            raise FormatException("checkpoint file does not exist", str(self.path))

        logger.info(f"Load checkpoint from '{self.path}'")

        reader = BinaryReader(self.path.read_bytes(), str(self.path))
        if reader.read_bytes(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
            raise FormatException("wrong magic bytes, not a checkpoint file", str(self.path))

        version = reader.read_uint32()
        if version != CHECKPOINT_VERSION:
            raise FormatException(f"unsupported checkpoint version {version}, "
                                  f"expected {CHECKPOINT_VERSION}", str(self.path))

        reader.verify_checksum()

        arrays = {}
        for _ in range(reader.read_uint32()):
            name = reader.read_string()
            shape = tuple(reader.read_uint32() for _ in range(reader.read_uint32()))
            if name in arrays:
                raise FormatException(f"duplicate parameter '{name}'", str(self.path))
            arrays[name] = reader.read_array(shape)
        reader.ensure_consumed()

        return ParameterSet.from_arrays(arrays)
