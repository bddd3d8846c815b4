from pathlib import Path
from typing import Union

from loguru import logger

from kern_core.domain.dataset_schema import DatasetSchema
from kern_core.domain.knowledge_base import KnowledgeBase
from kern_core.exceptions.FormatException import FormatException
from kern_core.storage.binary_format import BinaryReader, BinaryWriter
from kern_core.storage.storage import StorageBase
from kern_core.utils.file_utils import atomic_write

KNOWLEDGE_BASE_MAGIC = b"KERNKB1"
KNOWLEDGE_BASE_VERSION = 1


class KnowledgeBaseStorage(StorageBase):
    """
    Layout: magic, uint32 version, uint32 C, uint32 K, C category names, K predicate
    names (uint32 length + UTF-8), C*C co-occurrence values, C*C*K prior values
    (little-endian float64), SHA-256 of all preceding bytes.
    """

    def __init__(self, path: Union[str, Path]):
        super().__init__(Path(path))

    def save(self, kb: KnowledgeBase):
        writer = BinaryWriter()
        writer.write_bytes(KNOWLEDGE_BASE_MAGIC)
        writer.write_uint32(KNOWLEDGE_BASE_VERSION)
        writer.write_uint32(kb.num_categories)
        writer.write_uint32(kb.num_predicates)
        for name in kb.schema.category_names + kb.schema.predicate_names:
            writer.write_string(name)
        writer.write_array(kb.cooccurrence)
        writer.write_array(kb.relation_prior)

        logger.info(f"Save knowledge base (C={kb.num_categories}, K={kb.num_predicates}) to '{self.path}'")

        with atomic_write(self.path, mode="wb") as f:
            f.write(writer.finish())

    def load(self) -> KnowledgeBase:
        if not self.exists():
            raise FormatException("knowledge base file does not exist", str(self.path))

        logger.info(f"Load knowledge base from '{self.path}'")

        reader = BinaryReader(self.path.read_bytes(), str(self.path))
        if reader.read_bytes(len(KNOWLEDGE_BASE_MAGIC)) != KNOWLEDGE_BASE_MAGIC:
            raise FormatException("wrong magic bytes, not a knowledge base file", str(self.path))

        version = reader.read_uint32()
        if version != KNOWLEDGE_BASE_VERSION:
            raise FormatException(f"unsupported knowledge base version {version}, "
                                  f"expected {KNOWLEDGE_BASE_VERSION}", str(self.path))

        reader.verify_checksum()

        num_categories = reader.read_uint32()
        num_predicates = reader.read_uint32()
        categories = [reader.read_string() for _ in range(num_categories)]
        predicates = [reader.read_string() for _ in range(num_predicates)]
        cooccurrence = reader.read_array((num_categories, num_categories))
        relation_prior = reader.read_array((num_categories, num_categories, num_predicates))
        reader.ensure_consumed()

        return KnowledgeBase(DatasetSchema(categories, predicates), cooccurrence, relation_prior)
