"""Checkpoint-to-store exporter for late-interaction token embeddings."""

from .checkpoint import LoadedCheckpoint, load_checkpoint
from .export import ExportSpec, export_collection, export_queries, write_vocab_file
from .store_writer import StoreWriter

__version__ = "0.1.0"

__all__ = [
    "ExportSpec",
    "LoadedCheckpoint",
    "StoreWriter",
    "export_collection",
    "export_queries",
    "load_checkpoint",
    "write_vocab_file",
]
