"""Corpus-to-embedding exporter for the gistcast binary format."""

from .export import CorpusError, EmbedJob, EncoderError, export, make_encoder

__all__ = ["CorpusError", "EmbedJob", "EncoderError", "export", "make_encoder"]

__version__ = "0.1.0"
