"""Contextual-embedding exporter for the MWEE binary format."""

from .export import ExportSpec, ModelLoadFailure, TokenizationMismatch, export

__version__ = "0.1.0"
