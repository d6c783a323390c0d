"""Contextual-embedding exporter for BERT-like checkpoints.

Reads occurrence and chunk files, runs the model over each occurrence's
chunk, pools the hidden states over the target word's subword positions and
writes the vectors as an SSDE store plus a JSON manifest.
"""

from .exporter import ExportJob, export

__all__ = ["ExportJob", "export"]

__version__ = "0.1.0"
