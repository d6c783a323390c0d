"""Semantic shift detection toolkit for diachronic corpora.

Pipeline stages: clean and chunk raw corpora, find target-word occurrences,
attach contextual embeddings, jointly cluster usages into senses, measure
per-sense change (CD/PRT, gained/lost senses), and export DWUG projections.
"""

__version__ = "0.1.0"
