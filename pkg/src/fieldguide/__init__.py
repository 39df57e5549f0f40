"""Fine-grained entity identification from layperson descriptions.

The pipeline ranks an expert corpus (one document per category) against
free-text visual descriptions: deterministic text processing, sentence
embeddings, a trainable sentence-pair matcher, document scoring, classic
IR baselines, an evaluation harness, and an HTTP identification service.
"""

__version__ = "0.1.0"
