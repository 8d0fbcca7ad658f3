"""Weighted word-embedding aggregation for very short texts.

Builds single-vector representations of short texts by sorting words on
inverse document frequency, weighting each rank with a learned scalar and
averaging the weighted embeddings.  Includes contrastive and median-based
training losses, pair-dataset generation from local corpora, baseline
aggregators and a pair-classification evaluation harness.
"""

__version__ = "0.1.0"
