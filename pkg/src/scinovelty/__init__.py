"""Content and influence metrics for citation corpora.

Typical flow: ingest a corpus, disambiguate authors, fit a topic model,
compute per-paper metrics, then analyse superstar influence.
"""

__version__ = "0.1.0"
