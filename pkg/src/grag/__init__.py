"""Graph-based document reranking over AMR overlap."""

__version__ = "0.1.0"
