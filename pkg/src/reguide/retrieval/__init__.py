"""Embedding index, anchor retrieval and the batch retrieval protocol."""

from reguide.retrieval.evaluation import (
    RetrievalReport,
    recall_from_embeddings,
    retrieval_eval,
)
from reguide.retrieval.index import (
    RetrievalIndex,
    build_index,
    load_index,
    retrieve_anchor,
    save_index,
)

__all__ = [
    "RetrievalIndex",
    "RetrievalReport",
    "build_index",
    "load_index",
    "recall_from_embeddings",
    "retrieval_eval",
    "retrieve_anchor",
    "save_index",
]
