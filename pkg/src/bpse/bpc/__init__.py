"""Broad phonetic classes: knowledge-based tables and confusion-driven clustering."""
from .core import (CRITERIA, ConfusionMatrix, Partition, PhoneInventory, SimilarityMatrix, agglomerate,
                   knowledge_partition, relabel, similarity_from_confusion, similarity_values,
                   timit_inventory)

__all__ = ["CRITERIA", "ConfusionMatrix", "Partition", "PhoneInventory", "SimilarityMatrix",
           "agglomerate", "knowledge_partition", "relabel", "similarity_from_confusion",
           "similarity_values", "timit_inventory"]
