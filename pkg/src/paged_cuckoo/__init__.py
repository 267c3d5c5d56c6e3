"""Paged cuckoo hashing: disjoint, overlapping and choose-k bucket layouts."""

from .geometry import BucketRef, TableParams, Variant, binom, bucket_cells, buckets_per_page, hash_to_buckets, unrank_k_subset
from .table import CuckooTable, InsertOutcome, fill_until_failure, new_table

__all__ = [
    "BucketRef",
    "CuckooTable",
    "InsertOutcome",
    "TableParams",
    "Variant",
    "binom",
    "bucket_cells",
    "buckets_per_page",
    "fill_until_failure",
    "hash_to_buckets",
    "new_table",
    "unrank_k_subset",
]
