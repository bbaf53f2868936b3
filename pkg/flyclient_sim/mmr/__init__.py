from .mmr import (
    AncestryCheck,
    AncestryProof,
    Mmr,
    ProofStructureError,
    Span,
    ancestry_proof_indices,
    bag_peaks,
    cover,
    cumulative_proof_indices,
    leaf_index,
    node_count,
    peaks,
    prefix_work,
    reconstruct_root,
    verify_ancestry,
)
from .node import (
    DistilledFormat,
    LeafMeta,
    MmrNode,
    NodeFormat,
    PlainFormat,
    ZcashFormat,
    make_node_format,
)

__all__ = [
    "AncestryCheck",
    "AncestryProof",
    "Mmr",
    "ProofStructureError",
    "Span",
    "ancestry_proof_indices",
    "bag_peaks",
    "cover",
    "cumulative_proof_indices",
    "leaf_index",
    "node_count",
    "peaks",
    "prefix_work",
    "reconstruct_root",
    "verify_ancestry",
    "DistilledFormat",
    "LeafMeta",
    "MmrNode",
    "NodeFormat",
    "PlainFormat",
    "ZcashFormat",
    "make_node_format",
]
